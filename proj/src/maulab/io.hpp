#ifndef MAULAB_IO_HPP
#define MAULAB_IO_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace maulab {

// All writers go through a temp file + rename so readers never observe a
// partially written artifact.
void atomic_write_file(const std::string& path, std::span<const char> bytes);
void atomic_write_text(const std::string& path, const std::string& text);
std::string read_file(const std::string& path);
bool file_exists(const std::string& path);
void ensure_dir(const std::string& path);

std::string fnv1a64_hex(std::span<const char> bytes);
std::string fnv1a64_hex(const std::string& s);
std::string file_digest(const std::string& path);

void write_json(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json(const std::string& path);

void write_jsonl(const std::string& path, std::span<const nlohmann::json> records);
std::vector<nlohmann::json> read_jsonl(const std::string& path);

// Per-utterance continuous frames, one binary file per split. Layout per
// record: u32 LE id length, id bytes, u32 LE n_frames, u32 LE dim, then
// n_frames*dim row-major little-endian float32.
struct FrameRecord {
  std::string id;
  uint32_t n_frames = 0;
  uint32_t dim = 0;
  std::vector<float> data;
};

void write_frames_file(const std::string& path, std::span<const FrameRecord> records);
std::vector<FrameRecord> read_frames_file(const std::string& path);

// Provenance sidecar for artifacts whose byte format has no header of its
// own. Written next to the artifact as <path>.meta.json.
void write_meta(const std::string& artifact_path, const std::string& stage,
                const std::string& config_digest, uint64_t seed);
nlohmann::json read_meta(const std::string& artifact_path);

}  // namespace maulab

#endif
