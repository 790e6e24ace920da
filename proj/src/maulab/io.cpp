#include "maulab/io.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "maulab/error.hpp"

namespace fs = std::filesystem;

namespace maulab {

namespace {

void append_u32le(std::string& out, uint32_t v) {
  char b[4];
  b[0] = static_cast<char>(v & 0xff);
  b[1] = static_cast<char>((v >> 8) & 0xff);
  b[2] = static_cast<char>((v >> 16) & 0xff);
  b[3] = static_cast<char>((v >> 24) & 0xff);
  out.append(b, 4);
}

uint32_t read_u32le(const std::string& buf, size_t& pos) {
  if (pos + 4 > buf.size()) fail(ErrorKind::Io, "truncated binary file");
  uint32_t v = static_cast<uint8_t>(buf[pos]) | (static_cast<uint8_t>(buf[pos + 1]) << 8) |
               (static_cast<uint8_t>(buf[pos + 2]) << 16) |
               (static_cast<uint8_t>(buf[pos + 3]) << 24);
  pos += 4;
  return v;
}

}  // namespace

void atomic_write_file(const std::string& path, std::span<const char> bytes) {
  fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::Io, "write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) fail(ErrorKind::Io, "rename to '" + path + "' failed: " + ec.message());
}

void atomic_write_text(const std::string& path, const std::string& text) {
  atomic_write_file(path, std::span<const char>(text.data(), text.size()));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path + "'");
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return data;
}

bool file_exists(const std::string& path) { return fs::exists(path); }

void ensure_dir(const std::string& path) {
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec) fail(ErrorKind::Io, "cannot create directory '" + path + "': " + ec.message());
}

std::string fnv1a64_hex(std::span<const char> bytes) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (char c : bytes) {
    h ^= static_cast<uint8_t>(c);
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

std::string fnv1a64_hex(const std::string& s) {
  return fnv1a64_hex(std::span<const char>(s.data(), s.size()));
}

std::string file_digest(const std::string& path) { return fnv1a64_hex(read_file(path)); }

void write_json(const std::string& path, const nlohmann::json& j) {
  atomic_write_text(path, j.dump(2) + "\n");
}

nlohmann::json read_json(const std::string& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::Io, "invalid JSON in '" + path + "': " + e.what());
  }
}

void write_jsonl(const std::string& path, std::span<const nlohmann::json> records) {
  std::string out;
  for (const auto& r : records) {
    out += r.dump();
    out += "\n";
  }
  atomic_write_text(path, out);
}

std::vector<nlohmann::json> read_jsonl(const std::string& path) {
  std::string data = read_file(path);
  std::vector<nlohmann::json> records;
  size_t pos = 0;
  while (pos < data.size()) {
    size_t end = data.find('\n', pos);
    if (end == std::string::npos) end = data.size();
    if (end > pos) {
      try {
        records.push_back(nlohmann::json::parse(data.substr(pos, end - pos)));
      } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorKind::Io, "invalid JSON line in '" + path + "': " + e.what());
      }
    }
    pos = end + 1;
  }
  return records;
}

void write_frames_file(const std::string& path, std::span<const FrameRecord> records) {
  std::string out;
  for (const FrameRecord& r : records) {
    if (r.data.size() != static_cast<size_t>(r.n_frames) * r.dim)
      fail(ErrorKind::Contract, "frame record '" + r.id + "' has inconsistent size");
    append_u32le(out, static_cast<uint32_t>(r.id.size()));
    out += r.id;
    append_u32le(out, r.n_frames);
    append_u32le(out, r.dim);
    size_t byte_count = r.data.size() * sizeof(float);
    size_t at = out.size();
    out.resize(out.size() + byte_count);
    std::memcpy(out.data() + at, r.data.data(), byte_count);
  }
  atomic_write_file(path, std::span<const char>(out.data(), out.size()));
}

std::vector<FrameRecord> read_frames_file(const std::string& path) {
  std::string buf = read_file(path);
  std::vector<FrameRecord> records;
  size_t pos = 0;
  while (pos < buf.size()) {
    FrameRecord r;
    uint32_t id_len = read_u32le(buf, pos);
    if (pos + id_len > buf.size()) fail(ErrorKind::Io, "truncated id in '" + path + "'");
    r.id = buf.substr(pos, id_len);
    pos += id_len;
    r.n_frames = read_u32le(buf, pos);
    r.dim = read_u32le(buf, pos);
    size_t byte_count = static_cast<size_t>(r.n_frames) * r.dim * sizeof(float);
    if (pos + byte_count > buf.size()) fail(ErrorKind::Io, "truncated frames in '" + path + "'");
    r.data.resize(static_cast<size_t>(r.n_frames) * r.dim);
    std::memcpy(r.data.data(), buf.data() + pos, byte_count);
    pos += byte_count;
    records.push_back(std::move(r));
  }
  return records;
}

void write_meta(const std::string& artifact_path, const std::string& stage,
                const std::string& config_digest, uint64_t seed) {
  nlohmann::json meta{
      {"stage", stage},
      {"config_digest", config_digest},
      {"seed", seed},
      {"artifact_digest", file_digest(artifact_path)},
  };
  write_json(artifact_path + ".meta.json", meta);
}

nlohmann::json read_meta(const std::string& artifact_path) {
  std::string meta_path = artifact_path + ".meta.json";
  if (!file_exists(meta_path))
    fail(ErrorKind::Dependency, "missing provenance sidecar '" + meta_path + "'");
  return read_json(meta_path);
}

}  // namespace maulab
