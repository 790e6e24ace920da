#ifndef MAULAB_CORPUS_HPP
#define MAULAB_CORPUS_HPP

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "maulab/rng.hpp"

namespace maulab {

struct CorpusParams {
  int64_t phoneme_vocab = 32;
  int64_t frame_dim = 16;
  int64_t accent_count = 8;       // phonemes with a substitute prototype
  double error_rate = 0.5;        // substitution probability per mapped L2 phoneme
  int64_t l1_train_count = 300;
  int64_t l2_train_count = 150;
  int64_t l2_test_count = 60;
  int64_t min_len = 8, max_len = 20;  // phonemes per utterance
  int64_t min_dur = 3, max_dur = 6;   // frames per phoneme
  double noise_sigma_scale = 0.1;     // × min inter-prototype distance
  double min_separation = 1.0;        // pairwise floor for true prototypes

  void validate() const;
  nlohmann::json to_json() const;
  static CorpusParams from_json(const nlohmann::json& j);
};

// True phoneme prototypes plus substitute prototypes for accented phonemes.
// Substitutes sit midway between two true prototypes, so they are close to
// real phonemes without matching any of them.
struct PhonemeInventory {
  int64_t phoneme_vocab = 0;
  std::vector<std::vector<double>> prototypes;  // true first, then substitutes
  std::map<int32_t, int32_t> accent_map;        // phoneme id -> substitute row
  double noise_sigma = 0.0;

  int64_t frame_dim() const {
    return prototypes.empty() ? 0 : static_cast<int64_t>(prototypes[0].size());
  }
};

PhonemeInventory build_inventory(Rng rng, const CorpusParams& params);

struct Utterance {
  std::string id;
  std::vector<int32_t> phonemes;
  std::vector<uint8_t> error_labels;                    // per phoneme
  std::vector<std::pair<int64_t, int64_t>> frame_spans; // [start, end) per phoneme
  int64_t n_frames = 0;
  int64_t frame_dim = 0;
  std::vector<double> frames;      // n_frames × frame_dim, row major
  std::vector<double> ref_frames;  // same noise rendered from true prototypes
  bool has_labels = true;
};

// Each phoneme emits uniform(dur_range) frames around its prototype; mapped
// L2 phonemes switch to their substitute prototype with probability
// error_rate and get label 1. The reference rendering reuses the identical
// noise draws with the true prototypes.
Utterance generate_utterance(Rng& rng, const PhonemeInventory& inventory, bool is_l2,
                             double error_rate, std::pair<int64_t, int64_t> len_range,
                             std::pair<int64_t, int64_t> dur_range, const std::string& id);

inline constexpr const char* kSplitL1Train = "l1-train";
inline constexpr const char* kSplitL2Train = "l2-train";
inline constexpr const char* kSplitL2Test = "l2-test";

struct Corpus {
  uint64_t seed = 0;
  CorpusParams params;
  PhonemeInventory inventory;
  std::map<std::string, std::vector<Utterance>> splits;

  const std::vector<Utterance>& split(const std::string& name) const;
};

// Pure function of (seed, params).
Corpus generate_corpus(uint64_t seed, const CorpusParams& params);

void save_corpus(const Corpus& corpus, const std::string& dir,
                 const std::string& config_digest);
Corpus load_corpus(const std::string& dir);

}  // namespace maulab

#endif
