#ifndef MAULAB_INFERENCE_HPP
#define MAULAB_INFERENCE_HPP

#include <cstdint>
#include <vector>

#include "maulab/seq2seq.hpp"
#include "maulab/vq.hpp"

namespace maulab {

struct DetectionConfig {
  double phoneme_threshold = 0.4;  // H
  double au_mask_threshold = 0.5;  // AU-level masking threshold for correction

  void validate() const;
};

struct AlignmentResult {
  int64_t t_len = 0;
  int64_t phoneme_len = 0;
  std::vector<double> attention_avg;   // T × L, heads averaged
  std::vector<double> phoneme_scores;  // Ê, length L
  std::vector<uint8_t> decisions;      // Ê > H
  bool zero_mass_warning = false;      // some phoneme received no attention
};

// Attention-weighted mean of the unit-level error probabilities per phoneme:
// Ê_i = Σ_j A[j,i]·M̂_j / Σ_j A[j,i]. A phoneme with zero total attention
// mass scores 0 and raises the warning flag.
std::vector<double> phoneme_error_scores(const std::vector<double>& mask_probs,
                                         const std::vector<double>& attention_avg,
                                         int64_t t_len, int64_t phoneme_len,
                                         bool* zero_mass_warning = nullptr);

// Head-averaged [T, L] map from a detector output.
std::vector<double> average_attention_heads(const DetectorOutput& output);

struct DetectionResult {
  AlignmentResult alignment;
  std::vector<double> mask_probs;  // M̂ per unit position
};

DetectionResult detect(const AUSequence& au, const std::vector<int32_t>& phonemes,
                       const Seq2SeqModel& detector, const DetectionConfig& cfg);

struct CorrectionResult {
  std::vector<int32_t> corrected_units;
  std::vector<uint8_t> fill_mask;        // positions replaced by the corrector
  std::vector<double> corrected_frames;  // decoded from the corrected units
  int64_t n_frames = 0;
  int64_t frame_dim = 0;
};

// Masks unit positions with M̂ above the threshold, fills them in one
// non-autoregressive pass (mask token excluded from the argmax), copies every
// other position verbatim, and decodes the result to frames.
CorrectionResult correct(const AUSequence& au, const std::vector<int32_t>& phonemes,
                         const std::vector<double>& mask_probs,
                         const Seq2SeqModel& corrector, const VQModel& vq,
                         const DetectionConfig& cfg, int64_t target_frames);

}  // namespace maulab

#endif
