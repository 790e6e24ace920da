#ifndef MAULAB_METRICS_HPP
#define MAULAB_METRICS_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace maulab {

struct PRF1 {
  int64_t tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

PRF1 prf1_from_counts(int64_t tp, int64_t fp, int64_t fn);

// Micro-averaged over all phonemes of the split: one global confusion count,
// not a per-utterance mean.
PRF1 prf1(const std::vector<std::vector<uint8_t>>& decisions,
          const std::vector<std::vector<uint8_t>>& labels);

// Rank-statistic ROC AUC (Mann-Whitney, midranks for ties). Absent when the
// labels are single-class.
std::optional<double> mask_auc(std::span<const double> scores, std::span<const int> labels);

struct RecoveryCounts {
  int64_t matched = 0;
  int64_t masked = 0;

  std::optional<double> rate() const {
    if (masked == 0) return std::nullopt;
    return static_cast<double>(matched) / static_cast<double>(masked);
  }
};

// Exact-match rate between corrected units and the reference encoding at the
// masked positions only.
RecoveryCounts recovery_counts(const std::vector<int32_t>& corrected,
                               const std::vector<int32_t>& reference,
                               const std::vector<uint8_t>& masked_positions);

std::optional<double> recovery_rate(const std::vector<int32_t>& corrected,
                                    const std::vector<int32_t>& reference,
                                    const std::vector<uint8_t>& masked_positions);

double frame_mse(std::span<const double> a, std::span<const double> b);

}  // namespace maulab

#endif
