#include "maulab/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "maulab/error.hpp"

namespace maulab {

PRF1 prf1_from_counts(int64_t tp, int64_t fp, int64_t fn) {
  PRF1 r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  r.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  r.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  r.f1 = r.precision + r.recall > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

PRF1 prf1(const std::vector<std::vector<uint8_t>>& decisions,
          const std::vector<std::vector<uint8_t>>& labels) {
  if (decisions.size() != labels.size())
    fail(ErrorKind::Contract, "prf1: utterance counts differ");
  int64_t tp = 0, fp = 0, fn = 0;
  for (size_t u = 0; u < decisions.size(); ++u) {
    if (decisions[u].size() != labels[u].size())
      fail(ErrorKind::Contract, "prf1: length mismatch at utterance " + std::to_string(u));
    for (size_t i = 0; i < decisions[u].size(); ++i) {
      bool d = decisions[u][i] != 0, l = labels[u][i] != 0;
      if (d && l) ++tp;
      else if (d && !l) ++fp;
      else if (!d && l) ++fn;
    }
  }
  return prf1_from_counts(tp, fp, fn);
}

std::optional<double> mask_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    fail(ErrorKind::Contract, "mask_auc: scores and labels differ in length");
  int64_t positives = 0, negatives = 0;
  for (int l : labels) (l != 0 ? positives : negatives)++;
  if (positives == 0 || negatives == 0) return std::nullopt;

  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // Midranks over tied scores so constant scores give exactly 0.5.
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (size_t k = i; k <= j; ++k)
      if (labels[order[k]] != 0) rank_sum_pos += midrank;
    i = j + 1;
  }
  double u_stat = rank_sum_pos -
                  static_cast<double>(positives) * (static_cast<double>(positives) + 1.0) / 2.0;
  return u_stat / (static_cast<double>(positives) * static_cast<double>(negatives));
}

RecoveryCounts recovery_counts(const std::vector<int32_t>& corrected,
                               const std::vector<int32_t>& reference,
                               const std::vector<uint8_t>& masked_positions) {
  if (corrected.size() != reference.size() || corrected.size() != masked_positions.size())
    fail(ErrorKind::Contract, "recovery: sequence lengths differ");
  RecoveryCounts counts;
  for (size_t t = 0; t < corrected.size(); ++t) {
    if (!masked_positions[t]) continue;  // unmasked positions never counted
    ++counts.masked;
    if (corrected[t] == reference[t]) ++counts.matched;
  }
  return counts;
}

std::optional<double> recovery_rate(const std::vector<int32_t>& corrected,
                                    const std::vector<int32_t>& reference,
                                    const std::vector<uint8_t>& masked_positions) {
  return recovery_counts(corrected, reference, masked_positions).rate();
}

double frame_mse(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty())
    fail(ErrorKind::Contract, "frame_mse: size mismatch or empty input");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

}  // namespace maulab
