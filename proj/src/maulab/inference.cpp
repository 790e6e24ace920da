#include "maulab/inference.hpp"

namespace maulab {

void DetectionConfig::validate() const {
  if (phoneme_threshold <= 0.0 || phoneme_threshold >= 1.0)
    fail(ErrorKind::Config, "phoneme threshold H must lie in (0, 1)");
  if (au_mask_threshold <= 0.0 || au_mask_threshold >= 1.0)
    fail(ErrorKind::Config, "au_mask_threshold must lie in (0, 1)");
}

std::vector<double> phoneme_error_scores(const std::vector<double>& mask_probs,
                                         const std::vector<double>& attention_avg,
                                         int64_t t_len, int64_t phoneme_len,
                                         bool* zero_mass_warning) {
  if (static_cast<int64_t>(mask_probs.size()) != t_len ||
      static_cast<int64_t>(attention_avg.size()) != t_len * phoneme_len)
    fail(ErrorKind::Contract, "phoneme_error_scores shape mismatch");
  std::vector<double> scores(static_cast<size_t>(phoneme_len), 0.0);
  bool warned = false;
  for (int64_t i = 0; i < phoneme_len; ++i) {
    double weighted = 0.0, mass = 0.0;
    for (int64_t j = 0; j < t_len; ++j) {
      double a = attention_avg[j * phoneme_len + i];
      weighted += a * mask_probs[j];
      mass += a;
    }
    if (mass > 0.0) {
      scores[i] = weighted / mass;
    } else {
      scores[i] = 0.0;  // degenerate phoneme with no attention mass
      warned = true;
    }
  }
  if (zero_mass_warning) *zero_mass_warning = warned;
  return scores;
}

std::vector<double> average_attention_heads(const DetectorOutput& output) {
  if (output.cross_attention.empty())
    fail(ErrorKind::Contract, "detector output carries no attention maps");
  int64_t t_len = output.cross_attention[0].dim(0);
  int64_t phoneme_len = output.cross_attention[0].dim(1);
  std::vector<double> avg(static_cast<size_t>(t_len * phoneme_len), 0.0);
  for (const Tensor& head : output.cross_attention) {
    for (int64_t i = 0; i < t_len * phoneme_len; ++i) avg[i] += head.data()[i];
  }
  double inv = 1.0 / static_cast<double>(output.cross_attention.size());
  for (double& v : avg) v *= inv;
  return avg;
}

DetectionResult detect(const AUSequence& au, const std::vector<int32_t>& phonemes,
                       const Seq2SeqModel& detector, const DetectionConfig& cfg) {
  cfg.validate();
  NoGradGuard no_grad;
  int64_t unit_vocab = detector.config().unit_vocab();
  for (int32_t u : au.units) {
    if (u < 0 || u >= unit_vocab)
      fail(ErrorKind::Contract, "unit id " + std::to_string(u) + " in '" + au.id +
                                    "' does not match the detector vocabulary of " +
                                    std::to_string(unit_vocab));
  }
  DetectorOutput out = detector.forward(au.units, phonemes);
  DetectionResult result;
  result.mask_probs = out.mask_probs();
  result.alignment.t_len = au.length();
  result.alignment.phoneme_len = static_cast<int64_t>(phonemes.size());
  result.alignment.attention_avg = average_attention_heads(out);
  result.alignment.phoneme_scores =
      phoneme_error_scores(result.mask_probs, result.alignment.attention_avg,
                           result.alignment.t_len, result.alignment.phoneme_len,
                           &result.alignment.zero_mass_warning);
  result.alignment.decisions.resize(result.alignment.phoneme_scores.size());
  for (size_t i = 0; i < result.alignment.phoneme_scores.size(); ++i)
    result.alignment.decisions[i] =
        result.alignment.phoneme_scores[i] > cfg.phoneme_threshold ? 1 : 0;
  return result;
}

CorrectionResult correct(const AUSequence& au, const std::vector<int32_t>& phonemes,
                         const std::vector<double>& mask_probs,
                         const Seq2SeqModel& corrector, const VQModel& vq,
                         const DetectionConfig& cfg, int64_t target_frames) {
  cfg.validate();
  if (mask_probs.size() != au.units.size())
    fail(ErrorKind::Contract, "mask probabilities must cover every unit position");
  NoGradGuard no_grad;
  int64_t t_len = au.length();
  int64_t unit_vocab = corrector.config().unit_vocab();

  CorrectionResult result;
  result.fill_mask.assign(static_cast<size_t>(t_len), 0);
  std::vector<int32_t> masked_units = au.units;
  bool any_masked = false;
  for (int64_t t = 0; t < t_len; ++t) {
    if (mask_probs[t] > cfg.au_mask_threshold) {
      result.fill_mask[t] = 1;
      masked_units[t] = mask_token(unit_vocab);
      any_masked = true;
    }
  }

  result.corrected_units = au.units;  // unmasked positions stay verbatim
  if (any_masked) {
    DetectorOutput out = corrector.forward(masked_units, phonemes);
    std::vector<int32_t> filled = out.unit_argmax(/*exclude_mask_token=*/true);
    for (int64_t t = 0; t < t_len; ++t)
      if (result.fill_mask[t]) result.corrected_units[t] = filled[t];
  }

  result.corrected_frames = vq.decode(result.corrected_units, target_frames);
  result.frame_dim = vq.config().frame_dim;
  result.n_frames =
      static_cast<int64_t>(result.corrected_frames.size()) / result.frame_dim;
  return result;
}

}  // namespace maulab
