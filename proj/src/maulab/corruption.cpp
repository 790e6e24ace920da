#include "maulab/corruption.hpp"

#include <algorithm>

#include "maulab/error.hpp"

namespace maulab {

int64_t span_count_for_length(int64_t length, const SpanSamplerConfig& cfg) {
  return std::max<int64_t>(1, length / cfg.span_count_divisor);
}

std::vector<Span> sample_spans(Rng& rng, int64_t length, const SpanSamplerConfig& cfg) {
  if (length < 1) fail(ErrorKind::Contract, "sample_spans requires T >= 1");
  if (cfg.k_max < 1) fail(ErrorKind::Config, "k_max must be >= 1");
  int64_t n = span_count_for_length(length, cfg);
  std::vector<Span> spans;
  spans.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    int64_t k = static_cast<int64_t>(rng.uniform(0.0, static_cast<double>(cfg.k_max)));
    // U(0, T−k) is undefined for k > T; keep the draw by covering the whole
    // sequence instead.
    if (k > length) k = length;
    int64_t j = 0;
    if (length - k > 0) j = static_cast<int64_t>(rng.uniform(0.0, static_cast<double>(length - k)));
    spans.push_back({j, k});
  }
  return spans;
}

std::vector<int32_t> compose_corrupted(const std::vector<int32_t>& original,
                                       const std::vector<int32_t>& distractor,
                                       const std::vector<uint8_t>& mask) {
  if (original.size() != distractor.size() || original.size() != mask.size())
    fail(ErrorKind::Contract, "corruption operands must share one length");
  std::vector<int32_t> corrupted(original.size());
  for (size_t t = 0; t < original.size(); ++t)
    corrupted[t] = distractor[t] * mask[t] + original[t] * (1 - mask[t]);
  return corrupted;
}

CorruptionRecord corrupt(Rng& rng, const AUSequence& x,
                         const std::vector<AUSequence>& distractor_pool,
                         const SpanSamplerConfig& cfg, int64_t unit_vocab) {
  int64_t t_len = x.length();
  if (t_len < 1) fail(ErrorKind::Contract, "cannot corrupt an empty sequence");

  CorruptionRecord record;
  record.original = x.units;
  record.mask.assign(static_cast<size_t>(t_len), 0);
  record.spans = sample_spans(rng, t_len, cfg);

  if (cfg.mode == CorruptionMode::MaskToken) {
    record.distractor.assign(static_cast<size_t>(t_len), mask_token(unit_vocab));
  } else {
    record.distractor.assign(static_cast<size_t>(t_len), 0);
  }

  for (const Span& span : record.spans) {
    if (span.length == 0) continue;
    for (int64_t t = span.start; t < span.start + span.length; ++t)
      record.mask[t] = 1;
    if (cfg.mode != CorruptionMode::Distractor) continue;

    if (distractor_pool.empty())
      fail(ErrorKind::Contract, "distractor mode requires a non-empty pool");
    bool filled = false;
    for (int attempt = 0; attempt < 64 && !filled; ++attempt) {
      const AUSequence& source =
          distractor_pool[rng.uniform_int(distractor_pool.size())];
      if (source.id == x.id && distractor_pool.size() > 1) continue;
      if (source.length() < span.length) continue;
      int64_t offset =
          static_cast<int64_t>(rng.uniform_int(static_cast<uint64_t>(source.length() - span.length + 1)));
      for (int64_t t = 0; t < span.length; ++t)
        record.distractor[span.start + t] = source.units[offset + t];
      filled = true;
    }
    if (!filled)
      fail(ErrorKind::Contract, "no pool utterance long enough for a distractor span of length " +
                                    std::to_string(span.length));
  }

  record.corrupted = compose_corrupted(record.original, record.distractor, record.mask);
  return record;
}

void verify_record(const CorruptionRecord& record) {
  size_t t_len = record.original.size();
  if (record.mask.size() != t_len || record.corrupted.size() != t_len ||
      record.distractor.size() != t_len)
    fail(ErrorKind::Contract, "corruption record length mismatch");
  std::vector<uint8_t> from_spans(t_len, 0);
  for (const Span& span : record.spans) {
    if (span.start < 0 || span.start + span.length > static_cast<int64_t>(t_len))
      fail(ErrorKind::Contract, "corruption span exceeds sequence bounds");
    for (int64_t t = span.start; t < span.start + span.length; ++t) from_spans[t] = 1;
  }
  for (size_t t = 0; t < t_len; ++t) {
    if (record.mask[t] != from_spans[t])
      fail(ErrorKind::Contract, "mask does not equal the span union");
    int32_t expect = record.mask[t] ? record.distractor[t] : record.original[t];
    if (record.corrupted[t] != expect)
      fail(ErrorKind::Contract, "corrupted sequence violates the masking identity");
  }
}

}  // namespace maulab
