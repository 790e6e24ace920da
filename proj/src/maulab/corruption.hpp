#ifndef MAULAB_CORRUPTION_HPP
#define MAULAB_CORRUPTION_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "maulab/rng.hpp"

namespace maulab {

// Discrete acoustic-unit sequence. Unit ids live in [0, vocab); the reserved
// mask token is the vocab index itself.
struct AUSequence {
  std::string id;
  std::vector<int32_t> units;

  int64_t length() const { return static_cast<int64_t>(units.size()); }
};

inline int32_t mask_token(int64_t unit_vocab) { return static_cast<int32_t>(unit_vocab); }

enum class CorruptionMode {
  Distractor,  // spans filled from other utterances (detector training)
  MaskToken,   // spans replaced by the mask token (corrector fine-tuning)
};

struct SpanSamplerConfig {
  int64_t span_count_divisor = 10;  // n = max(1, T / divisor)
  int64_t k_max = 10;               // k = int(U(0, k_max))
  CorruptionMode mode = CorruptionMode::Distractor;
};

struct Span {
  int64_t start;   // j
  int64_t length;  // k, may be 0
};

struct CorruptionRecord {
  std::vector<int32_t> original;    // X
  std::vector<int32_t> distractor;  // D, meaningful only under the mask
  std::vector<uint8_t> mask;        // M
  std::vector<int32_t> corrupted;   // C = D⊙M + X⊙(1−M)
  std::vector<Span> spans;
};

// n = max(1, int(T/10)) spans; k = int(U(0, k_max)) clamped to T when the
// draw exceeds the sequence; j = int(U(0, T−k)). Spans may overlap.
std::vector<Span> sample_spans(Rng& rng, int64_t length, const SpanSamplerConfig& cfg);

int64_t span_count_for_length(int64_t length, const SpanSamplerConfig& cfg);

// Element-wise composition of the corruption equation over unit ids.
std::vector<int32_t> compose_corrupted(const std::vector<int32_t>& original,
                                       const std::vector<int32_t>& distractor,
                                       const std::vector<uint8_t>& mask);

// Distractor mode fills each span with a contiguous segment of equal length
// from a uniformly chosen other pool utterance at a uniform offset; mask
// mode sets the whole distractor sequence to the mask token.
CorruptionRecord corrupt(Rng& rng, const AUSequence& x,
                         const std::vector<AUSequence>& distractor_pool,
                         const SpanSamplerConfig& cfg, int64_t unit_vocab);

// Throws ErrorKind::Contract when the record violates the masking identity;
// called on every record sampled by the training loops.
void verify_record(const CorruptionRecord& record);

}  // namespace maulab

#endif
