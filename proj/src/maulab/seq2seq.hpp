#ifndef MAULAB_SEQ2SEQ_HPP
#define MAULAB_SEQ2SEQ_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "maulab/corruption.hpp"
#include "maulab/nn.hpp"
#include "maulab/optim.hpp"

namespace maulab {

struct ModelConfig {
  int64_t d_a = 64;
  int64_t d_ff = 128;
  int heads = 2;
  int encoder_layers = 2;
  int decoder_layers = 2;
  int enc_front_kernel = 3;
  int dec_front_kernel = 5;
  int front_convs = 2;
  int64_t au_vocab = 65;  // V + 1, the mask token included
  int64_t phoneme_vocab = 32;

  int64_t unit_vocab() const { return au_vocab - 1; }
  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

struct DetectorOutput {
  Tensor unit_logits;  // [T, au_vocab]
  Tensor mask_logits;  // [T]
  std::vector<Tensor> cross_attention;  // last decoder layer, per head [T, L]

  std::vector<double> mask_probs() const;
  std::vector<int32_t> unit_argmax(bool exclude_mask_token) const;
};

// Phoneme encoder + non-causal AU decoder with unit and mask heads. The
// decoder sees the full corrupted sequence at once; there is no
// autoregressive shift.
class Seq2SeqModel {
 public:
  Seq2SeqModel(const ModelConfig& cfg, Rng init_rng);

  // padded_phoneme_len, when > 0, right-pads the phoneme sequence to that
  // width; padded positions are masked out of every attention and must not
  // change the outputs.
  DetectorOutput forward(const std::vector<int32_t>& corrupted_units,
                         const std::vector<int32_t>& phonemes,
                         int64_t padded_phoneme_len = 0) const;

  const ModelConfig& config() const { return cfg_; }
  std::vector<Tensor>& params() { return store_.params(); }
  const std::vector<Tensor>& params() const { return store_.params(); }

 private:
  struct EncoderLayer {
    nn::LayerNormParams ln1, ln2;
    nn::AttentionParams attn;
    nn::FeedForwardParams ff;
  };
  struct DecoderLayer {
    nn::LayerNormParams ln1, ln2, ln3;
    nn::AttentionParams self_attn;
    nn::AttentionParams cross_attn;
    nn::FeedForwardParams ff;
  };

  Tensor encode(const std::vector<int32_t>& phonemes, int64_t padded_len,
                int64_t valid_len) const;

  ModelConfig cfg_;
  nn::ParamStore store_;
  Tensor phoneme_embed_, au_embed_;
  std::vector<nn::ConvParams> enc_front_, dec_front_;
  std::vector<EncoderLayer> enc_layers_;
  std::vector<DecoderLayer> dec_layers_;
  nn::LayerNormParams enc_final_ln_, dec_final_ln_;
  nn::LinearParams head_units_, head_mask_;
};

struct LossBreakdown {
  Tensor total;
  Tensor ce;
  Tensor bce;  // undefined when include_bce is false
};

LossBreakdown detection_loss(const DetectorOutput& output,
                             const std::vector<int32_t>& target_units,
                             const std::vector<uint8_t>& mask, bool include_bce);

// AU sequence joined with its phoneme sequence for training and inference.
struct LabeledSequence {
  AUSequence au;
  std::vector<int32_t> phonemes;
};

struct DetectorTrainStats {
  int64_t steps = 0;
  double loss_at_10 = 0.0;
  double loss_at_2000 = 0.0;
  double final_loss = 0.0;
};

DetectorTrainStats train_detector(const std::vector<LabeledSequence>& train_set,
                                  const ModelConfig& cfg, const TrainConfig& train_cfg,
                                  const SpanSamplerConfig& span_cfg, uint64_t seed,
                                  const std::string& checkpoint_path,
                                  const std::string& log_path,
                                  const nlohmann::json& config_snapshot);

// Mask-token corruption, CE only, initialized from the detector weights.
DetectorTrainStats finetune_corrector(const std::string& detector_checkpoint,
                                      const std::vector<LabeledSequence>& train_set,
                                      const TrainConfig& train_cfg,
                                      const SpanSamplerConfig& span_cfg, uint64_t seed,
                                      const std::string& checkpoint_path,
                                      const std::string& log_path,
                                      const nlohmann::json& config_snapshot);

Seq2SeqModel load_seq2seq_model(const std::string& checkpoint_path,
                                const std::string& expected_kind);

// (M̂ score, mask label) pairs over freshly corrupted held-out sequences.
std::vector<std::pair<double, int>> collect_mask_scores(
    const Seq2SeqModel& model, const std::vector<LabeledSequence>& holdout,
    const std::vector<AUSequence>& distractor_pool, const SpanSamplerConfig& span_cfg,
    uint64_t seed);

}  // namespace maulab

#endif
