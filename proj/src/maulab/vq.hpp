#ifndef MAULAB_VQ_HPP
#define MAULAB_VQ_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "maulab/corpus.hpp"
#include "maulab/corruption.hpp"
#include "maulab/nn.hpp"
#include "maulab/optim.hpp"

namespace maulab {

struct VQConfig {
  int64_t codebook_size = 64;  // V
  int64_t code_dim = 16;       // d_q
  double temperature = 1.0;
  int downsample_stride = 2;
  double diversity_weight = 0.1;
  int64_t frame_dim = 16;
  int64_t width = 32;
  int64_t ff_dim = 64;
  int heads = 2;
  int encoder_blocks = 1;
  int decoder_blocks = 1;
  int resample_kernel = 3;    // down/up-sampling conv kernel
  int enc_dw_kernel = 3;      // depthwise kernel inside encoder blocks
  int dec_dw_kernel = 3;
  bool anneal_temperature = false;  // optional exponential anneal to min_temperature
  double anneal_rate = 1e-4;
  double min_temperature = 0.5;

  void validate() const;
  nlohmann::json to_json() const;
  static VQConfig from_json(const nlohmann::json& j);
};

struct GumbelSoftmaxResult {
  Tensor assignment;                 // soft, or straight-through one-hot when hard
  std::vector<int32_t> hard_indices; // row argmax
};

// assignment = softmax((logits + g)/τ); hard mode forwards the one-hot of
// the argmax while gradients flow through the soft assignment.
GumbelSoftmaxResult gumbel_softmax(const Tensor& logits, double tau, Rng& rng, bool hard);
GumbelSoftmaxResult gumbel_softmax_with_noise(const Tensor& logits, double tau,
                                              const Tensor& noise, bool hard);

// (V − exp(entropy(p̄))) / V over the batch-mean soft assignment p̄.
Tensor diversity_loss(const Tensor& soft_assignments);

double assignment_perplexity(const Tensor& soft_assignments);

class VQModel {
 public:
  VQModel(const VQConfig& cfg, Rng init_rng);

  struct ForwardResult {
    Tensor reconstruction;    // input shape
    Tensor unit_logits;       // [T, V]
    Tensor soft_assignment;   // [T, V] pre-straight-through softmax
    std::vector<int32_t> units;
  };

  // Training path samples Gumbel noise; pass nullptr for the deterministic
  // argmax path used at inference.
  ForwardResult forward(const Tensor& frames, Rng* gumbel_rng, double tau) const;

  std::vector<int32_t> encode(const std::vector<double>& frames, int64_t n_frames) const;
  std::vector<double> decode(const std::vector<int32_t>& units, int64_t target_len) const;

  int64_t unit_length_for(int64_t n_frames) const;

  const VQConfig& config() const { return cfg_; }
  std::vector<Tensor>& params() { return store_.params(); }
  const std::vector<Tensor>& params() const { return store_.params(); }

 private:
  struct Block {
    Tensor dw_w, dw_b;
    nn::LayerNormParams ln1, ln2, ln3;
    nn::AttentionParams attn;
    nn::FeedForwardParams ff;
    int dw_kernel;
  };

  Tensor run_block(const Block& block, const Tensor& x) const;
  Block make_block(const std::string& prefix, int dw_kernel, Rng& rng);

  VQConfig cfg_;
  nn::ParamStore store_;
  Tensor in_proj_w_, in_proj_b_;
  std::vector<Block> enc_blocks_;
  nn::ConvParams down_;
  nn::LinearParams to_logits_;
  Tensor codebook_;  // [V, d_q]
  nn::LinearParams from_code_;
  nn::ConvParams up_;
  std::vector<Block> dec_blocks_;
  nn::LinearParams out_proj_;
};

struct VQTrainStats {
  int64_t steps = 0;
  double initial_mse = 0.0;
  double final_mse = 0.0;
  double perplexity_at_10 = 0.0;
  double perplexity_at_500 = 0.0;
};

// Trains on every utterance of the given splits, writes a CSV log
// (step,mse,diversity,perplexity,loss,lr) and the checkpoint. Aborts with
// ErrorKind::Diverged on non-finite loss, keeping the last good checkpoint.
VQTrainStats train_vq(const Corpus& corpus, const std::vector<std::string>& split_names,
                      const VQConfig& cfg, const TrainConfig& train_cfg, uint64_t seed,
                      const std::string& checkpoint_path, const std::string& log_path,
                      const nlohmann::json& config_snapshot);

VQModel load_vq_model(const std::string& checkpoint_path);

// Deterministic encoding of whole splits; MASK never appears in the output.
std::vector<AUSequence> encode_split(const VQModel& model, const std::vector<Utterance>& utts,
                                     bool use_ref_frames = false);

}  // namespace maulab

#endif
