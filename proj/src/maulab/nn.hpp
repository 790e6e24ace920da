#ifndef MAULAB_NN_HPP
#define MAULAB_NN_HPP

#include <string>
#include <vector>

#include "maulab/ops.hpp"
#include "maulab/rng.hpp"
#include "maulab/tensor.hpp"

namespace maulab::nn {

// Owns trainable tensors in creation order; the order defines the
// checkpoint layout.
class ParamStore {
 public:
  Tensor add(const std::string& name, Tensor t);
  Tensor xavier(const std::string& name, Shape shape, int64_t fan_in,
                int64_t fan_out, Rng& rng);
  Tensor zeros(const std::string& name, Shape shape);
  Tensor ones(const std::string& name, Shape shape);
  Tensor normal(const std::string& name, Shape shape, double stddev, Rng& rng);

  std::vector<Tensor>& params() { return params_; }
  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
};

struct LinearParams {
  Tensor w;  // [in, out]
  Tensor b;  // [out]
};

LinearParams make_linear(ParamStore& store, const std::string& prefix,
                         int64_t in, int64_t out, Rng& rng);
Tensor linear(const Tensor& x, const LinearParams& p);

struct LayerNormParams {
  Tensor gain;
  Tensor bias;
};

LayerNormParams make_layer_norm(ParamStore& store, const std::string& prefix, int64_t dim);
Tensor layer_norm(const Tensor& x, const LayerNormParams& p);

struct ConvParams {
  Tensor w;  // [C_out, C_in, k]
  Tensor b;  // [C_out]
};

ConvParams make_conv(ParamStore& store, const std::string& prefix, int64_t c_in,
                     int64_t c_out, int kernel, Rng& rng);

struct AttentionParams {
  LinearParams q, k, v, o;
};

AttentionParams make_attention(ParamStore& store, const std::string& prefix,
                               int64_t dim, Rng& rng);

struct AttentionResult {
  Tensor out;                   // [Tq, D]
  std::vector<Tensor> weights;  // per head, [Tq, Tk], rows sum to 1
};

// mask_bias, when given, is added to the pre-softmax scores ([Tq, Tk];
// masked keys carry a large negative value).
AttentionResult attention(const Tensor& q_in, const Tensor& kv_in,
                          const AttentionParams& p, int heads,
                          const Tensor* mask_bias = nullptr);

struct FeedForwardParams {
  LinearParams in, out;
};

FeedForwardParams make_feed_forward(ParamStore& store, const std::string& prefix,
                                    int64_t dim, int64_t hidden, Rng& rng);
Tensor feed_forward(const Tensor& x, const FeedForwardParams& p);

Tensor sinusoidal_position_encoding(int64_t len, int64_t dim);

// 0/1 column mask of shape [len, dim]: rows < valid_len are ones.
Tensor valid_row_mask(int64_t len, int64_t valid_len, int64_t dim);

// Additive attention bias [q_len, k_len] with -1e30 on keys >= valid_k.
Tensor key_padding_bias(int64_t q_len, int64_t k_len, int64_t valid_k);

}  // namespace maulab::nn

#endif
