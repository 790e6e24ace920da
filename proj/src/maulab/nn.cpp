#include "maulab/nn.hpp"

#include <cmath>

namespace maulab::nn {

Tensor ParamStore::add(const std::string& name, Tensor t) {
  t.set_name(name);
  params_.push_back(t);
  return t;
}

Tensor ParamStore::xavier(const std::string& name, Shape shape, int64_t fan_in,
                          int64_t fan_out, Rng& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  int64_t n = shape_numel(shape);
  std::vector<double> data(static_cast<size_t>(n));
  for (double& v : data) v = rng.uniform(-limit, limit);
  return add(name, Tensor::from_data(std::move(shape), std::move(data), true));
}

Tensor ParamStore::zeros(const std::string& name, Shape shape) {
  return add(name, Tensor::zeros(std::move(shape), true));
}

Tensor ParamStore::ones(const std::string& name, Shape shape) {
  return add(name, Tensor::full(std::move(shape), 1.0, true));
}

Tensor ParamStore::normal(const std::string& name, Shape shape, double stddev, Rng& rng) {
  int64_t n = shape_numel(shape);
  std::vector<double> data(static_cast<size_t>(n));
  for (double& v : data) v = stddev * rng.normal();
  return add(name, Tensor::from_data(std::move(shape), std::move(data), true));
}

LinearParams make_linear(ParamStore& store, const std::string& prefix,
                         int64_t in, int64_t out, Rng& rng) {
  LinearParams p;
  p.w = store.xavier(prefix + ".w", {in, out}, in, out, rng);
  p.b = store.zeros(prefix + ".b", {out});
  return p;
}

Tensor linear(const Tensor& x, const LinearParams& p) {
  return ops::add(ops::matmul(x, p.w), p.b);
}

LayerNormParams make_layer_norm(ParamStore& store, const std::string& prefix, int64_t dim) {
  LayerNormParams p;
  p.gain = store.ones(prefix + ".gain", {dim});
  p.bias = store.zeros(prefix + ".bias", {dim});
  return p;
}

Tensor layer_norm(const Tensor& x, const LayerNormParams& p) {
  return ops::layer_norm(x, p.gain, p.bias);
}

ConvParams make_conv(ParamStore& store, const std::string& prefix, int64_t c_in,
                     int64_t c_out, int kernel, Rng& rng) {
  ConvParams p;
  p.w = store.xavier(prefix + ".w", {c_out, c_in, kernel}, c_in * kernel, c_out * kernel, rng);
  p.b = store.zeros(prefix + ".b", {c_out});
  return p;
}

AttentionParams make_attention(ParamStore& store, const std::string& prefix,
                               int64_t dim, Rng& rng) {
  AttentionParams p;
  p.q = make_linear(store, prefix + ".q", dim, dim, rng);
  p.k = make_linear(store, prefix + ".k", dim, dim, rng);
  p.v = make_linear(store, prefix + ".v", dim, dim, rng);
  p.o = make_linear(store, prefix + ".o", dim, dim, rng);
  return p;
}

AttentionResult attention(const Tensor& q_in, const Tensor& kv_in,
                          const AttentionParams& p, int heads,
                          const Tensor* mask_bias) {
  int64_t dim = q_in.dim(1);
  if (dim % heads != 0) {
    fail(ErrorKind::InvalidArgument, "attention dim " + std::to_string(dim) +
                                         " not divisible by " + std::to_string(heads) + " heads");
  }
  int64_t dh = dim / heads;
  Tensor q = linear(q_in, p.q);
  Tensor k = linear(kv_in, p.k);
  Tensor v = linear(kv_in, p.v);
  double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  AttentionResult result;
  std::vector<Tensor> head_outs;
  for (int h = 0; h < heads; ++h) {
    Tensor qh = ops::slice(q, 1, h * dh, (h + 1) * dh);
    Tensor kh = ops::slice(k, 1, h * dh, (h + 1) * dh);
    Tensor vh = ops::slice(v, 1, h * dh, (h + 1) * dh);
    Tensor scores = ops::mul(ops::matmul(qh, ops::transpose(kh)), scale);
    if (mask_bias) scores = ops::add(scores, *mask_bias);
    Tensor weights = ops::softmax(scores);
    result.weights.push_back(weights);
    head_outs.push_back(ops::matmul(weights, vh));
  }
  Tensor joined = heads == 1 ? head_outs[0] : ops::concat(head_outs, 1);
  result.out = linear(joined, p.o);
  return result;
}

FeedForwardParams make_feed_forward(ParamStore& store, const std::string& prefix,
                                    int64_t dim, int64_t hidden, Rng& rng) {
  FeedForwardParams p;
  p.in = make_linear(store, prefix + ".in", dim, hidden, rng);
  p.out = make_linear(store, prefix + ".out", hidden, dim, rng);
  return p;
}

Tensor feed_forward(const Tensor& x, const FeedForwardParams& p) {
  return linear(ops::gelu(linear(x, p.in)), p.out);
}

Tensor sinusoidal_position_encoding(int64_t len, int64_t dim) {
  std::vector<double> data(static_cast<size_t>(len * dim), 0.0);
  for (int64_t t = 0; t < len; ++t) {
    for (int64_t i = 0; i < dim; i += 2) {
      double rate = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(dim));
      data[t * dim + i] = std::sin(t * rate);
      if (i + 1 < dim) data[t * dim + i + 1] = std::cos(t * rate);
    }
  }
  return Tensor::from_data({len, dim}, std::move(data));
}

Tensor valid_row_mask(int64_t len, int64_t valid_len, int64_t dim) {
  std::vector<double> data(static_cast<size_t>(len * dim), 0.0);
  for (int64_t t = 0; t < std::min(len, valid_len); ++t)
    for (int64_t i = 0; i < dim; ++i) data[t * dim + i] = 1.0;
  return Tensor::from_data({len, dim}, std::move(data));
}

Tensor key_padding_bias(int64_t q_len, int64_t k_len, int64_t valid_k) {
  std::vector<double> data(static_cast<size_t>(q_len * k_len), 0.0);
  for (int64_t q = 0; q < q_len; ++q)
    for (int64_t k = valid_k; k < k_len; ++k) data[q * k_len + k] = -1e30;
  return Tensor::from_data({q_len, k_len}, std::move(data));
}

}  // namespace maulab::nn
