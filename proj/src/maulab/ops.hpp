#ifndef MAULAB_OPS_HPP
#define MAULAB_OPS_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "maulab/tensor.hpp"

namespace maulab::ops {

// Elementwise. Binary forms accept equal shapes or an rhs whose shape is a
// suffix of the lhs shape (row-broadcast, e.g. [T,D] + [D]).
Tensor add(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, double b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, double b);
Tensor neg(const Tensor& a);
Tensor exp(const Tensor& a);

Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor sigmoid(const Tensor& a);

// 2-D linear algebra.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Normalization along the last axis.
Tensor softmax(const Tensor& a);
Tensor log_softmax(const Tensor& a);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);

// 1-D convolutions over [T, C] inputs (time major).
// conv1d: w is [C_out, C_in, k]; output length (T + 2p - k)/stride + 1.
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
              int padding);
// conv1d_transpose: w is [C_out, C_in, k]; output length
// (T-1)*stride - 2p + k + output_padding.
Tensor conv1d_transpose(const Tensor& x, const Tensor& w, const Tensor& b,
                        int stride, int padding, int output_padding);
// depthwise_conv1d: w is [C, k], stride 1, zero padding.
Tensor depthwise_conv1d(const Tensor& x, const Tensor& w, const Tensor& b,
                        int padding);

Tensor embedding(const Tensor& table, std::span<const int32_t> ids);

Tensor concat(std::span<const Tensor> parts, int axis);
Tensor slice(const Tensor& x, int axis, int64_t start, int64_t stop);
Tensor reshape(const Tensor& x, Shape shape);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor mean_axis0(const Tensor& x);  // [R, C] -> [C]

// Forward is the one-hot of the row argmax; gradients pass through unchanged
// to the soft assignment (straight-through).
Tensor straight_through_onehot(const Tensor& soft);

// Σ p·ln(p) with the 0·ln(0) = 0 convention; scalar output.
Tensor plogp_sum(const Tensor& p);

// Losses, mean-reduced over positions.
Tensor cross_entropy(const Tensor& logits, std::span<const int32_t> targets);
Tensor bce_with_logits(const Tensor& logits, std::span<const double> targets);
Tensor mse(const Tensor& a, const Tensor& b);

int64_t conv1d_output_length(int64_t input_len, int kernel, int stride, int padding);

}  // namespace maulab::ops

#endif
