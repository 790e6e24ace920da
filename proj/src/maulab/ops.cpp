#include "maulab/ops.hpp"

#include <algorithm>
#include <cmath>

namespace maulab::ops {

namespace {

using detail::Node;

[[noreturn]] void shape_error(const char* op, const std::string& detail) {
  fail(ErrorKind::InvalidArgument, std::string(op) + ": " + detail);
}

void require(bool ok, const char* op, const std::string& detail) {
  if (!ok) shape_error(op, detail);
}

// rhs must equal lhs shape or a suffix of it; returns the number of
// lhs blocks the rhs is repeated over.
int64_t broadcast_repeat(const char* op, const Shape& a, const Shape& b) {
  if (b.size() > a.size()) {
    shape_error(op, "shapes " + shape_str(a) + " and " + shape_str(b) + " do not broadcast");
  }
  size_t offset = a.size() - b.size();
  for (size_t i = 0; i < b.size(); ++i) {
    if (a[offset + i] != b[i]) {
      shape_error(op, "shapes " + shape_str(a) + " and " + shape_str(b) + " do not broadcast");
    }
  }
  int64_t repeat = 1;
  for (size_t i = 0; i < offset; ++i) repeat *= a[i];
  return repeat;
}

double stable_log1pexp(double z) {
  // log(1 + e^z) without overflow.
  if (z > 35.0) return z;
  if (z < -35.0) return std::exp(z);
  return std::log1p(std::exp(z));
}

struct AxisBlocks {
  int64_t outer;
  int64_t axis;
  int64_t inner;
};

AxisBlocks axis_blocks(const Shape& shape, int axis) {
  AxisBlocks b{1, shape[axis], 1};
  for (int i = 0; i < axis; ++i) b.outer *= shape[i];
  for (size_t i = axis + 1; i < shape.size(); ++i) b.inner *= shape[i];
  return b;
}

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

}  // namespace

int64_t conv1d_output_length(int64_t input_len, int kernel, int stride, int padding) {
  return (input_len + 2 * padding - kernel) / stride + 1;
}

Tensor add(const Tensor& a, const Tensor& b) {
  int64_t repeat = broadcast_repeat("add", a.shape(), b.shape());
  int64_t bn = b.numel();
  std::vector<double> out(a.data().begin(), a.data().end());
  const auto bd = b.data();
  for (int64_t r = 0; r < repeat; ++r)
    for (int64_t i = 0; i < bn; ++i) out[r * bn + i] += bd[i];
  auto an = a.node(), bnode = b.node();
  return detail::make_result(
      a.shape(), std::move(out), {an, bnode}, [an, bnode, repeat, bn](Node& self) {
        if (an->requires_grad) {
          an->ensure_grad();
          for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
        }
        if (bnode->requires_grad) {
          bnode->ensure_grad();
          for (int64_t r = 0; r < repeat; ++r)
            for (int64_t i = 0; i < bn; ++i) bnode->grad[i] += self.grad[r * bn + i];
        }
      });
}

Tensor add(const Tensor& a, double b) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (double& v : out) v += b;
  auto an = a.node();
  return detail::make_result(a.shape(), std::move(out), {an}, [an](Node& self) {
    an->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
  });
}

Tensor neg(const Tensor& a) { return mul(a, -1.0); }

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, neg(b)); }

Tensor mul(const Tensor& a, const Tensor& b) {
  int64_t repeat = broadcast_repeat("mul", a.shape(), b.shape());
  int64_t bn = b.numel();
  std::vector<double> out(a.data().begin(), a.data().end());
  const auto bd = b.data();
  for (int64_t r = 0; r < repeat; ++r)
    for (int64_t i = 0; i < bn; ++i) out[r * bn + i] *= bd[i];
  auto an = a.node(), bnode = b.node();
  return detail::make_result(
      a.shape(), std::move(out), {an, bnode}, [an, bnode, repeat, bn](Node& self) {
        if (an->requires_grad) {
          an->ensure_grad();
          for (int64_t r = 0; r < repeat; ++r)
            for (int64_t i = 0; i < bn; ++i)
              an->grad[r * bn + i] += self.grad[r * bn + i] * bnode->value[i];
        }
        if (bnode->requires_grad) {
          bnode->ensure_grad();
          for (int64_t r = 0; r < repeat; ++r)
            for (int64_t i = 0; i < bn; ++i)
              bnode->grad[i] += self.grad[r * bn + i] * an->value[r * bn + i];
        }
      });
}

Tensor mul(const Tensor& a, double b) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (double& v : out) v *= b;
  auto an = a.node();
  return detail::make_result(a.shape(), std::move(out), {an}, [an, b](Node& self) {
    an->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += b * self.grad[i];
  });
}

Tensor exp(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (int64_t i = 0; i < a.numel(); ++i) out[i] = std::exp(a.data()[i]);
  auto an = a.node();
  return detail::make_result(a.shape(), std::move(out), {an}, [an](Node& self) {
    an->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i)
      an->grad[i] += self.grad[i] * self.value[i];
  });
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (int64_t i = 0; i < a.numel(); ++i) out[i] = std::max(0.0, a.data()[i]);
  auto an = a.node();
  return detail::make_result(a.shape(), std::move(out), {an}, [an](Node& self) {
    an->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i)
      if (an->value[i] > 0.0) an->grad[i] += self.grad[i];
  });
}

Tensor gelu(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (int64_t i = 0; i < a.numel(); ++i) {
    double x = a.data()[i];
    out[i] = x * 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  }
  auto an = a.node();
  return detail::make_result(a.shape(), std::move(out), {an}, [an](Node& self) {
    an->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) {
      double x = an->value[i];
      double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
      double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
      an->grad[i] += self.grad[i] * (cdf + x * pdf);
    }
  });
}

Tensor sigmoid(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (int64_t i = 0; i < a.numel(); ++i) {
    double x = a.data()[i];
    out[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  auto an = a.node();
  return detail::make_result(a.shape(), std::move(out), {an}, [an](Node& self) {
    an->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) {
      double s = self.value[i];
      an->grad[i] += self.grad[i] * s * (1.0 - s);
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2, "matmul",
          "expects 2-D operands, got " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  require(a.dim(1) == b.dim(0), "matmul",
          "inner dimensions disagree: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(static_cast<size_t>(m * n), 0.0);
  const auto ad = a.data(), bd = b.data();
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t kk = 0; kk < k; ++kk) {
      double av = ad[i * k + kk];
      if (av == 0.0) continue;
      const double* brow = &bd[kk * n];
      double* orow = &out[i * n];
      for (int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  auto an = a.node(), bn = b.node();
  return detail::make_result(
      {m, n}, std::move(out), {an, bn}, [an, bn, m, k, n](Node& self) {
        if (an->requires_grad) {
          an->ensure_grad();  // dA = dC · Bᵀ
          for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < n; ++j) {
              double g = self.grad[i * n + j];
              if (g == 0.0) continue;
              for (int64_t kk = 0; kk < k; ++kk)
                an->grad[i * k + kk] += g * bn->value[kk * n + j];
            }
        }
        if (bn->requires_grad) {
          bn->ensure_grad();  // dB = Aᵀ · dC
          for (int64_t i = 0; i < m; ++i)
            for (int64_t kk = 0; kk < k; ++kk) {
              double av = an->value[i * k + kk];
              if (av == 0.0) continue;
              for (int64_t j = 0; j < n; ++j)
                bn->grad[kk * n + j] += av * self.grad[i * n + j];
            }
        }
      });
}

Tensor transpose(const Tensor& a) {
  require(a.rank() == 2, "transpose", "expects a 2-D operand, got " + shape_str(a.shape()));
  int64_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(static_cast<size_t>(m * n));
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) out[j * m + i] = a.data()[i * n + j];
  auto an = a.node();
  return detail::make_result({n, m}, std::move(out), {an}, [an, m, n](Node& self) {
    an->ensure_grad();
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j) an->grad[i * n + j] += self.grad[j * m + i];
  });
}

Tensor softmax(const Tensor& a) {
  require(a.rank() >= 1, "softmax", "expects rank >= 1");
  int64_t d = a.shape().back();
  int64_t rows = a.numel() / d;
  std::vector<double> out(a.numel());
  for (int64_t r = 0; r < rows; ++r) {
    const double* x = &a.data()[r * d];
    double mx = *std::max_element(x, x + d);
    double z = 0.0;
    for (int64_t i = 0; i < d; ++i) {
      out[r * d + i] = std::exp(x[i] - mx);
      z += out[r * d + i];
    }
    for (int64_t i = 0; i < d; ++i) out[r * d + i] /= z;
  }
  auto an = a.node();
  return detail::make_result(a.shape(), std::move(out), {an}, [an, rows, d](Node& self) {
    an->ensure_grad();
    for (int64_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (int64_t i = 0; i < d; ++i) dot += self.grad[r * d + i] * self.value[r * d + i];
      for (int64_t i = 0; i < d; ++i)
        an->grad[r * d + i] += self.value[r * d + i] * (self.grad[r * d + i] - dot);
    }
  });
}

Tensor log_softmax(const Tensor& a) {
  require(a.rank() >= 1, "log_softmax", "expects rank >= 1");
  int64_t d = a.shape().back();
  int64_t rows = a.numel() / d;
  std::vector<double> out(a.numel());
  for (int64_t r = 0; r < rows; ++r) {
    const double* x = &a.data()[r * d];
    double mx = *std::max_element(x, x + d);
    double z = 0.0;
    for (int64_t i = 0; i < d; ++i) z += std::exp(x[i] - mx);
    double lse = mx + std::log(z);
    for (int64_t i = 0; i < d; ++i) out[r * d + i] = x[i] - lse;
  }
  auto an = a.node();
  return detail::make_result(a.shape(), std::move(out), {an}, [an, rows, d](Node& self) {
    an->ensure_grad();
    for (int64_t r = 0; r < rows; ++r) {
      double gsum = 0.0;
      for (int64_t i = 0; i < d; ++i) gsum += self.grad[r * d + i];
      for (int64_t i = 0; i < d; ++i)
        an->grad[r * d + i] += self.grad[r * d + i] - std::exp(self.value[r * d + i]) * gsum;
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require(x.rank() >= 1, "layer_norm", "expects rank >= 1");
  int64_t d = x.shape().back();
  require(gain.rank() == 1 && gain.dim(0) == d, "layer_norm",
          "gain shape " + shape_str(gain.shape()) + " does not match feature dim " + std::to_string(d));
  require(bias.rank() == 1 && bias.dim(0) == d, "layer_norm",
          "bias shape " + shape_str(bias.shape()) + " does not match feature dim " + std::to_string(d));
  int64_t rows = x.numel() / d;
  std::vector<double> out(x.numel());
  std::vector<double> inv_std(rows), mean_v(rows);
  for (int64_t r = 0; r < rows; ++r) {
    const double* row = &x.data()[r * d];
    double mu = 0.0;
    for (int64_t i = 0; i < d; ++i) mu += row[i];
    mu /= d;
    double var = 0.0;
    for (int64_t i = 0; i < d; ++i) var += (row[i] - mu) * (row[i] - mu);
    var /= d;
    double is = 1.0 / std::sqrt(var + eps);
    mean_v[r] = mu;
    inv_std[r] = is;
    for (int64_t i = 0; i < d; ++i)
      out[r * d + i] = gain.data()[i] * (row[i] - mu) * is + bias.data()[i];
  }
  auto xn = x.node(), gn = gain.node(), bn = bias.node();
  return detail::make_result(
      x.shape(), std::move(out), {xn, gn, bn},
      [xn, gn, bn, rows, d, inv_std, mean_v](Node& self) {
        for (int64_t r = 0; r < rows; ++r) {
          const double* row = &xn->value[r * d];
          const double* g = &self.grad[r * d];
          double is = inv_std[r], mu = mean_v[r];
          if (gn->requires_grad) {
            gn->ensure_grad();
            for (int64_t i = 0; i < d; ++i)
              gn->grad[i] += g[i] * (row[i] - mu) * is;
          }
          if (bn->requires_grad) {
            bn->ensure_grad();
            for (int64_t i = 0; i < d; ++i) bn->grad[i] += g[i];
          }
          if (xn->requires_grad) {
            xn->ensure_grad();
            double m1 = 0.0, m2 = 0.0;
            for (int64_t i = 0; i < d; ++i) {
              double dxh = g[i] * gn->value[i];
              double xh = (row[i] - mu) * is;
              m1 += dxh;
              m2 += dxh * xh;
            }
            m1 /= d;
            m2 /= d;
            for (int64_t i = 0; i < d; ++i) {
              double dxh = g[i] * gn->value[i];
              double xh = (row[i] - mu) * is;
              xn->grad[r * d + i] += (dxh - m1 - xh * m2) * is;
            }
          }
        }
      });
}

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int padding) {
  require(x.rank() == 2, "conv1d", "input must be [T, C_in], got " + shape_str(x.shape()));
  require(w.rank() == 3, "conv1d", "weight must be [C_out, C_in, k], got " + shape_str(w.shape()));
  int64_t t_in = x.dim(0), c_in = x.dim(1);
  int64_t c_out = w.dim(0), k = w.dim(2);
  require(w.dim(1) == c_in, "conv1d",
          "weight " + shape_str(w.shape()) + " does not match input channels of " + shape_str(x.shape()));
  require(b.rank() == 1 && b.dim(0) == c_out, "conv1d", "bias must be [C_out]");
  require(stride >= 1, "conv1d", "stride must be >= 1");
  int64_t t_out = conv1d_output_length(t_in, static_cast<int>(k), stride, padding);
  require(t_out >= 1, "conv1d", "input length " + std::to_string(t_in) + " too short for kernel");
  std::vector<double> out(static_cast<size_t>(t_out * c_out));
  for (int64_t t = 0; t < t_out; ++t) {
    for (int64_t co = 0; co < c_out; ++co) {
      double acc = b.data()[co];
      for (int64_t kk = 0; kk < k; ++kk) {
        int64_t ti = t * stride + kk - padding;
        if (ti < 0 || ti >= t_in) continue;
        const double* xr = &x.data()[ti * c_in];
        const double* wr = &w.data()[(co * c_in) * k + kk];
        for (int64_t ci = 0; ci < c_in; ++ci) acc += xr[ci] * wr[ci * k];
      }
      out[t * c_out + co] = acc;
    }
  }
  auto xn = x.node(), wn = w.node(), bn = b.node();
  return detail::make_result(
      {t_out, c_out}, std::move(out), {xn, wn, bn},
      [xn, wn, bn, t_in, c_in, c_out, k, t_out, stride, padding](Node& self) {
        if (bn->requires_grad) bn->ensure_grad();
        if (wn->requires_grad) wn->ensure_grad();
        if (xn->requires_grad) xn->ensure_grad();
        for (int64_t t = 0; t < t_out; ++t) {
          for (int64_t co = 0; co < c_out; ++co) {
            double g = self.grad[t * c_out + co];
            if (g == 0.0) continue;
            if (bn->requires_grad) bn->grad[co] += g;
            for (int64_t kk = 0; kk < k; ++kk) {
              int64_t ti = t * stride + kk - padding;
              if (ti < 0 || ti >= t_in) continue;
              for (int64_t ci = 0; ci < c_in; ++ci) {
                if (wn->requires_grad)
                  wn->grad[(co * c_in + ci) * k + kk] += g * xn->value[ti * c_in + ci];
                if (xn->requires_grad)
                  xn->grad[ti * c_in + ci] += g * wn->value[(co * c_in + ci) * k + kk];
              }
            }
          }
        }
      });
}

Tensor conv1d_transpose(const Tensor& x, const Tensor& w, const Tensor& b,
                        int stride, int padding, int output_padding) {
  require(x.rank() == 2, "conv1d_transpose", "input must be [T, C_in], got " + shape_str(x.shape()));
  require(w.rank() == 3, "conv1d_transpose", "weight must be [C_out, C_in, k], got " + shape_str(w.shape()));
  int64_t t_in = x.dim(0), c_in = x.dim(1);
  int64_t c_out = w.dim(0), k = w.dim(2);
  require(w.dim(1) == c_in, "conv1d_transpose",
          "weight " + shape_str(w.shape()) + " does not match input channels of " + shape_str(x.shape()));
  require(b.rank() == 1 && b.dim(0) == c_out, "conv1d_transpose", "bias must be [C_out]");
  int64_t t_out = (t_in - 1) * stride - 2 * padding + k + output_padding;
  require(t_out >= 1, "conv1d_transpose", "degenerate output length");
  std::vector<double> out(static_cast<size_t>(t_out * c_out), 0.0);
  for (int64_t t = 0; t < t_in; ++t) {
    for (int64_t kk = 0; kk < k; ++kk) {
      int64_t to = t * stride + kk - padding;
      if (to < 0 || to >= t_out) continue;
      for (int64_t co = 0; co < c_out; ++co) {
        double acc = 0.0;
        const double* xr = &x.data()[t * c_in];
        for (int64_t ci = 0; ci < c_in; ++ci) acc += xr[ci] * w.data()[(co * c_in + ci) * k + kk];
        out[to * c_out + co] += acc;
      }
    }
  }
  for (int64_t to = 0; to < t_out; ++to)
    for (int64_t co = 0; co < c_out; ++co) out[to * c_out + co] += b.data()[co];
  auto xn = x.node(), wn = w.node(), bn = b.node();
  return detail::make_result(
      {t_out, c_out}, std::move(out), {xn, wn, bn},
      [xn, wn, bn, t_in, c_in, c_out, k, t_out, stride, padding](Node& self) {
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (int64_t to = 0; to < t_out; ++to)
            for (int64_t co = 0; co < c_out; ++co) bn->grad[co] += self.grad[to * c_out + co];
        }
        if (wn->requires_grad) wn->ensure_grad();
        if (xn->requires_grad) xn->ensure_grad();
        for (int64_t t = 0; t < t_in; ++t) {
          for (int64_t kk = 0; kk < k; ++kk) {
            int64_t to = t * stride + kk - padding;
            if (to < 0 || to >= t_out) continue;
            for (int64_t co = 0; co < c_out; ++co) {
              double g = self.grad[to * c_out + co];
              if (g == 0.0) continue;
              for (int64_t ci = 0; ci < c_in; ++ci) {
                if (wn->requires_grad)
                  wn->grad[(co * c_in + ci) * k + kk] += g * xn->value[t * c_in + ci];
                if (xn->requires_grad)
                  xn->grad[t * c_in + ci] += g * wn->value[(co * c_in + ci) * k + kk];
              }
            }
          }
        }
      });
}

Tensor depthwise_conv1d(const Tensor& x, const Tensor& w, const Tensor& b, int padding) {
  require(x.rank() == 2, "depthwise_conv1d", "input must be [T, C], got " + shape_str(x.shape()));
  require(w.rank() == 2, "depthwise_conv1d", "weight must be [C, k], got " + shape_str(w.shape()));
  int64_t t_in = x.dim(0), c = x.dim(1), k = w.dim(1);
  require(w.dim(0) == c, "depthwise_conv1d",
          "weight " + shape_str(w.shape()) + " does not match channels of " + shape_str(x.shape()));
  require(b.rank() == 1 && b.dim(0) == c, "depthwise_conv1d", "bias must be [C]");
  int64_t t_out = conv1d_output_length(t_in, static_cast<int>(k), 1, padding);
  require(t_out >= 1, "depthwise_conv1d", "input too short for kernel");
  std::vector<double> out(static_cast<size_t>(t_out * c));
  for (int64_t t = 0; t < t_out; ++t) {
    for (int64_t ci = 0; ci < c; ++ci) {
      double acc = b.data()[ci];
      for (int64_t kk = 0; kk < k; ++kk) {
        int64_t ti = t + kk - padding;
        if (ti < 0 || ti >= t_in) continue;
        acc += x.data()[ti * c + ci] * w.data()[ci * k + kk];
      }
      out[t * c + ci] = acc;
    }
  }
  auto xn = x.node(), wn = w.node(), bn = b.node();
  return detail::make_result(
      {t_out, c}, std::move(out), {xn, wn, bn},
      [xn, wn, bn, t_in, c, k, t_out, padding](Node& self) {
        if (bn->requires_grad) bn->ensure_grad();
        if (wn->requires_grad) wn->ensure_grad();
        if (xn->requires_grad) xn->ensure_grad();
        for (int64_t t = 0; t < t_out; ++t) {
          for (int64_t ci = 0; ci < c; ++ci) {
            double g = self.grad[t * c + ci];
            if (g == 0.0) continue;
            if (bn->requires_grad) bn->grad[ci] += g;
            for (int64_t kk = 0; kk < k; ++kk) {
              int64_t ti = t + kk - padding;
              if (ti < 0 || ti >= t_in) continue;
              if (wn->requires_grad) wn->grad[ci * k + kk] += g * xn->value[ti * c + ci];
              if (xn->requires_grad) xn->grad[ti * c + ci] += g * wn->value[ci * k + kk];
            }
          }
        }
      });
}

Tensor embedding(const Tensor& table, std::span<const int32_t> ids) {
  require(table.rank() == 2, "embedding", "table must be [N, D], got " + shape_str(table.shape()));
  int64_t n = table.dim(0), d = table.dim(1);
  std::vector<int32_t> idx(ids.begin(), ids.end());
  for (int32_t id : idx) {
    require(id >= 0 && id < n, "embedding",
            "id " + std::to_string(id) + " out of range for table " + shape_str(table.shape()));
  }
  int64_t t = static_cast<int64_t>(idx.size());
  std::vector<double> out(static_cast<size_t>(t * d));
  for (int64_t i = 0; i < t; ++i)
    std::copy_n(&table.data()[idx[i] * d], d, &out[i * d]);
  auto tn = table.node();
  return detail::make_result({t, d}, std::move(out), {tn}, [tn, idx, d](Node& self) {
    tn->ensure_grad();
    for (size_t i = 0; i < idx.size(); ++i)
      for (int64_t j = 0; j < d; ++j)
        tn->grad[idx[i] * d + j] += self.grad[i * d + j];
  });
}

Tensor concat(std::span<const Tensor> parts, int axis) {
  require(!parts.empty(), "concat", "needs at least one operand");
  const Shape& first = parts[0].shape();
  require(axis >= 0 && axis < static_cast<int>(first.size()), "concat", "axis out of range");
  Shape out_shape = first;
  int64_t total_axis = 0;
  for (const Tensor& p : parts) {
    require(p.rank() == static_cast<int>(first.size()), "concat",
            "rank mismatch between " + shape_str(first) + " and " + shape_str(p.shape()));
    for (size_t i = 0; i < first.size(); ++i) {
      if (static_cast<int>(i) == axis) continue;
      require(p.shape()[i] == first[i], "concat",
              "shapes " + shape_str(first) + " and " + shape_str(p.shape()) +
                  " disagree off the concat axis");
    }
    total_axis += p.shape()[axis];
  }
  out_shape[axis] = total_axis;

  AxisBlocks blocks = axis_blocks(out_shape, axis);
  std::vector<double> out(static_cast<size_t>(shape_numel(out_shape)));
  std::vector<std::shared_ptr<Node>> parents;
  std::vector<int64_t> sizes;
  for (const Tensor& p : parts) {
    parents.push_back(p.node());
    sizes.push_back(p.shape()[axis]);
  }
  int64_t offset = 0;
  for (size_t pi = 0; pi < parts.size(); ++pi) {
    int64_t sz = sizes[pi];
    const auto pd = parts[pi].data();
    for (int64_t o = 0; o < blocks.outer; ++o)
      for (int64_t a = 0; a < sz; ++a)
        std::copy_n(&pd[(o * sz + a) * blocks.inner], blocks.inner,
                    &out[(o * blocks.axis + offset + a) * blocks.inner]);
    offset += sz;
  }
  return detail::make_result(
      out_shape, std::move(out), parents, [parents, sizes, blocks](Node& self) {
        int64_t off = 0;
        for (size_t pi = 0; pi < parents.size(); ++pi) {
          int64_t sz = sizes[pi];
          auto& pn = parents[pi];
          if (pn->requires_grad) {
            pn->ensure_grad();
            for (int64_t o = 0; o < blocks.outer; ++o)
              for (int64_t a = 0; a < sz; ++a)
                for (int64_t i = 0; i < blocks.inner; ++i)
                  pn->grad[(o * sz + a) * blocks.inner + i] +=
                      self.grad[(o * blocks.axis + off + a) * blocks.inner + i];
          }
          off += sz;
        }
      });
}

Tensor slice(const Tensor& x, int axis, int64_t start, int64_t stop) {
  require(axis >= 0 && axis < x.rank(), "slice", "axis out of range for " + shape_str(x.shape()));
  require(0 <= start && start <= stop && stop <= x.shape()[axis], "slice",
          "range [" + std::to_string(start) + "," + std::to_string(stop) +
              ") invalid for " + shape_str(x.shape()));
  Shape out_shape = x.shape();
  out_shape[axis] = stop - start;
  AxisBlocks blocks = axis_blocks(x.shape(), axis);
  int64_t span = stop - start;
  std::vector<double> out(static_cast<size_t>(shape_numel(out_shape)));
  for (int64_t o = 0; o < blocks.outer; ++o)
    for (int64_t a = 0; a < span; ++a)
      std::copy_n(&x.data()[(o * blocks.axis + start + a) * blocks.inner], blocks.inner,
                  &out[(o * span + a) * blocks.inner]);
  auto xn = x.node();
  return detail::make_result(
      out_shape, std::move(out), {xn}, [xn, blocks, start, span](Node& self) {
        xn->ensure_grad();
        for (int64_t o = 0; o < blocks.outer; ++o)
          for (int64_t a = 0; a < span; ++a)
            for (int64_t i = 0; i < blocks.inner; ++i)
              xn->grad[(o * blocks.axis + start + a) * blocks.inner + i] +=
                  self.grad[(o * span + a) * blocks.inner + i];
      });
}

Tensor reshape(const Tensor& x, Shape shape) {
  require(shape_numel(shape) == x.numel(), "reshape",
          "cannot reshape " + shape_str(x.shape()) + " to " + shape_str(shape));
  std::vector<double> out(x.data().begin(), x.data().end());
  auto xn = x.node();
  return detail::make_result(std::move(shape), std::move(out), {xn}, [xn](Node& self) {
    xn->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  auto xn = x.node();
  return detail::make_result({}, {s}, {xn}, [xn](Node& self) {
    xn->ensure_grad();
    for (double& g : xn->grad) g += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  require(x.numel() > 0, "mean", "empty tensor");
  double s = 0.0;
  for (double v : x.data()) s += v;
  double inv = 1.0 / static_cast<double>(x.numel());
  auto xn = x.node();
  return detail::make_result({}, {s * inv}, {xn}, [xn, inv](Node& self) {
    xn->ensure_grad();
    for (double& g : xn->grad) g += self.grad[0] * inv;
  });
}

Tensor mean_axis0(const Tensor& x) {
  require(x.rank() == 2, "mean_axis0", "expects [R, C], got " + shape_str(x.shape()));
  int64_t r = x.dim(0), c = x.dim(1);
  require(r > 0, "mean_axis0", "empty tensor");
  std::vector<double> out(static_cast<size_t>(c), 0.0);
  for (int64_t i = 0; i < r; ++i)
    for (int64_t j = 0; j < c; ++j) out[j] += x.data()[i * c + j];
  double inv = 1.0 / static_cast<double>(r);
  for (double& v : out) v *= inv;
  auto xn = x.node();
  return detail::make_result({c}, std::move(out), {xn}, [xn, r, c, inv](Node& self) {
    xn->ensure_grad();
    for (int64_t i = 0; i < r; ++i)
      for (int64_t j = 0; j < c; ++j) xn->grad[i * c + j] += self.grad[j] * inv;
  });
}

Tensor straight_through_onehot(const Tensor& soft) {
  require(soft.rank() == 2, "straight_through_onehot",
          "expects [T, V], got " + shape_str(soft.shape()));
  int64_t t = soft.dim(0), v = soft.dim(1);
  std::vector<double> out(static_cast<size_t>(t * v), 0.0);
  for (int64_t i = 0; i < t; ++i) {
    const double* row = &soft.data()[i * v];
    int64_t best = std::max_element(row, row + v) - row;
    out[i * v + best] = 1.0;
  }
  auto sn = soft.node();
  return detail::make_result(soft.shape(), std::move(out), {sn}, [sn](Node& self) {
    sn->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) sn->grad[i] += self.grad[i];
  });
}

Tensor plogp_sum(const Tensor& p) {
  double s = 0.0;
  for (double v : p.data())
    if (v > 0.0) s += v * std::log(v);
  auto pn = p.node();
  return detail::make_result({}, {s}, {pn}, [pn](Node& self) {
    pn->ensure_grad();
    for (size_t i = 0; i < pn->value.size(); ++i) {
      double v = pn->value[i];
      if (v > 0.0) pn->grad[i] += self.grad[0] * (std::log(v) + 1.0);
    }
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int32_t> targets) {
  require(logits.rank() == 2, "cross_entropy",
          "logits must be [T, V], got " + shape_str(logits.shape()));
  int64_t t = logits.dim(0), v = logits.dim(1);
  require(static_cast<int64_t>(targets.size()) == t, "cross_entropy",
          "target length " + std::to_string(targets.size()) + " does not match " +
              shape_str(logits.shape()));
  std::vector<int32_t> tg(targets.begin(), targets.end());
  for (int32_t y : tg)
    require(y >= 0 && y < v, "cross_entropy", "target id out of range");
  double loss = 0.0;
  std::vector<double> probs(static_cast<size_t>(t * v));
  for (int64_t i = 0; i < t; ++i) {
    const double* row = &logits.data()[i * v];
    double mx = *std::max_element(row, row + v);
    double z = 0.0;
    for (int64_t j = 0; j < v; ++j) z += std::exp(row[j] - mx);
    double lse = mx + std::log(z);
    loss += lse - row[tg[i]];
    for (int64_t j = 0; j < v; ++j) probs[i * v + j] = std::exp(row[j] - lse);
  }
  loss /= static_cast<double>(t);
  auto ln = logits.node();
  return detail::make_result({}, {loss}, {ln}, [ln, tg, t, v, probs](Node& self) {
    ln->ensure_grad();
    double scale = self.grad[0] / static_cast<double>(t);
    for (int64_t i = 0; i < t; ++i)
      for (int64_t j = 0; j < v; ++j) {
        double g = probs[i * v + j] - (tg[i] == j ? 1.0 : 0.0);
        ln->grad[i * v + j] += scale * g;
      }
  });
}

Tensor bce_with_logits(const Tensor& logits, std::span<const double> targets) {
  require(logits.rank() == 1, "bce_with_logits",
          "logits must be [T], got " + shape_str(logits.shape()));
  int64_t t = logits.dim(0);
  require(static_cast<int64_t>(targets.size()) == t, "bce_with_logits",
          "target length does not match logits length " + std::to_string(t));
  std::vector<double> y(targets.begin(), targets.end());
  double loss = 0.0;
  for (int64_t i = 0; i < t; ++i) {
    double z = logits.data()[i];
    loss += std::max(z, 0.0) - z * y[i] + stable_log1pexp(-std::abs(z));
  }
  loss /= static_cast<double>(t);
  auto ln = logits.node();
  return detail::make_result({}, {loss}, {ln}, [ln, y, t](Node& self) {
    ln->ensure_grad();
    double scale = self.grad[0] / static_cast<double>(t);
    for (int64_t i = 0; i < t; ++i) {
      double z = ln->value[i];
      double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
      ln->grad[i] += scale * (s - y[i]);
    }
  });
}

Tensor mse(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "mse",
          "shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) + " differ");
  require(a.numel() > 0, "mse", "empty tensors");
  double s = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    double d = a.data()[i] - b.data()[i];
    s += d * d;
  }
  double inv = 1.0 / static_cast<double>(a.numel());
  auto an = a.node(), bn = b.node();
  return detail::make_result({}, {s * inv}, {an, bn}, [an, bn, inv](Node& self) {
    double scale = 2.0 * inv * self.grad[0];
    if (an->requires_grad) {
      an->ensure_grad();
      for (size_t i = 0; i < an->value.size(); ++i)
        an->grad[i] += scale * (an->value[i] - bn->value[i]);
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (size_t i = 0; i < bn->value.size(); ++i)
        bn->grad[i] -= scale * (an->value[i] - bn->value[i]);
    }
  });
}

}  // namespace maulab::ops
