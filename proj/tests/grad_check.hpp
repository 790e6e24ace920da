#ifndef MAULAB_TESTS_GRAD_CHECK_HPP
#define MAULAB_TESTS_GRAD_CHECK_HPP

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "maulab/tensor.hpp"

namespace gradcheck {

struct Report {
  int64_t checked = 0;
  double max_rel_err = 0.0;
  std::string worst;

  bool ok(double tol) const { return max_rel_err <= tol; }
};

// Central finite differences against the reverse-mode gradients. The loss
// functor must be a pure function of the current parameter values (freeze
// any noise outside of it).
inline Report check_gradients(const std::function<maulab::Tensor()>& make_loss,
                              std::vector<maulab::Tensor>& params, double step = 1e-5) {
  using maulab::backward;
  using maulab::Tensor;

  Tensor loss = make_loss();
  maulab::zero_grads(params);
  backward(loss, params);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (Tensor& p : params) analytic.emplace_back(p.grad().begin(), p.grad().end());

  Report report;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& value = params[pi].mutable_value();
    for (size_t j = 0; j < value.size(); ++j) {
      double saved = value[j];
      value[j] = saved + step;
      double f_plus = make_loss().item();
      value[j] = saved - step;
      double f_minus = make_loss().item();
      value[j] = saved;
      double numeric = (f_plus - f_minus) / (2.0 * step);
      double a = analytic[pi][j];
      double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-4});
      ++report.checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst = params[pi].name() + "[" + std::to_string(j) + "] analytic=" +
                       std::to_string(a) + " numeric=" + std::to_string(numeric);
      }
    }
  }
  return report;
}

}  // namespace gradcheck

#endif
