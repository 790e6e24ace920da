#include "maulab/optim.hpp"

#include <cmath>

namespace maulab {

void TrainConfig::validate() const {
  if (base_lr <= 0.0) fail(ErrorKind::Config, "base_lr must be > 0");
  if (warmup_steps < 1) fail(ErrorKind::Config, "warmup_steps must be >= 1");
  if (model_dim_for_schedule < 1) fail(ErrorKind::Config, "model_dim_for_schedule must be >= 1");
  if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0)
    fail(ErrorKind::Config, "adam betas must lie in [0, 1)");
  if (max_steps < 1) fail(ErrorKind::Config, "max_steps must be >= 1");
  if (batch_size < 1) fail(ErrorKind::Config, "batch_size must be >= 1");
}

double warmup_schedule(int64_t step, const TrainConfig& cfg) {
  if (step < 1) fail(ErrorKind::Contract, "warmup_schedule requires step >= 1");
  double s = static_cast<double>(step);
  double w = static_cast<double>(cfg.warmup_steps);
  double ramp = std::min(1.0 / std::sqrt(s), s / (w * std::sqrt(w)));
  return cfg.base_lr * ramp / std::sqrt(static_cast<double>(cfg.model_dim_for_schedule));
}

void AdamOptimizer::step(std::span<Tensor> params, int64_t step_index) {
  if (step_index < 1) fail(ErrorKind::Contract, "adam step_index must be >= 1");
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i].data().size(), 0.0);
      v_[i].assign(params[i].data().size(), 0.0);
    }
  }
  if (m_.size() != params.size())
    fail(ErrorKind::Contract, "optimizer was initialized with a different parameter list");

  double lr = warmup_schedule(step_index, cfg_);
  double b1 = cfg_.adam_beta1, b2 = cfg_.adam_beta2;
  double bc1 = 1.0 - std::pow(b1, static_cast<double>(step_index));
  double bc2 = 1.0 - std::pow(b2, static_cast<double>(step_index));

  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    auto g = p.grad();
    auto& value = p.mutable_value();
    auto& m = m_[i];
    auto& v = v_[i];
    for (size_t j = 0; j < value.size(); ++j) {
      if (!std::isfinite(g[j])) {
        fail(ErrorKind::Diverged,
             "non-finite gradient in parameter '" + p.name() + "' at index " + std::to_string(j));
      }
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      double mhat = m[j] / bc1;
      double vhat = v[j] / bc2;
      value[j] -= lr * mhat / (std::sqrt(vhat) + cfg_.adam_eps);
    }
  }
}

}  // namespace maulab
