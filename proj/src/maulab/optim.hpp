#ifndef MAULAB_OPTIM_HPP
#define MAULAB_OPTIM_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "maulab/tensor.hpp"

namespace maulab {

struct TrainConfig {
  double base_lr = 1.0;
  int64_t warmup_steps = 4000;
  int64_t model_dim_for_schedule = 512;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int64_t max_steps = 1000;
  int64_t batch_size = 8;

  void validate() const;
};

// Inverse-square-root ramp: base_lr · d^-1/2 · min(step^-1/2, step · warmup^-3/2).
// Maximized at step == warmup_steps.
double warmup_schedule(int64_t step, const TrainConfig& cfg);

// Adam with bias correction; moment buffers are owned here and keyed by
// parameter position, so the same optimizer must be fed the same parameter
// list every step.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(const TrainConfig& cfg) : cfg_(cfg) {}

  // step_index starts at 1. Throws ErrorKind::Diverged on non-finite
  // gradients, naming the parameter.
  void step(std::span<Tensor> params, int64_t step_index);

  const TrainConfig& config() const { return cfg_; }

 private:
  TrainConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace maulab

#endif
