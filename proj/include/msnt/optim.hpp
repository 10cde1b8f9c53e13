#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "msnt/tensor.hpp"

namespace msnt {

struct AdamState {
  std::uint64_t step = 0;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// One bias-corrected Adam update in place. Moments are sized on first use.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Global gradient-norm clip; zero disables clipping.
  double clip_norm = 0.0;
};

// Adam over a fixed list of parameter tensors.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamOptions options);

  void zero_grad();
  // Applies one update from the accumulated gradients.
  void step();
  double last_grad_norm() const { return last_grad_norm_; }
  const std::vector<AdamState>& states() const { return states_; }

 private:
  std::vector<Tensor> params_;
  AdamOptions options_;
  std::vector<AdamState> states_;
  double last_grad_norm_ = 0.0;
};

}  // namespace msnt
