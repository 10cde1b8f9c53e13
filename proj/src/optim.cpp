#include "msnt/optim.hpp"

#include <cmath>
#include <string>

namespace msnt {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
  if (params.size() != grads.size()) {
    throw ContractError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                        std::to_string(grads.size()) + " gradients");
  }
  if (!(state.beta1 > 0.0 && state.beta1 < 1.0 && state.beta2 > 0.0 && state.beta2 < 1.0)) {
    throw ContractError("adam_step: betas must lie in (0, 1)");
  }
  if (state.first_moment.empty() && state.second_moment.empty()) {
    state.first_moment.assign(params.size(), 0.0);
    state.second_moment.assign(params.size(), 0.0);
  }
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw ContractError("adam_step: moment lengths do not match parameter length");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * grads[i];
    v = state.beta2 * v + (1.0 - state.beta2) * grads[i] * grads[i];
    params[i] -= state.learning_rate * (m / c1) / (std::sqrt(v / c2) + state.epsilon);
  }
}

Adam::Adam(std::vector<Tensor> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  states_.resize(params_.size());
  for (AdamState& s : states_) {
    s.learning_rate = options_.learning_rate;
    s.beta1 = options_.beta1;
    s.beta2 = options_.beta2;
    s.epsilon = options_.epsilon;
  }
}

void Adam::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

void Adam::step() {
  double sq = 0.0;
  for (const Tensor& p : params_) {
    for (double g : p.grad()) sq += g * g;
  }
  last_grad_norm_ = std::sqrt(sq);
  const double factor = (options_.clip_norm > 0.0 && last_grad_norm_ > options_.clip_norm)
                            ? options_.clip_norm / last_grad_norm_
                            : 1.0;
  std::vector<double> scaled;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    auto g = p.grad_buffer();
    if (factor != 1.0) {
      scaled.assign(g.begin(), g.end());
      for (double& e : scaled) e *= factor;
      adam_step(p.mutable_data(), scaled, states_[i]);
    } else {
      adam_step(p.mutable_data(), g, states_[i]);
    }
  }
}

}  // namespace msnt
