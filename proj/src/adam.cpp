#include "cbqg/adam.hpp"

#include <cmath>

#include "cbqg/errors.hpp"

namespace cbqg {

void adam_step(std::span<double> params, std::span<const double> grads, AdamMoments& state, double lr,
               const AdamHyper& hyper) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size())
    throw ArgumentError("adam_step: parameter, gradient and moment sizes differ");
  ++state.t;
  const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g;
    state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
  }
}

Adam::Adam(std::vector<NamedTensor>& params, double lr, AdamHyper hyper)
    : params_(&params), lr_(lr), hyper_(hyper) {
  for (const auto& p : params) states_.emplace_back(p.tensor.numel());
}

void Adam::step() {
  for (std::size_t i = 0; i < params_->size(); ++i) {
    Tensor& t = (*params_)[i].tensor;
    adam_step(t.mutable_values(), t.grad(), states_[i], lr_, hyper_);
  }
}

}  // namespace cbqg
