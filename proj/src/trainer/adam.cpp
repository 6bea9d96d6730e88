#include "erd/trainer/adam.hpp"

#include <cmath>

#include "erd/errors.hpp"

namespace erd::trainer {

void adam_step(std::span<ad::Tensor> params, AdamState& state, const AdamHyper& hyper) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) {
    throw DimensionError("Adam state tracks " + std::to_string(state.m.size()) +
                         " tensors, got " + std::to_string(params.size()));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(hyper.beta1, t);
  const double correction2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != p.size()) throw DimensionError("Adam state shape mismatch");
    if (!p.has_grad()) {
      // Zero gradient: moments decay, parameters may still move.
      for (std::size_t k = 0; k < m.size(); ++k) {
        m[k] *= hyper.beta1;
        v[k] *= hyper.beta2;
      }
    }
    auto values = p.data();
    const auto grad = p.has_grad() ? p.grad() : std::span<const float>{};
    for (std::size_t k = 0; k < values.size(); ++k) {
      if (!grad.empty()) {
        const double g = grad[k];
        m[k] = hyper.beta1 * m[k] + (1.0 - hyper.beta1) * g;
        v[k] = hyper.beta2 * v[k] + (1.0 - hyper.beta2) * g * g;
      }
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      values[k] = static_cast<float>(values[k] -
                                     hyper.learning_rate * m_hat / (std::sqrt(v_hat) + hyper.epsilon));
    }
  }
}

}  // namespace erd::trainer
