#pragma once

#include <span>
#include <vector>

#include "erd/autodiff/tensor.hpp"

namespace erd::trainer {

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First and second moments per parameter element, plus the step count.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t step = 0;

  void reset() {
    m.clear();
    v.clear();
    step = 0;
  }
};

/// One bias-corrected Adam update of every parameter from its gradient
/// buffer (a parameter without one counts as a zero gradient). Moments are
/// allocated on the first call.
void adam_step(std::span<ad::Tensor> params, AdamState& state, const AdamHyper& hyper);

}  // namespace erd::trainer
