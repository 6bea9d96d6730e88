#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "erd/autodiff/tape.hpp"
#include "erd/errors.hpp"

namespace erd::ad {

struct GradientCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

/// Compares reverse-mode gradients of a scalar graph against central
/// differences. Error per element is |analytic - numeric| / max(1, |numeric|).
///
/// `build` must construct the graph from the current parameter values each
/// time it is called; it is invoked once under a tape and twice per checked
/// element without one.
template <typename T>
GradientCheckReport gradient_check(const std::function<BasicTensor<T>()>& build,
                                   std::vector<BasicTensor<T>> params, double eps) {
  if (!(eps >= 1e-5 && eps <= 1e-2)) {
    throw ValidationError("gradient_check: eps must lie in [1e-5, 1e-2]");
  }
  auto evaluate = [&build]() {
    NoGradScope<T> no_grad;
    const double value = static_cast<double>(build().item());
    if (!std::isfinite(value)) throw EvaluationError("gradient_check: non-finite loss");
    return value;
  };

  for (auto& p : params) p.drop_grad();
  std::vector<std::vector<T>> analytic;
  {
    Tape<T> tape;
    TapeScope<T> scope(tape);
    auto loss = build();
    if (!std::isfinite(static_cast<double>(loss.item()))) {
      throw EvaluationError("gradient_check: non-finite loss");
    }
    tape.backward(loss);
  }
  for (auto& p : params) {
    if (p.has_grad()) {
      analytic.emplace_back(p.grad().begin(), p.grad().end());
    } else {
      analytic.emplace_back(p.size(), T(0));
    }
    p.drop_grad();
  }

  GradientCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto values = params[pi].data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const T original = values[i];
      const T plus = static_cast<T>(original + eps);
      const T minus = static_cast<T>(original - eps);
      values[i] = plus;
      const double f_plus = evaluate();
      values[i] = minus;
      const double f_minus = evaluate();
      values[i] = original;
      const double numeric =
          (f_plus - f_minus) / (static_cast<double>(plus) - static_cast<double>(minus));
      const double a = analytic[pi][i];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(numeric));
      ++report.checked;
      if (report.checked == 1 || err > report.max_relative_error) {
        report.max_relative_error = err;
        report.worst_param = pi;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace erd::ad
