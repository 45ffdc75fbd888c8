#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "entail/tensor.hpp"

namespace entail {

struct GradCheckReport {
  bool pass = false;
  double max_rel_err = 0.0;
  std::size_t worst_input = 0;   // which tensor
  std::size_t worst_coord = 0;   // which coordinate within it
  std::size_t coords_checked = 0;
};

// Compares an analytic gradient against central finite differences
// (f(x+h) - f(x-h)) / 2h, coordinate by coordinate.
//
//   f              pure scalar function of the inputs
//   analytic_grad  d f / d inputs, one tensor per input, same shapes
//
// Relative error uses max(|a|, |n|) as denominator with a small floor so
// that near-zero coordinate pairs do not blow up the ratio.
inline GradCheckReport grad_check(
    const std::function<scalar(const std::vector<Tensor>&)>& f,
    const std::function<std::vector<Tensor>(const std::vector<Tensor>&)>& analytic_grad,
    std::vector<Tensor> inputs, double step = 1e-5, double tol = 1e-4) {
  constexpr double kDenomFloor = 1e-6;

  const scalar base = f(inputs);
  if (!std::isfinite(double(base))) throw NumericError("grad_check: f(x) is not finite");

  const std::vector<Tensor> analytic = analytic_grad(inputs);
  if (analytic.size() != inputs.size()) {
    throw ShapeError("grad_check: analytic gradient count mismatch");
  }

  GradCheckReport report;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!analytic[i].same_shape(inputs[i])) {
      throw ShapeError("grad_check: gradient shape mismatch for input " + std::to_string(i));
    }
    for (std::size_t c = 0; c < inputs[i].v.size(); ++c) {
      const scalar saved = inputs[i].v[c];
      inputs[i].v[c] = saved + scalar(step);
      const double fp = double(f(inputs));
      inputs[i].v[c] = saved - scalar(step);
      const double fm = double(f(inputs));
      inputs[i].v[c] = saved;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        throw NumericError("grad_check: perturbed f(x) is not finite");
      }
      const double numeric = (fp - fm) / (2.0 * step);
      const double a = double(analytic[i].v[c]);
      const double denom = std::max({std::abs(a), std::abs(numeric), kDenomFloor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.coords_checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_input = i;
        report.worst_coord = c;
      }
    }
  }
  report.pass = report.max_rel_err < tol;
  return report;
}

}  // namespace entail
