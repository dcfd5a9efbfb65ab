#pragma once

#include <functional>

#include "ictn/tensor.hpp"

namespace ictn {

// Compares the reverse-mode gradient of a scalar-valued function against
// central finite differences at x0. Returns the max over elements of
// |analytic - cd| / max(|analytic|, |cd|, 1e-12).
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x0,
                  double eps = 1e-5);

// Registered finite-difference checks for every differentiable primitive
// and block kind, with their pass thresholds. Deterministic (fixed seeds).
struct GradCheckCase {
  std::string name;
  double threshold;
  std::function<double()> run;  // returns the max relative error
};

std::vector<GradCheckCase> gradcheck_suite();

}  // namespace ictn
