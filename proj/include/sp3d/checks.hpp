#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sp3d/tensor.hpp"

namespace sp3d {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Property suites behind `check --suite ...`; the gradient suite is also the
// first acceptance criterion.
std::vector<CheckResult> run_gradient_suite();
std::vector<CheckResult> run_oracle_suite();
std::vector<CheckResult> run_invariant_suite();

// Central finite differences of a scalar functional against an analytic
// gradient; returns the max relative error over the checked entries.
double max_grad_rel_err(const std::function<double(const Tensor&)>& f, Tensor x,
                        const Tensor& analytic, double h, int max_entries = 40);

}  // namespace sp3d
