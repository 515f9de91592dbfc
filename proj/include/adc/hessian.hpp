/// Second-order derivatives by forward-over-reverse composition: the
/// reverse-mode gradient is emitted as source, then forward-differentiated
/// once per column. Tape intrinsics inside the gradient pass tangents
/// through alongside the primal values, which is what makes the composition
/// legal on machine-generated code.
#pragma once

#include <string>
#include <vector>

#include "adc/ast.hpp"

namespace adc {

struct HessianResult {
  int n = 0;
  std::vector<double> values;  // row-major, n x n, row/column order = wrt order

  double at(int i, int j) const { return values[static_cast<size_t>(i) * n + j]; }
};

/// Hessian of f at `point` (one value per parameter, scalar reals only).
HessianResult hessian(const Module& m, const std::string& fn,
                      const std::vector<std::string>& wrt, const std::vector<double>& point);

}  // namespace adc
