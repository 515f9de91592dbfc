/// Central finite-difference gradient oracle. Exactly two primal
/// evaluations per requested coordinate, no extrapolation, step
/// h = eps^(1/3) * max(1, |x|).
#pragma once

#include <map>
#include <string>
#include <vector>

#include "adc/eval.hpp"

namespace adc {

struct DiffConfig {
  // Per-parameter step override (keyed by parameter name).
  std::map<std::string, double> step_override;

  double step_for(const std::string& param, double x) const;
};

struct CentralGradient {
  // One entry per requested coordinate: scalar parameters contribute one,
  // array parameters one per element, in wrt order.
  std::vector<double> values;
  OpCounters counts;      // aggregated over all primal evaluations
  uint64_t evaluations = 0;
};

/// Differentiates fn at `args` with respect to the named real parameters.
/// Array parameters expand to all their elements. Evaluator domain errors
/// are reported with the offending perturbation attached.
CentralGradient central_gradient(const Program& p, const std::string& fn, const ArgPack& args,
                                 const std::vector<std::string>& wrt,
                                 const DiffConfig& cfg = {});

}  // namespace adc
