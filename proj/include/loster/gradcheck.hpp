#pragma once

#include <functional>
#include <string>
#include <vector>

#include "loster/tape.hpp"

namespace loster {

// Builds the loss on the given tape. Must be deterministic: repeated calls
// with the same parameter values must produce the same scalar (freeze any
// noise, disable dropout).
using LossFn = std::function<Var(Tape&)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_coordinate = 0;
  double analytic = 0.0;
  double central = 0.0;
};

// Central-difference check of the taped gradient. Returns the maximum over
// all parameter coordinates of
//   |analytic - central| / max(|analytic|, |central|, 1e-8).
// Zero parameters yield 0 by convention. Throws if the loss evaluates to a
// non-finite value at any perturbed point.
double finite_diff_check(const LossFn& loss, const std::vector<Parameter*>& params,
                         double step = 1e-5);

GradCheckReport finite_diff_check_report(const LossFn& loss, const std::vector<Parameter*>& params,
                                         double step = 1e-5);

}  // namespace loster
