#include "loster/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace loster {

namespace {

double evaluate(const LossFn& loss) {
  Tape tape;
  Var l = loss(tape);
  const double v = tape.scalar(l);
  if (!std::isfinite(v)) {
    throw std::runtime_error("finite_diff_check: loss is not finite at a perturbed point");
  }
  return v;
}

}  // namespace

GradCheckReport finite_diff_check_report(const LossFn& loss, const std::vector<Parameter*>& params,
                                         double step) {
  if (step <= 0.0) throw std::invalid_argument("finite_diff_check: step must be positive");
  GradCheckReport report;
  if (params.empty()) return report;

  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    Var l = loss(tape);
    if (!std::isfinite(tape.scalar(l))) {
      throw std::runtime_error("finite_diff_check: loss is not finite");
    }
    tape.backward(l);
  }
  std::vector<DenseMatrix> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) analytic.push_back(p->grad);

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    for (std::size_t c = 0; c < p.value.size(); ++c) {
      const double saved = p.value.data()[c];
      p.value.data()[c] = saved + step;
      const double up = evaluate(loss);
      p.value.data()[c] = saved - step;
      const double down = evaluate(loss);
      p.value.data()[c] = saved;

      const double central = (up - down) / (2.0 * step);
      const double a = analytic[pi].data()[c];
      const double rel = std::abs(a - central) / std::max({std::abs(a), std::abs(central), 1e-8});
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_parameter = p.name;
        report.worst_coordinate = c;
        report.analytic = a;
        report.central = central;
      }
    }
  }
  return report;
}

double finite_diff_check(const LossFn& loss, const std::vector<Parameter*>& params, double step) {
  return finite_diff_check_report(loss, params, step).max_rel_error;
}

}  // namespace loster
