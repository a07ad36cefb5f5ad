#include "nmtprobe/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace nmtprobe {

namespace {

double evaluate_loss(const LossBuilder& build) {
  Graph g(Mode::eval);
  const Var loss = build(g);
  const Tensor& v = g.value(loss);
  if (v.rows() != 1 || v.cols() != 1) throw ShapeError("grad_check: loss must be 1x1");
  return v(0, 0);
}

}  // namespace

GradCheckReport grad_check(ParameterSet& params, const LossBuilder& build, double eps, Stencil stencil) {
  if (!(eps > 0.0 && eps <= 1e-3)) throw ValueError("grad_check: eps must be in (0, 1e-3]");

  params.zero_grad();
  {
    Graph g(Mode::eval);
    g.backward(build(g));
  }

  GradCheckReport report;
  for (auto& p : params) {
    for (Index i = 0; i < p.value.size(); ++i) {
      double& x = p.value.data()[i];
      const double saved = x;
      auto at = [&](double offset) {
        x = saved + offset;
        const double loss = evaluate_loss(build);
        x = saved;
        return loss;
      };
      double numeric;
      if (stencil == Stencil::three_point) {
        numeric = (at(eps) - at(-eps)) / (2.0 * eps);
      } else {
        numeric = (8.0 * (at(eps) - at(-eps)) - (at(2.0 * eps) - at(-2.0 * eps))) / (12.0 * eps);
      }
      const double analytic = p.grad.data()[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double err = std::abs(analytic - numeric) / denom;
      ++report.entries_checked;
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_parameter = p.name;
        report.worst_entry = i;
        report.analytic = analytic;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace nmtprobe
