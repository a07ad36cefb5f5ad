#pragma once

#include <functional>
#include <string>

#include "nmtprobe/autodiff.hpp"

namespace nmtprobe {

/// Builds a scalar loss on a fresh graph. Must be deterministic: the checker
/// calls it once for the analytic pass and twice per parameter entry.
using LossBuilder = std::function<Var(Graph&)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  Index worst_entry = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t entries_checked = 0;
};

enum class Stencil {
  /// (f(x+h) - f(x-h)) / 2h; truncation error O(h^2).
  three_point,
  /// (-f(x+2h) + 8f(x+h) - 8f(x-h) + f(x-2h)) / 12h; truncation error O(h^4),
  /// so a larger h can keep roundoff small on near-zero gradients.
  five_point,
};

/// Compares backprop gradients with central differences over every entry of
/// every parameter. Error per entry is |a - n| / max(|a|, |n|, 1e-8).
/// Parameter values are restored and grads are left holding the analytic
/// gradient.
GradCheckReport grad_check(ParameterSet& params, const LossBuilder& build, double eps = 1e-5,
                           Stencil stencil = Stencil::three_point);

}  // namespace nmtprobe
