#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "picknet/errors.hpp"
#include "picknet/tensor.hpp"

namespace picknet {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
};

// Central-difference check of the analytic gradients already stored in the
// params. f must be pure: it re-evaluates the scalar loss from the current
// param values without touching the grads. Relative error per coordinate is
// |analytic - numeric| / max(1, |analytic|, |numeric|).
template <typename F>
GradCheckReport grad_check(F&& f, const std::vector<Param*>& params, double h = 1e-5) {
  GradCheckReport report;
  for (Param* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + h;
      const double fp = f();
      p->value[i] = saved - h;
      const double fm = f();
      p->value[i] = saved;
      if (!std::isfinite(fp) || !std::isfinite(fm))
        throw UsageError("grad_check: non-finite loss at " + p->name + "[" + std::to_string(i) + "]");
      const double numeric = (fp - fm) / (2.0 * h);
      const double analytic = p->grad[i];
      const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
      const double rel = std::abs(analytic - numeric) / denom;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = p->name;
        report.worst_index = i;
      }
    }
  }
  return report;
}

}  // namespace picknet
