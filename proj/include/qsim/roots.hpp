#pragma once

#include <cmath>
#include <utility>

#include "qsim/errors.hpp"

namespace qsim {

struct RootOptions {
  double x_tol_rel = 1e-12;
  double f_tol = 0.0;  // stop early when |f| drops below this (0 disables)
  int max_iter = 200;
};

// Safeguarded bracketed root finding: secant steps clipped to the current
// bracket, with bisection whenever the secant step stalls or escapes.
// Requires f(lo) and f(hi) of opposite sign.
template <class F>
double find_root(F&& f, double lo, double hi, const RootOptions& opts = {}) {
  if (!(lo < hi)) throw BracketFailure("find_root: empty bracket");
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0)) throw BracketFailure("find_root: no sign change over bracket");

  double x = lo, fx = flo;
  for (int it = 0; it < opts.max_iter; ++it) {
    const double width = hi - lo;
    if (width <= opts.x_tol_rel * (std::fabs(lo) + std::fabs(hi)) * 0.5 + 1e-300)
      return 0.5 * (lo + hi);

    double cand;
    const double denom = fhi - flo;
    if (denom != 0.0) {
      cand = lo - flo * width / denom;
      const double margin = 0.01 * width;
      if (!(cand > lo + margin && cand < hi - margin)) cand = 0.5 * (lo + hi);
    } else {
      cand = 0.5 * (lo + hi);
    }

    x = cand;
    fx = f(x);
    if (fx == 0.0 || (opts.f_tol > 0.0 && std::fabs(fx) <= opts.f_tol)) return x;
    if ((fx > 0.0) == (flo > 0.0)) {
      lo = x;
      flo = fx;
    } else {
      hi = x;
      fhi = fx;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace qsim
