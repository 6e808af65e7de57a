#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "qsim/errors.hpp"
#include "qsim/ext_real.hpp"

namespace qsim::quad {

struct Options {
  double rel_tol = 1e-10;
  double abs_floor = 1e-14;
  int max_intervals = 4000;  // adaptive bisection budget per call
  int max_shells = 4000;     // dyadic refinement budget per endpoint
};

namespace detail {

// Gauss 7 / Kronrod 15 pair (QUADPACK abscissae, positive half).
inline constexpr double kXgk[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.000000000000000};
inline constexpr double kWgk[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728};
inline constexpr double kWg[4] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119, 0.417959183673469};

struct RuleResult {
  double value = 0.0;
  double error = 0.0;
  bool ok = true;  // false if a node evaluated to a non-finite value
};

template <class F>
RuleResult gk15(F&& f, double a, double b) {
  const double hl = 0.5 * (b - a);
  const double c = 0.5 * (a + b);

  double fv[15];
  fv[7] = f(c);
  for (int i = 0; i < 7; ++i) {
    const double dx = hl * kXgk[i];
    fv[i] = f(c - dx);
    fv[14 - i] = f(c + dx);
  }

  double resk = kWgk[7] * fv[7];
  double resabs = kWgk[7] * std::fabs(fv[7]);
  double resg = kWg[3] * fv[7];
  for (int i = 0; i < 7; ++i) {
    const double sum = fv[i] + fv[14 - i];
    resk += kWgk[i] * sum;
    resabs += kWgk[i] * (std::fabs(fv[i]) + std::fabs(fv[14 - i]));
    if (i % 2 == 1) resg += kWg[i / 2] * sum;
  }
  const double reskh = resk * 0.5;
  double resasc = kWgk[7] * std::fabs(fv[7] - reskh);
  for (int i = 0; i < 7; ++i)
    resasc += kWgk[i] * (std::fabs(fv[i] - reskh) + std::fabs(fv[14 - i] - reskh));

  RuleResult r;
  r.value = resk * hl;
  resasc *= std::fabs(hl);
  double err = std::fabs((resk - resg) * hl);
  if (resasc != 0.0 && err != 0.0)
    err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  r.error = err;
  for (double v : fv)
    if (!std::isfinite(v)) r.ok = false;
  return r;
}

struct Segment {
  double a, b, value, error;
};

// Bisection-refined GK15 over [a, b]. Returns false (with partial sums in
// value/error) if the budget runs out or a node value is non-finite.
template <class F>
bool try_adaptive(F&& f, double a, double b, const Options& opts, double& value, double& error) {
  std::vector<Segment> segs;
  auto first = gk15(f, a, b);
  if (!first.ok) return false;
  segs.push_back({a, b, first.value, first.error});
  double total = first.value;
  double toterr = first.error;

  int used = 1;
  while (toterr > std::max(opts.abs_floor, opts.rel_tol * std::fabs(total))) {
    if (used >= opts.max_intervals) {
      value = total;
      error = toterr;
      return false;
    }
    std::size_t worst = 0;
    for (std::size_t i = 1; i < segs.size(); ++i)
      if (segs[i].error > segs[worst].error) worst = i;
    Segment s = segs[worst];
    const double mid = 0.5 * (s.a + s.b);
    if (mid <= s.a || mid >= s.b) {  // interval no longer splittable
      value = total;
      error = toterr;
      return false;
    }
    auto left = gk15(f, s.a, mid);
    auto right = gk15(f, mid, s.b);
    if (!left.ok || !right.ok) {
      value = total;
      error = toterr;
      return false;
    }
    total += left.value + right.value - s.value;
    toterr += left.error + right.error - s.error;
    segs[worst] = {s.a, mid, left.value, left.error};
    segs.push_back({mid, s.b, right.value, right.error});
    ++used;
  }
  value = total;
  error = toterr;
  return true;
}

enum class ShellVerdict { Converged, Diverges, Undecided };

// Dyadic shells closing in on a singular endpoint: shell k covers the
// interval at distance [z/2^{k+1}, z/2^k] from the endpoint. The shell-sum
// ratio distinguishes integrable power singularities (ratio 2^{p-1} < 1)
// from log and non-integrable ones (ratio >= 1).
struct ShellSummary {
  ShellVerdict verdict = ShellVerdict::Undecided;
  double sum = 0.0;
  bool positive_divergence = true;
};

template <class F>
ShellSummary shell_refine(F&& f, double endpoint, double zone_width, bool toward_right,
                          double scale_hint, const Options& opts) {
  // toward_right: shells approach `endpoint` from the left (singularity at
  // the right end of [endpoint - zone_width, endpoint]); otherwise mirrored.
  ShellSummary out;
  Options shell_opts = opts;
  shell_opts.max_intervals = 200;

  std::vector<double> recent;
  double sum = 0.0;
  double ratio_est = 0.5;
  double prev = 0.0;
  bool have_prev = false;
  int quiet = 0;

  double width = zone_width;
  for (int k = 0; k < opts.max_shells; ++k) {
    const double half = width * 0.5;
    double lo, hi;
    if (toward_right) {
      lo = endpoint - width;
      hi = endpoint - half;
    } else {
      lo = endpoint + half;
      hi = endpoint + width;
    }
    if (!(lo < hi) || hi - lo < std::fabs(endpoint) * 1e-17 + 1e-300) {
      // Representable width exhausted. Only safe to stop if the shell sums
      // had already decayed below tolerance.
      const double tol_here = std::max(opts.abs_floor, opts.rel_tol * (std::fabs(sum) + scale_hint));
      out.verdict = (!have_prev || std::fabs(prev) <= tol_here) ? ShellVerdict::Converged
                                                                : ShellVerdict::Undecided;
      out.sum = sum;
      return out;
    }
    double sv = 0.0, se = 0.0;
    if (!try_adaptive(f, lo, hi, shell_opts, sv, se)) {
      out.verdict = ShellVerdict::Undecided;  // singularity not confined to the endpoint
      return out;
    }
    sum += sv;
    const double tol = std::max(opts.abs_floor, opts.rel_tol * (std::fabs(sum) + scale_hint));

    if (have_prev && prev != 0.0 && sv != 0.0 && ((prev > 0) == (sv > 0))) {
      recent.push_back(sv / prev);
      if (recent.size() > 6) recent.erase(recent.begin());
      if (recent.size() == 6) {
        double rmin = *std::min_element(recent.begin(), recent.end());
        double rmax = *std::max_element(recent.begin(), recent.end());
        if (rmin >= 0.995 && std::fabs(sv) > tol) {
          out.verdict = ShellVerdict::Diverges;
          out.positive_divergence = sv > 0.0;
          return out;
        }
        // Stable geometric decay: extrapolate the tail and stop early.
        if (rmax < 0.99 && rmax - rmin < 0.01 * rmin) {
          ratio_est = 0.5 * (rmin + rmax);
          const double tail = sv * ratio_est / (1.0 - ratio_est);
          const double tail_err = std::fabs(sv) * (rmax - rmin) / ((1.0 - rmax) * (1.0 - rmax));
          if (std::fabs(tail) < tol || tail_err < tol) {
            out.verdict = ShellVerdict::Converged;
            out.sum = sum + tail;
            return out;
          }
        }
      }
    } else {
      recent.clear();
    }
    if (std::fabs(sv) <= 0.25 * tol) {
      if (++quiet >= 2) {
        out.verdict = ShellVerdict::Converged;
        out.sum = sum;
        return out;
      }
    } else {
      quiet = 0;
    }
    prev = sv;
    have_prev = true;
    width = half;
  }
  return out;  // Undecided: shell budget exhausted
}

}  // namespace detail

// Integrate f over the finite interval [a, b]. f may be unbounded at either
// endpoint (the rule is open and never evaluates them): integrable endpoint
// singularities are resolved by dyadic refinement, and recognized divergent
// ones yield a signed infinity. Throws NonconvergentQuadrature when the
// refinement budget is exhausted without either outcome.
template <class F>
ExtReal integrate(F&& f, double a, double b, const Options& opts = {}) {
  if (!(std::isfinite(a) && std::isfinite(b))) throw DomainError("quad::integrate: bounds must be finite");
  if (a > b) throw DomainError("quad::integrate: empty interval");
  if (a == b) return ExtReal::finite(0.0);

  double value = 0.0, error = 0.0;
  if (detail::try_adaptive(f, a, b, opts, value, error)) return ExtReal::finite(value);

  // Direct refinement stalled: re-attack assuming trouble at the endpoints.
  const double w = b - a;
  const double qa = a + 0.25 * w;
  const double qb = b - 0.25 * w;
  double core = 0.0, core_err = 0.0;
  if (!detail::try_adaptive(f, qa, qb, opts, core, core_err))
    throw NonconvergentQuadrature("quad::integrate: interior refinement failed");

  const double scale = std::fabs(core);
  auto left = detail::shell_refine(f, a, 0.25 * w, false, scale, opts);
  if (left.verdict == detail::ShellVerdict::Undecided)
    throw NonconvergentQuadrature("quad::integrate: left endpoint unresolved");
  auto right = detail::shell_refine(f, b, 0.25 * w, true, scale, opts);
  if (right.verdict == detail::ShellVerdict::Undecided)
    throw NonconvergentQuadrature("quad::integrate: right endpoint unresolved");

  const bool ldiv = left.verdict == detail::ShellVerdict::Diverges;
  const bool rdiv = right.verdict == detail::ShellVerdict::Diverges;
  if (ldiv || rdiv) {
    if (ldiv && rdiv && left.positive_divergence != right.positive_divergence)
      throw NonconvergentQuadrature("quad::integrate: opposite-signed divergences");
    const bool pos = ldiv ? left.positive_divergence : right.positive_divergence;
    return pos ? ExtReal::pos_inf() : ExtReal::neg_inf();
  }
  return ExtReal::finite(core + left.sum + right.sum);
}

}  // namespace qsim::quad
