#include "qsim/theory.hpp"

#include <cmath>
#include <limits>

#include "qsim/roots.hpp"

namespace qsim::theory {

namespace {

// h(z) = (-z - ln(1-z)) / z^2 = sum_{k>=0} z^k/(k+2) on [0, 1).
// Series below 0.25 where the direct form cancels; h(0) = 1/2.
double h_of(double z) {
  if (z < 0.25) {
    double sum = 0.0, zk = 1.0;
    for (int k = 0;; ++k) {
      const double term = zk / (k + 2);
      sum += term;
      if (term < 1e-18 * sum) break;
      zk *= z;
    }
    return sum;
  }
  return (-z - std::log1p(-z)) / (z * z);
}

double condition_II_integrand(double lambda, double r) {
  const double den = 1.0 - lambda * (1.0 - r);
  // Sharpen the pole: within rounding of the singular point the true
  // integrand is +infinity, not the noise of the cancelled subtraction.
  if (den <= 1e-14 * lambda * (1.0 - r))
    return std::numeric_limits<double>::infinity();
  return lambda * r / den;
}

}  // namespace

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::SurvivesViaI: return "survives_via_I";
    case Phase::SurvivesViaII: return "survives_via_II";
    default: return "extinct";
  }
}

SurvivalConditions evaluate_conditions(const RateDistribution& dist, double r,
                                       const quad::Options& opts) {
  if (!(r >= 0.0 && r <= 1.0)) throw DomainError("evaluate_conditions: r must be in [0,1]");
  SurvivalConditions sc;
  const double threshold =
      r < 1.0 ? 1.0 / (1.0 - r) : std::numeric_limits<double>::infinity();
  sc.condition_I_mass = dist.mass_above(threshold);
  sc.condition_I_holds = sc.condition_I_mass > 0.0;

  // Condition (II) is the integral over {lambda(1-r) <= 1} regardless of
  // whether (I) holds; m(r) = E(Y_infinity) is that integral unless (I)
  // holds, in which case it is infinite.
  ExtReal integral;
  if (r == 0.0) {
    integral = ExtReal::finite(0.0);  // integrand vanishes identically
  } else if (r == 1.0) {
    // The integrand reduces to lambda; use the exact mean so boundary
    // classifications like a = 2, r = 1 are not at the mercy of rounding.
    integral = ExtReal::finite(dist.mean());
  } else {
    integral = dist.expect([r](double lam) { return condition_II_integrand(lam, r); },
                           Interval{0.0, threshold}, opts);
  }
  sc.m_of_r = sc.condition_I_holds ? ExtReal::pos_inf() : integral;
  sc.condition_II_holds = integral > 1.0;
  return sc;
}

double m_uniform_closed_form(double a, double r) {
  if (!(std::isfinite(a) && a > 0.0)) throw DomainError("m_uniform_closed_form: a must be positive");
  if (!(r >= 0.0 && r <= 1.0)) throw DomainError("m_uniform_closed_form: r must be in [0,1]");
  const double z = a * (1.0 - r);
  if (z >= 1.0) throw DomainError("m_uniform_closed_form: requires a(1-r) < 1");
  if (r == 1.0) return 0.5 * a;  // limit of the closed form
  if (z < 0.25) return r * a * h_of(z);
  const double s = 1.0 - r;
  return -r / s - (1.0 / a) * (r / (s * s)) * std::log1p(-z);
}

ExtReal m_uniform(double a, double r) {
  if (a * (1.0 - r) >= 1.0) return ExtReal::pos_inf();
  return ExtReal::finite(m_uniform_closed_form(a, r));
}

double g_function(double a, double x, int order) {
  if (!(a > 1.0)) throw DomainError("g_function: a must exceed 1");
  if (!(x > a)) throw DomainError("g_function: x must exceed a");
  const double q = a / x;
  switch (order) {
    case 0:
      if (q < 0.25) return (1.0 - 1.0 / x) * a * h_of(q);  // cancellation-free for large x
      return 1.0 - x + (1.0 / a) * (x - x * x) * std::log1p(-q);
    case 1:
      return -1.0 - (x - 1.0) / (x - a) - (1.0 / a) * (2.0 * x - 1.0) * std::log1p(-q);
    case 2:
      return -(a - 3.0 * a * x + 2.0 * x * x) / (x * (x - a) * (x - a)) -
             (2.0 / a) * std::log1p(-q);
    case 3: {
      const double xa = x - a;
      return -(a * a + a * x * (2.0 * a - 3.0)) / (x * x * xa * xa * xa);
    }
    default:
      throw DomainError("g_function: order must be 0..3");
  }
}

GShapeReport find_shape(double a) {
  if (!(a > 1.0 && a < 1.5)) throw DomainError("find_shape: requires 1 < a < 3/2");
  GShapeReport rep;
  rep.a = a;
  const double b = a / (3.0 - 2.0 * a);
  rep.b = b;

  auto g2 = [a](double x) { return g_function(a, x, 2); };
  auto g1 = [a](double x) { return g_function(a, x, 1); };

  // g'' falls from +infinity at a+ to its minimum at b; bracket its zero.
  double lo = 0.0;
  for (double frac = 1e-3; frac > 1e-14; frac *= 1e-2) {
    const double cand = a + frac * (b - a);
    if (cand > a && g2(cand) > 0.0) {
      lo = cand;
      break;
    }
  }
  if (lo == 0.0 || !(g2(b) < 0.0))
    throw BracketFailure("find_shape: could not bracket the zero of g''");
  RootOptions ropts;
  ropts.x_tol_rel = 1e-10;
  const double c = find_root(g2, lo, b, ropts);
  rep.c = c;

  // g' rises from -infinity at a+ to a positive value at c.
  lo = 0.0;
  for (double frac = 1e-3; frac > 1e-14; frac *= 1e-2) {
    const double cand = a + frac * (c - a);
    if (cand > a && g1(cand) < 0.0) {
      lo = cand;
      break;
    }
  }
  if (lo == 0.0 || !(g1(c) > 0.0))
    throw BracketFailure("find_shape: could not bracket the zero of g'");
  const double x_a = find_root(g1, lo, c, ropts);
  rep.x_a = x_a;
  rep.r_a = 1.0 - 1.0 / x_a;
  return rep;
}

double solve_r_c(double a) {
  if (!(a > 1.0 && a <= 2.0)) throw DomainError("solve_r_c: requires 1 < a <= 2");
  if (a == 2.0) return 1.0;

  const double boundary = 1.0 - 1.0 / a;
  auto f = [a](double r) { return m_uniform_closed_form(a, r) - 1.0; };

  double hi;
  if (a >= 1.5) {
    hi = 1.0;  // m(1) = a/2 < 1 and m is strictly decreasing
  } else {
    const auto shape = find_shape(a);
    hi = *shape.r_a;  // m attains its minimum here, and m(r_a) < 1
  }
  if (!(f(hi) < 0.0)) throw BracketFailure("solve_r_c: m at right bracket not below 1");

  double lo = 0.0;
  for (double delta = 1e-6 * (1.0 - boundary); delta > 4e-17; delta /= 256.0) {
    const double cand = boundary + delta;
    if (cand < hi && f(cand) > 0.0) {
      lo = cand;
      break;
    }
  }
  if (lo == 0.0) throw BracketFailure("solve_r_c: m > 1 not reachable near 1 - 1/a");

  RootOptions ropts;
  ropts.x_tol_rel = 1e-13;
  ropts.f_tol = 1e-12;
  return find_root(f, lo, hi, ropts);
}

PhaseVerdict classify_phase(const RateDistribution& dist, double r, const quad::Options& opts) {
  PhaseVerdict v;
  v.witness = evaluate_conditions(dist, r, opts);
  if (v.witness.condition_I_holds) {
    v.phase = Phase::SurvivesViaI;
  } else if (v.witness.condition_II_holds) {
    v.phase = Phase::SurvivesViaII;
  } else {
    v.phase = Phase::Extinct;
  }
  if (const auto* u = std::get_if<RateDistribution::Uniform>(&dist.kind())) {
    if (u->a > 1.0) {
      v.r_I_boundary = 1.0 - 1.0 / u->a;
      if (u->a <= 2.0) v.r_c = solve_r_c(u->a);
    }
  }
  return v;
}

nlohmann::json verdict_to_json(const PhaseVerdict& v) {
  nlohmann::json j;
  j["phase"] = phase_name(v.phase);
  j["m"] = v.witness.m_of_r.is_finite() ? nlohmann::json(v.witness.m_of_r.value())
                                        : nlohmann::json(nullptr);
  if (v.r_c) j["r_c"] = *v.r_c;
  if (v.r_I_boundary) j["r_I_boundary"] = *v.r_I_boundary;
  return j;
}

}  // namespace qsim::theory
