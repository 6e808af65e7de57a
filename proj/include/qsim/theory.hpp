#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "qsim/ext_real.hpp"
#include "qsim/rate_distribution.hpp"

namespace qsim::theory {

// Outcome of checking the two survival conditions at mutation probability r:
// (I) positive mass of rates with lambda*(1-r) > 1, and (II) mean genotype
// offspring m(r) > 1.
struct SurvivalConditions {
  double condition_I_mass = 0.0;
  ExtReal m_of_r;
  bool condition_I_holds = false;
  bool condition_II_holds = false;
};

enum class Phase { SurvivesViaI, SurvivesViaII, Extinct };

const char* phase_name(Phase p);

struct PhaseVerdict {
  Phase phase = Phase::Extinct;
  std::optional<double> r_c;           // critical mutation threshold, uniform 1 < a <= 2
  std::optional<double> r_I_boundary;  // 1 - 1/a, uniform a > 1
  SurvivalConditions witness;
};

// Shape analysis of g on (a, infinity) for 1 < a < 3/2: b = a/(3-2a), the
// unique zero c of g'' in (a, b), the minimizer x_a of g in (a, c), and the
// corresponding minimizer r_a = 1 - 1/x_a of m.
struct GShapeReport {
  double a = 0.0;
  std::optional<double> b;
  std::optional<double> c;
  std::optional<double> x_a;
  std::optional<double> r_a;
};

// Evaluates conditions (I) and (II) for an arbitrary rate distribution.
// m(r) is +infinity when (I) holds, otherwise the integral of
// lambda*r/(1 - lambda*(1-r)) over {lambda*(1-r) <= 1}.
SurvivalConditions evaluate_conditions(const RateDistribution& dist, double r,
                                       const quad::Options& opts = {});

// Closed form of m(r) for uniform mu on [0,a]:
//   -r/(1-r) - (1/a) * r/(1-r)^2 * ln(1 - a(1-r)),
// continued by its limit a/2 at r = 1. Requires a(1-r) < 1.
double m_uniform_closed_form(double a, double r);

// Piecewise m(r) for the uniform family: +infinity when a(1-r) >= 1
// (positive mass above 1/(1-r), or log-divergent integral at equality),
// otherwise the closed form.
ExtReal m_uniform(double a, double r);

// g(x) = 1 - x + (1/a)(x - x^2) ln(1 - a/x) on x > a, or its first, second,
// or third derivative. m(r) = g(1/(1-r)).
double g_function(double a, double x, int order);

// Unique root of m(r) = 1 in (1 - 1/a, 1) for 1 < a < 2; returns 1 for a = 2.
double solve_r_c(double a);

// Requires 1 < a < 3/2.
GShapeReport find_shape(double a);

// Phase classification per Theorem 1; for the uniform family also reports
// the two thresholds 1 - 1/a and r_c where they are defined.
PhaseVerdict classify_phase(const RateDistribution& dist, double r, const quad::Options& opts = {});

nlohmann::json verdict_to_json(const PhaseVerdict& v);

}  // namespace qsim::theory
