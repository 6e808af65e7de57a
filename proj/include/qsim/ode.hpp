#pragma once

#include "qsim/errors.hpp"

namespace qsim::ode {

// Two-genome model: type 1 replicates at rate a1 and mutates to type 2 with
// probability r per replication; type 2 replicates at rate a2 and never
// mutates back.
//   v1' = a1 (1-r) v1
//   v2' = a1 r v1 + a2 v2
struct OdeParams {
  double a1 = 2.0;
  double a2 = 1.0;
  double r = 0.0;
  double v1_0 = 1.0;
  double v2_0 = 0.0;

  // The intended regime; a1 <= a2 is accepted but flagged by callers.
  bool fitness_ordered() const { return a1 > a2; }
};

struct State {
  double v1 = 0.0;
  double v2 = 0.0;
};

// Exact solution at time t, including the resonant case a1(1-r) = a2.
State solve_closed_form(const OdeParams& p, double t);

// Limit of v1/v2 as t -> infinity. Positive exactly when r < 1 - a2/a1
// (with the r = 0 ray reported as +infinity); the limit value for r > 0 is
// (a1(1-r) - a2) / (a1 r).
struct RatioLimit {
  bool positive = false;
  double value = 0.0;  // defined when positive; may be +infinity
};

RatioLimit ratio_limit(const OdeParams& p);

}  // namespace qsim::ode
