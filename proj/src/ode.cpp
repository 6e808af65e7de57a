#include "qsim/ode.hpp"

#include <cmath>
#include <limits>

namespace qsim::ode {

namespace {

void validate(const OdeParams& p) {
  if (!(p.a1 > 0.0 && p.a2 > 0.0)) throw DomainError("ode: replication rates must be positive");
  if (!(p.r >= 0.0 && p.r <= 1.0)) throw DomainError("ode: r must be in [0,1]");
  if (!(p.v1_0 >= 0.0 && p.v2_0 >= 0.0)) throw DomainError("ode: initial abundances must be nonnegative");
}

// phi1(z) = (e^z - 1)/z, the growth kernel that stays smooth through z = 0.
double phi1(double z) {
  if (z == 0.0) return 1.0;
  return std::expm1(z) / z;
}

}  // namespace

State solve_closed_form(const OdeParams& p, double t) {
  validate(p);
  if (!(t >= 0.0)) throw DomainError("ode: t must be nonnegative");
  const double k1 = p.a1 * (1.0 - p.r);
  State s;
  s.v1 = p.v1_0 * std::exp(k1 * t);
  // v2' - a2 v2 = a1 r v1:  v2 = v2_0 e^{a2 t} + a1 r v1_0 t e^{a2 t} phi1((k1-a2) t),
  // which reduces to the resonant t e^{a2 t} form as k1 -> a2.
  s.v2 = p.v2_0 * std::exp(p.a2 * t) +
         p.a1 * p.r * p.v1_0 * t * std::exp(p.a2 * t) * phi1((k1 - p.a2) * t);
  return s;
}

RatioLimit ratio_limit(const OdeParams& p) {
  validate(p);
  if (!(p.v1_0 > 0.0)) throw DomainError("ratio_limit: requires v1_0 > 0");
  const double k1 = p.a1 * (1.0 - p.r);
  RatioLimit out;
  if (p.r == 0.0) {
    // No inflow into type 2 from type 1: the ratio diverges when type 1
    // grows strictly faster (or v2 is absent), else settles or vanishes.
    if (p.v2_0 == 0.0 || p.a1 > p.a2) {
      out.positive = true;
      out.value = std::numeric_limits<double>::infinity();
    } else if (p.a1 == p.a2) {
      out.positive = true;
      out.value = p.v1_0 / p.v2_0;
    } else {
      out.positive = false;
    }
    return out;
  }
  if (k1 > p.a2) {
    out.positive = true;
    out.value = (k1 - p.a2) / (p.a1 * p.r);
  } else {
    // k1 == a2 decays like 1/t; k1 < a2 decays exponentially.
    out.positive = false;
  }
  return out;
}

}  // namespace qsim::ode
