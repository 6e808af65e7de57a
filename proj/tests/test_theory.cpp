#include <doctest.h>

#include <cmath>
#include <vector>

#include "qsim/theory.hpp"

using namespace qsim;
using namespace qsim::theory;

namespace {

double m_quadrature(double a, double r) {
  auto sc = evaluate_conditions(RateDistribution::uniform(a), r);
  return sc.m_of_r.value();
}

}  // namespace

TEST_CASE("evaluate_conditions: extreme mutation probabilities") {
  // r = 0: condition II never holds; condition I iff mass above 1.
  for (const auto& d : {RateDistribution::uniform(0.9), RateDistribution::uniform(3.0),
                        RateDistribution::point_mass(1.5)}) {
    auto sc = evaluate_conditions(d, 0.0);
    CHECK_FALSE(sc.condition_II_holds);
    CHECK(sc.condition_I_holds == (d.mass_above(1.0) > 0.0));
  }

  // r = 1: condition I cannot hold; m is the mean of the distribution.
  auto sc3 = evaluate_conditions(RateDistribution::uniform(3.0), 1.0);
  CHECK_FALSE(sc3.condition_I_holds);
  CHECK(sc3.m_of_r.value() == doctest::Approx(1.5).epsilon(1e-10));
  CHECK(sc3.condition_II_holds);

  auto sc1 = evaluate_conditions(RateDistribution::uniform(1.0), 1.0);
  CHECK_FALSE(sc1.condition_I_holds);
  CHECK(sc1.m_of_r.value() == doctest::Approx(0.5).epsilon(1e-10));
  CHECK_FALSE(sc1.condition_II_holds);

  // mean at r = 1 for a mixture with an atom
  std::vector<std::pair<double, RateDistribution>> comps;
  comps.emplace_back(0.5, RateDistribution::point_mass(2.0));
  comps.emplace_back(0.5, RateDistribution::uniform(1.0));
  auto scm = evaluate_conditions(RateDistribution::mixture(std::move(comps)), 1.0);
  CHECK(scm.m_of_r.value() == doctest::Approx(0.5 * 2.0 + 0.5 * 0.5).epsilon(1e-10));
}

TEST_CASE("m closed form: pinned values and domain") {
  CHECK(m_uniform_closed_form(2.0, 1.0) == 1.0);
  CHECK(m_uniform_closed_form(1.0, 1.0) == 0.5);
  CHECK_THROWS_AS(m_uniform_closed_form(2.0, 0.2), DomainError);  // a(1-r) = 1.6 >= 1
  CHECK_THROWS_AS(m_uniform_closed_form(1.5, 1.0 - 1.0 / 1.5), DomainError);

  // closed form vs direct quadrature of the integral form
  const double got = m_uniform_closed_form(1.5, 0.8);
  CHECK(std::fabs(m_quadrature(1.5, 0.8) - got) / got < 1e-8);
}

TEST_CASE("piecewise consistency on an r-grid") {
  for (double a : {1.3, 1.8}) {
    const double lo = 1.0 - 1.0 / a;
    for (int k = 1; k <= 12; ++k) {
      const double r = lo + (1.0 - lo) * k / 13.0;
      const double mc = m_uniform_closed_form(a, r);
      CHECK(std::fabs(m_quadrature(a, r) - mc) / mc < 1e-8);
    }
  }
}

TEST_CASE("g: relation to m and finite differences") {
  // g(1/(1-r)) = m(r)
  {
    const double a = 1.8, r = 0.6;
    const double lhs = g_function(a, 1.0 / (1.0 - r), 0);
    const double rhs = m_uniform_closed_form(a, r);
    CHECK(std::fabs(lhs - rhs) / rhs < 1e-12);
  }

  // central differences of g and g' (step 1e-5 * x0)
  for (double a : {1.1, 1.5, 2.0, 3.0}) {
    for (double mult : {1.1, 1.5, 3.0, 10.0}) {
      const double x0 = a * mult;
      const double h = 1e-5 * x0;
      const double d1 = (g_function(a, x0 + h, 0) - g_function(a, x0 - h, 0)) / (2.0 * h);
      CHECK(std::fabs(d1 - g_function(a, x0, 1)) / std::fabs(g_function(a, x0, 1)) < 1e-6);
      const double d2 = (g_function(a, x0 + h, 1) - g_function(a, x0 - h, 1)) / (2.0 * h);
      CHECK(std::fabs(d2 - g_function(a, x0, 2)) / std::fabs(g_function(a, x0, 2)) < 1e-6);
      const double d3 = (g_function(a, x0 + h, 2) - g_function(a, x0 - h, 2)) / (2.0 * h);
      CHECK(std::fabs(d3 - g_function(a, x0, 3)) / std::fabs(g_function(a, x0, 3)) < 1e-5);
    }
  }

  CHECK_THROWS_AS(g_function(1.2, 1.2, 0), DomainError);
  CHECK_THROWS_AS(g_function(0.9, 2.0, 0), DomainError);
}

TEST_CASE("g''' vanishes at b = a/(3-2a) and changes sign there") {
  const double a = 1.2;
  const double b = a / (3.0 - 2.0 * a);
  CHECK(b == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(std::fabs(g_function(a, b, 3)) < 1e-12);
  for (double x = a + 0.05; x < b; x += 0.1) CHECK(g_function(a, x, 3) < 0.0);
  for (double x = b * 1.05; x < 10.0 * b; x *= 1.4) CHECK(g_function(a, x, 3) > 0.0);
  // a >= 3/2: g''' < 0 on (a, 100a)
  for (double aa : {1.5, 2.0}) {
    for (double x = aa * 1.01; x < 100.0 * aa; x *= 1.6) CHECK(g_function(aa, x, 3) < 0.0);
  }
}

TEST_CASE("P1: m blows up logarithmically at the left end, m(1) = a/2") {
  for (double a : {1.1, 1.5, 2.0}) {
    CHECK(std::fabs(m_uniform_closed_form(a, 1.0) - 0.5 * a) <= 1e-12);
    const double b = 1.0 - 1.0 / a;
    // The divergence is logarithmic, so probe growth across many decades.
    double prev = 0.0;
    for (double eps = 1e-4; eps >= 1e-14; eps *= 1e-2) {
      const double m = m_uniform_closed_form(a, b + eps);
      CHECK(m > prev);
      prev = m;
    }
    CHECK(prev > 1.5 * m_uniform_closed_form(a, b + 1e-4));
  }
}

TEST_CASE("P2: m strictly decreasing for a >= 3/2") {
  for (double a : {1.5, 1.7, 2.0}) {
    const double lo = 1.0 - 1.0 / a;
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 1000; ++k) {
      const double r = lo + (1.0 - lo) * k / 1001.0;
      const double m = m_uniform_closed_form(a, r);
      CHECK(m < prev);
      prev = m;
    }
  }
}

TEST_CASE("P3: single interior minimum for 1 < a < 3/2") {
  for (double a : {1.1, 1.2, 1.4}) {
    const auto shape = find_shape(a);
    const double r_a = *shape.r_a;
    const double lo = 1.0 - 1.0 / a;
    // single sign change of consecutive differences across the grid
    int sign_changes = 0;
    double prev = m_uniform_closed_form(a, lo + (1.0 - lo) / 402.0);
    int prev_sign = 0;
    for (int k = 2; k <= 400; ++k) {
      const double r = lo + (1.0 - lo) * k / 402.0;
      const double m = m_uniform_closed_form(a, r);
      const int sign = m > prev ? 1 : -1;
      if (prev_sign != 0 && sign != prev_sign) ++sign_changes;
      prev_sign = sign;
      prev = m;
      // decreasing left of r_a, increasing right of it
      if (r < r_a - 1e-6) CHECK(sign == -1);
      if (r > r_a + (1.0 - lo) / 200.0) CHECK(sign == 1);
    }
    CHECK(sign_changes == 1);
  }
}

TEST_CASE("find_shape: ordering and optimality") {
  const auto rep = find_shape(1.2);
  CHECK(*rep.b == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(rep.a < *rep.x_a);
  CHECK(*rep.x_a < *rep.c);
  CHECK(*rep.c < *rep.b);
  CHECK(std::fabs(g_function(1.2, *rep.x_a, 1)) < 1e-8);

  // m(r_a) < 1 in the P3 regime (case iii)
  const auto rep14 = find_shape(1.4);
  CHECK(m_uniform_closed_form(1.4, *rep14.r_a) < 1.0);

  CHECK_THROWS_AS(find_shape(1.5), DomainError);
  CHECK_THROWS_AS(find_shape(1.0), DomainError);
}

TEST_CASE("solve_r_c: pinned and derived roots") {
  CHECK(solve_r_c(2.0) == 1.0);

  const double rc15 = solve_r_c(1.5);
  CHECK(rc15 > 1.0 / 3.0);
  CHECK(rc15 < 1.0);
  CHECK(std::fabs(m_uniform_closed_form(1.5, rc15) - 1.0) <= 1e-10);
  CHECK(m_uniform_closed_form(1.5, rc15 - 0.01) > 1.0);
  CHECK(m_uniform_closed_form(1.5, rc15 + 0.01) < 1.0);

  const double rc12 = solve_r_c(1.2);
  const auto shape = find_shape(1.2);
  CHECK(rc12 > 1.0 - 1.0 / 1.2);
  CHECK(rc12 < *shape.r_a);
  CHECK(std::fabs(m_uniform_closed_form(1.2, rc12) - 1.0) <= 1e-10);

  CHECK_THROWS_AS(solve_r_c(1.0), DomainError);
  CHECK_THROWS_AS(solve_r_c(2.5), DomainError);
}

TEST_CASE("classify_phase: corollary regimes") {
  auto verdict = [](double a, double r) { return classify_phase(RateDistribution::uniform(a), r); };

  CHECK(verdict(0.8, 0.0).phase == Phase::Extinct);
  CHECK(verdict(0.8, 0.5).phase == Phase::Extinct);
  CHECK(verdict(0.8, 1.0).phase == Phase::Extinct);

  CHECK(verdict(3.0, 0.99).phase != Phase::Extinct);
  CHECK(verdict(1.5, 0.2).phase == Phase::SurvivesViaI);  // 0.2 < 1 - 1/1.5
  CHECK(verdict(1.5, 0.4).phase == Phase::SurvivesViaII);

  const auto v = verdict(1.5, 0.4);
  CHECK(*v.r_I_boundary == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(*v.r_c == doctest::Approx(solve_r_c(1.5)).epsilon(1e-12));
  CHECK(v.witness.condition_I_mass == 0.0);

  // no thresholds reported outside their domains
  CHECK_FALSE(verdict(0.8, 0.5).r_c.has_value());
  CHECK_FALSE(verdict(0.8, 0.5).r_I_boundary.has_value());
  CHECK_FALSE(verdict(3.0, 0.5).r_c.has_value());
}

TEST_CASE("boundary a(1-r) = 1: log-divergent integral counts as condition II") {
  // a = 1.6 makes 1 - 1/a exactly representable.
  const double a = 1.6;
  const double r = 1.0 - 1.0 / a;
  const auto v = classify_phase(RateDistribution::uniform(a), r);
  CHECK(v.witness.condition_I_mass == 0.0);
  CHECK(v.witness.m_of_r.is_pos_inf());
  CHECK(v.phase == Phase::SurvivesViaII);
}

TEST_CASE("atom exactly at the singular point gives infinite m") {
  auto sc = evaluate_conditions(RateDistribution::point_mass(2.0), 0.5);
  CHECK(sc.condition_I_mass == 0.0);
  CHECK(sc.m_of_r.is_pos_inf());
  CHECK(sc.condition_II_holds);
}

TEST_CASE("classification is invariant under re-representing uniform as a mixture") {
  for (double r : {0.2, 0.4, 0.6, 0.999}) {
    const double a = 1.5;
    std::vector<std::pair<double, RateDistribution>> comps;
    comps.emplace_back(0.5, RateDistribution::uniform(a / 2.0));
    comps.emplace_back(0.5, RateDistribution::tabulated({a / 2.0, a}, {2.0 / a, 2.0 / a}));
    const auto mixed = RateDistribution::mixture(std::move(comps));

    const auto v1 = classify_phase(RateDistribution::uniform(a), r);
    const auto v2 = classify_phase(mixed, r);
    CHECK(v1.phase == v2.phase);
    if (v1.witness.m_of_r.is_finite()) {
      CHECK(std::fabs(v1.witness.m_of_r.value() - v2.witness.m_of_r.value()) /
                std::max(v1.witness.m_of_r.value(), 1e-12) <
            1e-8);
    } else {
      CHECK(v2.witness.m_of_r.is_pos_inf());
    }
  }
}

TEST_CASE("verdict serialization") {
  const auto v = classify_phase(RateDistribution::uniform(1.5), 0.4);
  const auto j = verdict_to_json(v);
  CHECK(j.at("phase") == "survives_via_II");
  CHECK(j.at("m").get<double>() == doctest::Approx(1.039).epsilon(1e-3));
  CHECK(j.contains("r_c"));
  CHECK(j.at("r_I_boundary").get<double>() == doctest::Approx(1.0 / 3.0));

  const auto vi = classify_phase(RateDistribution::uniform(1.5), 0.2);
  CHECK(verdict_to_json(vi).at("phase") == "survives_via_I");
  CHECK(verdict_to_json(vi).at("m").is_null());
}
