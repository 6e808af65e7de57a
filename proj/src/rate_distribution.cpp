#include "qsim/rate_distribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qsim {

namespace {

constexpr double kMixtureWeightTol = 1e-12;
constexpr double kTabulatedMassTol = 1e-9;

}  // namespace

RateDistribution RateDistribution::uniform(double a) {
  if (!(std::isfinite(a) && a > 0.0)) throw DomainError("uniform: a must be positive");
  return RateDistribution(Kind{Uniform{a}});
}

RateDistribution RateDistribution::point_mass(double lambda0) {
  if (!(std::isfinite(lambda0) && lambda0 >= 0.0))
    throw DomainError("point_mass: rate must be nonnegative");
  return RateDistribution(Kind{PointMass{lambda0}});
}

RateDistribution RateDistribution::mixture(std::vector<std::pair<double, RateDistribution>> components) {
  if (components.empty()) throw DomainError("mixture: no components");
  double wsum = 0.0;
  for (const auto& [w, d] : components) {
    if (!(std::isfinite(w) && w > 0.0)) throw DomainError("mixture: weights must be positive");
    wsum += w;
  }
  if (std::fabs(wsum - 1.0) > kMixtureWeightTol)
    throw DomainError("mixture: weights must sum to 1 within 1e-12");
  Mixture mix;
  mix.components.reserve(components.size());
  for (auto& [w, d] : components)
    mix.components.push_back({w / wsum, std::make_shared<const RateDistribution>(std::move(d))});
  return RateDistribution(Kind{std::move(mix)});
}

RateDistribution RateDistribution::tabulated(std::vector<double> grid, std::vector<double> density) {
  if (grid.size() < 2 || grid.size() != density.size())
    throw DomainError("tabulated: need matching grid/density with >= 2 points");
  if (!(grid.front() >= 0.0)) throw DomainError("tabulated: support must lie in [0, inf)");
  for (std::size_t i = 0; i + 1 < grid.size(); ++i)
    if (!(grid[i] < grid[i + 1])) throw DomainError("tabulated: grid must be strictly increasing");
  double total = 0.0;
  for (std::size_t i = 0; i < density.size(); ++i) {
    if (!(std::isfinite(density[i]) && density[i] >= 0.0))
      throw DomainError("tabulated: density must be nonnegative");
    if (i + 1 < density.size())
      total += 0.5 * (density[i] + density[i + 1]) * (grid[i + 1] - grid[i]);
  }
  if (std::fabs(total - 1.0) > kTabulatedMassTol)
    throw DomainError("tabulated: density must integrate to 1 within 1e-9");
  for (double& d : density) d /= total;
  return RateDistribution(Kind{Tabulated{std::move(grid), std::move(density)}});
}

RateDistribution::RateDistribution(Kind kind) : kind_(std::move(kind)) {
  flatten(1.0, atoms_, pieces_);

  support_upper_ = 0.0;
  for (const auto& a : atoms_) support_upper_ = std::max(support_upper_, a.x);
  for (const auto& p : pieces_) support_upper_ = std::max(support_upper_, p.hi);
  absolutely_continuous_ = atoms_.empty();

  cum_.reserve(atoms_.size() + pieces_.size());
  double acc = 0.0;
  for (const auto& a : atoms_) cum_.push_back(acc += a.w);
  for (const auto& p : pieces_) cum_.push_back(acc += p.mass());
}

void RateDistribution::flatten(double weight, std::vector<Atom>& atoms,
                               std::vector<LinearPiece>& pieces) const {
  if (const auto* u = std::get_if<Uniform>(&kind_)) {
    const double d = weight / u->a;
    pieces.push_back({0.0, u->a, d, d});
  } else if (const auto* p = std::get_if<PointMass>(&kind_)) {
    atoms.push_back({p->lambda0, weight});
  } else if (const auto* m = std::get_if<Mixture>(&kind_)) {
    for (const auto& c : m->components) c.dist->flatten(weight * c.weight, atoms, pieces);
  } else {
    const auto& t = std::get<Tabulated>(kind_);
    for (std::size_t i = 0; i + 1 < t.grid.size(); ++i)
      pieces.push_back({t.grid[i], t.grid[i + 1], weight * t.density[i], weight * t.density[i + 1]});
  }
}

double RateDistribution::sample(RngStream& rng) const {
  const double u = rng.uniform01() * cum_.back();
  std::size_t i = std::lower_bound(cum_.begin(), cum_.end(), u) - cum_.begin();
  if (i >= cum_.size()) i = cum_.size() - 1;
  if (i < atoms_.size()) return atoms_[i].x;

  const auto& p = pieces_[i - atoms_.size()];
  const double lo_cum = i == 0 ? 0.0 : cum_[i - 1];
  const double mass = p.mass();
  const double v = mass > 0.0 ? std::clamp((u - lo_cum) / mass, 0.0, 1.0) : 0.0;
  // Invert the CDF of the linear density on [lo, hi].
  const double d0 = p.d_lo, d1 = p.d_hi;
  double t;
  if (std::fabs(d1 - d0) <= 1e-14 * (d0 + d1)) {
    t = v;
  } else {
    t = (-d0 + std::sqrt(d0 * d0 + (d1 * d1 - d0 * d0) * v)) / (d1 - d0);
  }
  return p.lo + t * (p.hi - p.lo);
}

double RateDistribution::mass_above(double threshold) const {
  double mass = 0.0;
  for (const auto& a : atoms_)
    if (a.x > threshold) mass += a.w;
  for (const auto& p : pieces_) {
    if (threshold < p.lo) {
      mass += p.mass();
    } else if (threshold < p.hi) {
      // Exact tail of the linear density segment.
      const double t = (threshold - p.lo) / (p.hi - p.lo);
      const double dt = p.d_lo + (p.d_hi - p.d_lo) * t;
      mass += 0.5 * (dt + p.d_hi) * (p.hi - threshold);
    }
  }
  return std::min(mass, 1.0);
}

double RateDistribution::mean() const {
  double m = 0.0;
  for (const auto& a : atoms_) m += a.w * a.x;
  for (const auto& p : pieces_) {
    const double L = p.hi - p.lo;
    m += L * (p.lo * 0.5 * (p.d_lo + p.d_hi) + L * (p.d_lo / 6.0 + p.d_hi / 3.0));
  }
  return m;
}

ExtReal RateDistribution::expect(const std::function<double(double)>& f, Interval region,
                                 const quad::Options& opts) const {
  if (!(region.lo <= region.hi)) throw DomainError("expect: malformed region");
  ExtReal total = ExtReal::finite(0.0);
  for (const auto& a : atoms_) {
    if (a.x < region.lo || a.x > region.hi) continue;
    const double fx = f(a.x);
    if (std::isnan(fx)) throw NonconvergentQuadrature("expect: integrand is NaN at an atom");
    if (std::isinf(fx)) {
      total += fx > 0 ? ExtReal::pos_inf() : ExtReal::neg_inf();
    } else {
      total += ExtReal::finite(a.w * fx);
    }
  }
  for (const auto& p : pieces_) {
    const double lo = std::max(p.lo, region.lo);
    const double hi = std::min(p.hi, region.hi);
    if (!(lo < hi)) continue;
    auto weighted = [&](double x) { return f(x) * p.density_at(x); };
    total += quad::integrate(weighted, lo, hi, opts);
  }
  return total;
}

RateDistribution RateDistribution::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind"))
    throw DomainError("distribution descriptor: expected object with \"kind\"");
  const std::string kind = j.at("kind").get<std::string>();
  try {
    if (kind == "uniform") return uniform(j.at("a").get<double>());
    if (kind == "point") return point_mass(j.at("lambda").get<double>());
    if (kind == "mixture") {
      std::vector<std::pair<double, RateDistribution>> comps;
      for (const auto& c : j.at("components"))
        comps.emplace_back(c.at("weight").get<double>(), from_json(c.at("dist")));
      return mixture(std::move(comps));
    }
    if (kind == "table")
      return tabulated(j.at("grid").get<std::vector<double>>(),
                       j.at("density").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("distribution descriptor: ") + e.what());
  }
  throw DomainError("distribution descriptor: unknown kind \"" + kind + "\"");
}

nlohmann::json RateDistribution::to_json() const {
  if (const auto* u = std::get_if<Uniform>(&kind_)) return {{"kind", "uniform"}, {"a", u->a}};
  if (const auto* p = std::get_if<PointMass>(&kind_))
    return {{"kind", "point"}, {"lambda", p->lambda0}};
  if (const auto* m = std::get_if<Mixture>(&kind_)) {
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : m->components)
      comps.push_back({{"weight", c.weight}, {"dist", c.dist->to_json()}});
    return {{"kind", "mixture"}, {"components", std::move(comps)}};
  }
  const auto& t = std::get<Tabulated>(kind_);
  return {{"kind", "table"}, {"grid", t.grid}, {"density", t.density}};
}

}  // namespace qsim
