#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "qsim/ext_real.hpp"
#include "qsim/quadrature.hpp"
#include "qsim/rng.hpp"

namespace qsim {

// Closed interval of rates; hi may be +infinity.
struct Interval {
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
};

// The birth-rate law mu: i.i.d. sampling, exact tail masses, and expectations
// of arbitrary integrands against mu. Immutable after construction and safe
// to share across threads.
class RateDistribution {
 public:
  struct Uniform {
    double a;  // uniform on [0, a]
  };
  struct PointMass {
    double lambda0;
  };
  struct Component {
    double weight;
    std::shared_ptr<const RateDistribution> dist;
  };
  struct Mixture {
    std::vector<Component> components;
  };
  struct Tabulated {
    std::vector<double> grid;     // strictly increasing, nonnegative
    std::vector<double> density;  // piecewise-linear density on the grid
  };
  using Kind = std::variant<Uniform, PointMass, Mixture, Tabulated>;

  static RateDistribution uniform(double a);
  static RateDistribution point_mass(double lambda0);
  static RateDistribution mixture(std::vector<std::pair<double, RateDistribution>> components);
  static RateDistribution tabulated(std::vector<double> grid, std::vector<double> density);

  // JSON descriptors: {"kind":"uniform","a":1.5}, {"kind":"point","lambda":2.0},
  // {"kind":"mixture","components":[{"weight":w,"dist":{...}},...]},
  // {"kind":"table","grid":[...],"density":[...]}.
  static RateDistribution from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  const Kind& kind() const { return kind_; }
  double support_upper() const { return support_upper_; }
  bool is_absolutely_continuous() const { return absolutely_continuous_; }

  // One draw lambda ~ mu; repeated calls on one stream are i.i.d.
  double sample(RngStream& rng) const;

  // mu((threshold, infinity)), exact for every kind.
  double mass_above(double threshold) const;

  // Mean of mu, in closed form (atoms plus linear density segments).
  double mean() const;

  // Integral of f over `region` against mu. Atoms are evaluated exactly;
  // continuous parts go through adaptive quadrature with endpoint-singularity
  // handling, so a divergent integral comes back as an infinity.
  ExtReal expect(const std::function<double(double)>& f, Interval region,
                 const quad::Options& opts = {}) const;

 private:
  struct Atom {
    double x, w;
  };
  // Weight-scaled linear density segment: w(x) interpolates d_lo..d_hi.
  struct LinearPiece {
    double lo, hi, d_lo, d_hi;
    double density_at(double x) const {
      const double t = (x - lo) / (hi - lo);
      return d_lo + (d_hi - d_lo) * t;
    }
    double mass() const { return 0.5 * (d_lo + d_hi) * (hi - lo); }
  };

  explicit RateDistribution(Kind kind);

  void flatten(double weight, std::vector<Atom>& atoms, std::vector<LinearPiece>& pieces) const;

  Kind kind_;
  double support_upper_ = 0.0;
  bool absolutely_continuous_ = true;

  // Precomputed decomposition into atoms and linear density segments, plus
  // cumulative piece masses for sampling.
  std::vector<Atom> atoms_;
  std::vector<LinearPiece> pieces_;
  std::vector<double> cum_;  // cumulative masses: atoms first, then pieces
};

}  // namespace qsim
