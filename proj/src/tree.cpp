#include "qsim/tree.hpp"

#include <cmath>
#include <deque>

namespace qsim::tree {

YDraw sample_Y_infinity(double lambda, double r, std::uint64_t cap, RngStream& rng) {
  if (!(lambda >= 0.0)) throw DomainError("sample_Y_infinity: lambda must be nonnegative");
  if (!(r >= 0.0 && r <= 1.0)) throw DomainError("sample_Y_infinity: r must be in [0,1]");
  if (cap == 0) throw DomainError("sample_Y_infinity: cap must be positive");
  YDraw out;
  if (lambda == 0.0 || r == 0.0) return out;  // no births, or no mutants ever

  const double p_same = lambda * (1.0 - r) / (lambda + 1.0);
  const double p_any_birth = lambda / (lambda + 1.0);
  // Step cap guards the critical boundary lambda(1-r) = 1, where the lineage
  // dies a.s. but excursions have infinite expected length.
  const std::uint64_t step_cap = 200 * (cap + 64);

  std::uint64_t alive = 1;
  for (std::uint64_t steps = 0; alive > 0; ++steps) {
    if (steps >= step_cap) {
      out.truncated = true;
      return out;
    }
    const double u = rng.uniform01();
    if (u < p_same) {
      ++alive;
    } else if (u < p_any_birth) {
      if (++out.count > cap) {
        out.truncated = true;
        return out;
      }
    } else {
      --alive;
    }
  }
  return out;
}

GenotypeTreeSample sample_tree(const sim::ModelParams& params, std::uint64_t node_cap,
                               RngStream& rng) {
  if (node_cap == 0) throw DomainError("sample_tree: node_cap must be positive");
  GenotypeTreeSample tree;
  std::deque<std::size_t> queue;  // indices of nodes awaiting offspring draws

  tree.nodes.push_back({1, params.dist.sample(rng), 0});
  queue.push_back(0);

  while (!queue.empty()) {
    const std::size_t idx = queue.front();
    queue.pop_front();
    const double lambda = tree.nodes[idx].lambda;
    const std::uint64_t room = node_cap - tree.nodes.size() + 1;
    const YDraw y = sample_Y_infinity(lambda, params.r, room, rng);
    if (y.truncated) {
      tree.truncated = true;
      return tree;
    }
    tree.offspring_counts.push_back(y.count);
    for (std::uint64_t k = 0; k < y.count; ++k) {
      if (tree.nodes.size() >= node_cap) {
        tree.truncated = true;
        return tree;
      }
      const std::uint64_t label = tree.nodes.size() + 1;
      tree.nodes.push_back({label, params.dist.sample(rng), tree.nodes[idx].label});
      queue.push_back(tree.nodes.size() - 1);
    }
  }
  return tree;
}

MEstimate estimate_m(const sim::ModelParams& params, std::uint64_t n_samples, std::uint64_t cap,
                     RngStream& rng) {
  if (n_samples == 0) throw DomainError("estimate_m: need at least one sample");
  MEstimate est;
  est.n = n_samples;
  double sum = 0.0, sumsq = 0.0;
  for (std::uint64_t i = 0; i < n_samples; ++i) {
    const double lambda = params.dist.sample(rng);
    const YDraw y = sample_Y_infinity(lambda, params.r, cap, rng);
    if (y.truncated) {
      ++est.truncated;
      continue;
    }
    const double v = static_cast<double>(y.count);
    sum += v;
    sumsq += v * v;
  }
  const double n_ok = static_cast<double>(n_samples - est.truncated);
  if (n_ok > 0) {
    est.mean = sum / n_ok;
    if (n_ok > 1) {
      const double var = (sumsq - n_ok * est.mean * est.mean) / (n_ok - 1.0);
      est.se = std::sqrt(std::max(var, 0.0) / n_ok);
    }
  }
  return est;
}

}  // namespace qsim::tree
