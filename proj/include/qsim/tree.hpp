#pragma once

#include <cstdint>
#include <vector>

#include "qsim/rng.hpp"
#include "qsim/sim.hpp"

namespace qsim::tree {

// One draw of Y_infinity: the number of distinct mutant genotypes ever
// produced by a single genotype's lineage. Truncated marks a draw whose
// count exceeded the cap, the operational stand-in for {Y_infinity = inf}.
struct YDraw {
  std::uint64_t count = 0;
  bool truncated = false;
};

// Simulates the lineage's embedded jump chain: each event is a same-type
// birth, a mutant birth, or a death with probabilities lambda(1-r), lambda*r,
// and 1 over lambda+1.
YDraw sample_Y_infinity(double lambda, double r, std::uint64_t cap, RngStream& rng);

// Sampled genotype tree: root label 1, each node's offspring count drawn as
// Y_infinity at that node's own birth rate.
struct GenotypeTreeSample {
  struct Node {
    std::uint64_t label = 0;
    double lambda = 0.0;
    std::uint64_t parent = 0;  // 0 for the root
  };
  std::vector<Node> nodes;
  std::vector<std::uint64_t> offspring_counts;  // per processed node
  bool truncated = false;  // hit node_cap: ruled infinite for this sample
};

GenotypeTreeSample sample_tree(const sim::ModelParams& params, std::uint64_t node_cap,
                               RngStream& rng);

// Monte Carlo estimate of m(r) = E(Y_infinity) with root rates lambda ~ mu.
struct MEstimate {
  double mean = 0.0;
  double se = 0.0;
  std::uint64_t n = 0;
  std::uint64_t truncated = 0;

  bool infinite_mean_suspected() const { return truncated > 0; }
};

MEstimate estimate_m(const sim::ModelParams& params, std::uint64_t n_samples, std::uint64_t cap,
                     RngStream& rng);

}  // namespace qsim::tree
