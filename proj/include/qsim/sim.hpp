#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "qsim/rate_distribution.hpp"
#include "qsim/rng.hpp"

namespace qsim::sim {

struct ModelParams {
  RateDistribution dist;
  double r = 0.0;  // mutation probability per birth
};

// Finite-horizon censoring of the infinite-time survival event.
struct SimCaps {
  double t_max = 200.0;
  std::uint64_t pop_max = 100000;
  std::uint64_t event_max = 100000000;
};

enum class CapReason { PopCap, TimeCap, EventCap };
const char* cap_reason_name(CapReason r);

struct Verdict {
  bool extinct = false;
  double extinct_at = 0.0;                  // meaningful when extinct
  CapReason cap_reason = CapReason::TimeCap;  // meaningful when censored
};

struct TrajectoryPoint {
  double t = 0.0;
  std::uint64_t population = 0;         // Z(t)
  std::uint64_t founder_count = 0;      // X_t, individuals of genotype 1
  std::uint64_t genotypes_created = 0;  // ledger size at time t
};

struct GenotypeRecord {
  std::uint64_t label = 0;  // 1, 2, 3, ... in order of first appearance
  double lambda = 0.0;
  std::uint64_t parent = 0;  // 0 for the founder
  double first_birth_time = 0.0;
};

struct SimOptions {
  bool record_trajectory = false;
  std::uint32_t trajectory_points = 64;  // sampled at k*t_max/points, k = 1..points
  bool keep_ledger = false;
};

struct SimOutcome {
  Verdict verdict;
  std::vector<TrajectoryPoint> trajectory;
  std::optional<double> founder_lineage_extinct_at;  // first time X_t = 0
  std::vector<GenotypeRecord> genotype_ledger;
  double final_time = 0.0;
  std::uint64_t final_population = 0;
  std::uint64_t events = 0;
  std::uint64_t genotypes_created = 0;
};

// Exact continuous-time simulation, aggregated by genotype: genotype g with
// n_g individuals carries event weight n_g * (lambda_g + 1); waiting times
// are exponential in the total weight. Event selection scans cached
// per-block weight sums that are rebuilt when the genotype set drifts.
class Engine {
 public:
  Engine(const ModelParams& params, const SimCaps& caps, RngStream rng, SimOptions opts = {});

  bool running() const { return running_; }
  bool step();  // one event; returns false once the run has stopped
  SimOutcome run();

  // State inspection (used heavily by tests).
  double clock() const { return clock_; }
  std::uint64_t population() const { return population_; }
  double total_event_rate() const { return total_rate_; }
  double recompute_total_rate() const;
  std::uint64_t founder_count() const { return founder_alive_; }
  std::uint64_t genotypes_created() const { return genotypes_created_; }
  std::uint64_t active_genotype_count() const { return active_.size(); }

  SimOutcome outcome() const;

 private:
  struct Active {
    std::uint64_t label;
    double lambda;
    std::uint64_t count;
    double weight;  // count * (lambda + 1)
  };
  static constexpr std::size_t kBlock = 64;

  void add_genotype(double lambda, std::uint64_t parent, double time);
  void set_count(std::size_t idx, std::uint64_t count);
  void remove_active(std::size_t idx);
  void rebuild_blocks();
  void refresh_block(std::size_t b);
  void maybe_rebuild();
  std::size_t select_genotype(double u) const;
  void record_samples_up_to(double t);
  void fill_remaining_samples_extinct();
  void stop_extinct();
  void stop_censored(CapReason reason);

  const ModelParams& params_;
  SimCaps caps_;
  SimOptions opts_;
  RngStream rng_;

  std::vector<Active> active_;
  std::vector<double> block_sums_;
  double total_rate_ = 0.0;
  std::size_t last_rebuild_size_ = 1;

  double clock_ = 0.0;
  std::uint64_t population_ = 0;
  std::uint64_t founder_alive_ = 0;
  std::uint64_t genotypes_created_ = 0;
  std::uint64_t events_ = 0;

  std::vector<GenotypeRecord> ledger_;
  std::vector<TrajectoryPoint> trajectory_;
  std::uint32_t next_sample_ = 0;
  std::optional<double> founder_extinct_at_;

  bool running_ = true;
  Verdict verdict_;
};

// Per-individual oracle engine: every individual is a separate record with
// its own clocks. Same contract and law as Engine; used as a distributional
// reference in tests. Practical only for small caps.
class ReferenceEngine {
 public:
  ReferenceEngine(const ModelParams& params, const SimCaps& caps, RngStream rng, SimOptions opts = {});

  bool running() const { return running_; }
  bool step();
  SimOutcome run();

  double clock() const { return clock_; }
  std::uint64_t population() const { return individuals_.size(); }
  std::uint64_t founder_count() const { return founder_alive_; }

  SimOutcome outcome() const;

 private:
  struct Individual {
    std::uint64_t genotype;
    double lambda;
  };

  void record_samples_up_to(double t);
  void stop_extinct();
  void stop_censored(CapReason reason);

  const ModelParams& params_;
  SimCaps caps_;
  SimOptions opts_;
  RngStream rng_;

  std::vector<Individual> individuals_;
  double total_rate_ = 0.0;
  double clock_ = 0.0;
  std::uint64_t founder_alive_ = 0;
  std::uint64_t genotypes_created_ = 0;
  std::uint64_t events_ = 0;

  std::vector<GenotypeRecord> ledger_;
  std::vector<TrajectoryPoint> trajectory_;
  std::uint32_t next_sample_ = 0;
  std::optional<double> founder_extinct_at_;

  bool running_ = true;
  Verdict verdict_;
};

// Runs one replicate on the stream substream(seed, 0).
SimOutcome simulate(const ModelParams& params, const SimCaps& caps, std::uint64_t seed,
                    const SimOptions& opts = {});
SimOutcome simulate_reference(const ModelParams& params, const SimCaps& caps, std::uint64_t seed,
                              const SimOptions& opts = {});

struct ReplicateSummary {
  std::uint64_t replicate = 0;
  bool survived = false;  // censored with a live population
  CapReason cap_reason = CapReason::TimeCap;
  double final_time = 0.0;
  std::uint64_t final_population = 0;
  std::uint64_t genotypes_created = 0;
};

struct BatchStats {
  std::uint64_t n = 0;
  std::uint64_t survived = 0;
  double survival_frac = 0.0;
  double wilson_lo = 0.0;  // 95% Wilson interval for the survival frequency
  double wilson_hi = 0.0;
  std::uint64_t extinct = 0;
  double mean_extinction_time = 0.0;                // over extinct replicates
  std::array<std::uint64_t, 3> cap_counts{0, 0, 0};  // indexed by CapReason
};

struct BatchResult {
  std::vector<ReplicateSummary> rows;
  BatchStats stats;
};

// n_replicates independent runs; replicate i uses substream(base_seed, i),
// so results do not depend on the worker count (0 workers = auto).
BatchResult simulate_batch(const ModelParams& params, const SimCaps& caps,
                           std::uint64_t n_replicates, std::uint64_t base_seed,
                           unsigned n_workers = 0);

}  // namespace qsim::sim
