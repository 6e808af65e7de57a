#include "qsim/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace qsim::sim {

const char* cap_reason_name(CapReason r) {
  switch (r) {
    case CapReason::PopCap: return "pop_cap";
    case CapReason::TimeCap: return "time_cap";
    default: return "event_cap";
  }
}

// ---------------------------------------------------------------- Engine --

Engine::Engine(const ModelParams& params, const SimCaps& caps, RngStream rng, SimOptions opts)
    : params_(params), caps_(caps), opts_(opts), rng_(rng) {
  if (!(params.r >= 0.0 && params.r <= 1.0)) throw DomainError("sim: r must be in [0,1]");
  if (!(caps.t_max > 0.0 && caps.pop_max > 0 && caps.event_max > 0))
    throw DomainError("sim: caps must be positive");
  const double lambda0 = params_.dist.sample(rng_);
  add_genotype(lambda0, 0, 0.0);
  population_ = 1;
  founder_alive_ = 1;
  if (opts_.record_trajectory && opts_.trajectory_points > 0)
    trajectory_.reserve(opts_.trajectory_points);
}

void Engine::add_genotype(double lambda, std::uint64_t parent, double time) {
  const std::uint64_t label = ++genotypes_created_;
  const double w = lambda + 1.0;
  active_.push_back({label, lambda, 1, w});
  const std::size_t b = (active_.size() - 1) / kBlock;
  if (b == block_sums_.size()) block_sums_.push_back(0.0);
  block_sums_[b] += w;
  total_rate_ += w;
  if (opts_.keep_ledger) ledger_.push_back({label, lambda, parent, time});
  maybe_rebuild();
}

void Engine::set_count(std::size_t idx, std::uint64_t count) {
  Active& g = active_[idx];
  const double w = static_cast<double>(count) * (g.lambda + 1.0);
  const double delta = w - g.weight;
  g.count = count;
  g.weight = w;
  block_sums_[idx / kBlock] += delta;
  total_rate_ += delta;
  if (g.label == 1) founder_alive_ = count;
}

void Engine::remove_active(std::size_t idx) {
  // Only zero-weight entries are removed; swap with the tail and refresh the
  // two touched blocks.
  const std::size_t last = active_.size() - 1;
  if (idx != last) std::swap(active_[idx], active_[last]);
  active_.pop_back();
  if (active_.size() % kBlock == 0 && block_sums_.size() > active_.size() / kBlock)
    block_sums_.pop_back();
  if (idx / kBlock < block_sums_.size()) refresh_block(idx / kBlock);
  if (last / kBlock < block_sums_.size() && last / kBlock != idx / kBlock)
    refresh_block(last / kBlock);
  maybe_rebuild();
}

void Engine::refresh_block(std::size_t b) {
  const std::size_t lo = b * kBlock;
  const std::size_t hi = std::min(active_.size(), lo + kBlock);
  double s = 0.0;
  for (std::size_t i = lo; i < hi; ++i) s += active_[i].weight;
  block_sums_[b] = s;
}

void Engine::rebuild_blocks() {
  block_sums_.assign((active_.size() + kBlock - 1) / kBlock, 0.0);
  double total = 0.0;
  for (std::size_t b = 0; b < block_sums_.size(); ++b) {
    refresh_block(b);
    total += block_sums_[b];
  }
  total_rate_ = total;
  last_rebuild_size_ = std::max<std::size_t>(active_.size(), 1);
}

void Engine::maybe_rebuild() {
  const std::size_t n = active_.size();
  const std::size_t base = last_rebuild_size_;
  if (n > base + base / 4 || n + base / 4 < base) rebuild_blocks();
}

double Engine::recompute_total_rate() const {
  double s = 0.0;
  for (const auto& g : active_) s += g.weight;
  return s;
}

std::size_t Engine::select_genotype(double u) const {
  double acc = 0.0;
  std::size_t b = 0;
  while (b + 1 < block_sums_.size() && acc + block_sums_[b] <= u) acc += block_sums_[b++];
  std::size_t i = b * kBlock;
  const std::size_t hi = std::min(active_.size(), i + kBlock);
  while (i + 1 < hi && acc + active_[i].weight <= u) acc += active_[i++].weight;
  return i;
}

void Engine::record_samples_up_to(double t) {
  if (!opts_.record_trajectory) return;
  const std::uint32_t n = opts_.trajectory_points;
  while (next_sample_ < n) {
    const double st = caps_.t_max * static_cast<double>(next_sample_ + 1) / n;
    if (st > t) break;
    trajectory_.push_back({st, population_, founder_alive_, genotypes_created_});
    ++next_sample_;
  }
}

void Engine::fill_remaining_samples_extinct() {
  if (!opts_.record_trajectory) return;
  const std::uint32_t n = opts_.trajectory_points;
  while (next_sample_ < n) {
    const double st = caps_.t_max * static_cast<double>(next_sample_ + 1) / n;
    trajectory_.push_back({st, 0, 0, genotypes_created_});
    ++next_sample_;
  }
}

void Engine::stop_extinct() {
  running_ = false;
  verdict_.extinct = true;
  verdict_.extinct_at = clock_;
  fill_remaining_samples_extinct();
}

void Engine::stop_censored(CapReason reason) {
  running_ = false;
  verdict_.extinct = false;
  verdict_.cap_reason = reason;
}

bool Engine::step() {
  if (!running_) return false;
  ++events_;
  if (events_ % 8192 == 0) rebuild_blocks();  // clamp incremental FP drift

  const double dt = rng_.exponential(total_rate_);
  const double new_clock = clock_ + dt;
  record_samples_up_to(std::min(new_clock, caps_.t_max));
  if (new_clock >= caps_.t_max) {
    clock_ = caps_.t_max;
    stop_censored(CapReason::TimeCap);
    return false;
  }
  clock_ = new_clock;

  const std::size_t idx = select_genotype(rng_.uniform01() * total_rate_);
  Active& g = active_[idx];
  const bool birth = rng_.uniform01() < g.lambda / (g.lambda + 1.0);
  if (birth) {
    bool mutate;
    if (params_.r <= 0.0) {
      mutate = false;
    } else if (params_.r >= 1.0) {
      mutate = true;
    } else {
      mutate = rng_.uniform01() < params_.r;
    }
    if (mutate) {
      const double lambda = params_.dist.sample(rng_);
      add_genotype(lambda, g.label, clock_);
    } else {
      set_count(idx, g.count + 1);
    }
    ++population_;
    if (population_ >= caps_.pop_max) {
      stop_censored(CapReason::PopCap);
      return false;
    }
  } else {
    set_count(idx, g.count - 1);
    --population_;
    if (g.count == 0) {
      if (g.label == 1 && !founder_extinct_at_) founder_extinct_at_ = clock_;
      remove_active(idx);
    }
    if (population_ == 0) {
      stop_extinct();
      return false;
    }
  }
  if (events_ >= caps_.event_max) {
    stop_censored(CapReason::EventCap);
    return false;
  }
  return true;
}

SimOutcome Engine::outcome() const {
  SimOutcome out;
  out.verdict = verdict_;
  out.trajectory = trajectory_;
  out.founder_lineage_extinct_at = founder_extinct_at_;
  out.genotype_ledger = ledger_;
  out.final_time = clock_;
  out.final_population = population_;
  out.events = events_;
  out.genotypes_created = genotypes_created_;
  return out;
}

SimOutcome Engine::run() {
  while (step()) {
  }
  return outcome();
}

// ------------------------------------------------------- ReferenceEngine --

ReferenceEngine::ReferenceEngine(const ModelParams& params, const SimCaps& caps, RngStream rng,
                                 SimOptions opts)
    : params_(params), caps_(caps), opts_(opts), rng_(rng) {
  if (!(params.r >= 0.0 && params.r <= 1.0)) throw DomainError("sim: r must be in [0,1]");
  const double lambda0 = params_.dist.sample(rng_);
  genotypes_created_ = 1;
  individuals_.push_back({1, lambda0});
  total_rate_ = lambda0 + 1.0;
  founder_alive_ = 1;
  if (opts_.keep_ledger) ledger_.push_back({1, lambda0, 0, 0.0});
}

void ReferenceEngine::record_samples_up_to(double t) {
  if (!opts_.record_trajectory) return;
  const std::uint32_t n = opts_.trajectory_points;
  while (next_sample_ < n) {
    const double st = caps_.t_max * static_cast<double>(next_sample_ + 1) / n;
    if (st > t) break;
    trajectory_.push_back({st, individuals_.size(), founder_alive_, genotypes_created_});
    ++next_sample_;
  }
}

void ReferenceEngine::stop_extinct() {
  running_ = false;
  verdict_.extinct = true;
  verdict_.extinct_at = clock_;
  if (opts_.record_trajectory) {
    while (next_sample_ < opts_.trajectory_points) {
      const double st =
          caps_.t_max * static_cast<double>(next_sample_ + 1) / opts_.trajectory_points;
      trajectory_.push_back({st, 0, 0, genotypes_created_});
      ++next_sample_;
    }
  }
}

void ReferenceEngine::stop_censored(CapReason reason) {
  running_ = false;
  verdict_.extinct = false;
  verdict_.cap_reason = reason;
}

bool ReferenceEngine::step() {
  if (!running_) return false;
  ++events_;
  if (events_ % 1024 == 0) {
    double s = 0.0;
    for (const auto& ind : individuals_) s += ind.lambda + 1.0;
    total_rate_ = s;
  }

  const double dt = rng_.exponential(total_rate_);
  const double new_clock = clock_ + dt;
  record_samples_up_to(std::min(new_clock, caps_.t_max));
  if (new_clock >= caps_.t_max) {
    clock_ = caps_.t_max;
    stop_censored(CapReason::TimeCap);
    return false;
  }
  clock_ = new_clock;

  // Select an individual proportionally to lambda_i + 1.
  const double u = rng_.uniform01() * total_rate_;
  double acc = 0.0;
  std::size_t idx = 0;
  while (idx + 1 < individuals_.size() && acc + individuals_[idx].lambda + 1.0 <= u)
    acc += individuals_[idx++].lambda + 1.0;
  // Copy out: push_back below may reallocate the vector.
  const Individual ind = individuals_[idx];

  const bool birth = rng_.uniform01() < ind.lambda / (ind.lambda + 1.0);
  if (birth) {
    bool mutate;
    if (params_.r <= 0.0) {
      mutate = false;
    } else if (params_.r >= 1.0) {
      mutate = true;
    } else {
      mutate = rng_.uniform01() < params_.r;
    }
    if (mutate) {
      const double lambda = params_.dist.sample(rng_);
      const std::uint64_t label = ++genotypes_created_;
      individuals_.push_back({label, lambda});
      total_rate_ += lambda + 1.0;
      if (opts_.keep_ledger) ledger_.push_back({label, lambda, ind.genotype, clock_});
    } else {
      individuals_.push_back({ind.genotype, ind.lambda});
      total_rate_ += ind.lambda + 1.0;
      if (ind.genotype == 1) ++founder_alive_;
    }
    if (individuals_.size() >= caps_.pop_max) {
      stop_censored(CapReason::PopCap);
      return false;
    }
  } else {
    total_rate_ -= ind.lambda + 1.0;
    if (ind.genotype == 1) {
      if (--founder_alive_ == 0 && !founder_extinct_at_) founder_extinct_at_ = clock_;
    }
    individuals_[idx] = individuals_.back();
    individuals_.pop_back();
    if (individuals_.empty()) {
      stop_extinct();
      return false;
    }
  }
  if (events_ >= caps_.event_max) {
    stop_censored(CapReason::EventCap);
    return false;
  }
  return true;
}

SimOutcome ReferenceEngine::outcome() const {
  SimOutcome out;
  out.verdict = verdict_;
  out.trajectory = trajectory_;
  out.founder_lineage_extinct_at = founder_extinct_at_;
  out.genotype_ledger = ledger_;
  out.final_time = clock_;
  out.final_population = individuals_.size();
  out.events = events_;
  out.genotypes_created = genotypes_created_;
  return out;
}

SimOutcome ReferenceEngine::run() {
  while (step()) {
  }
  return outcome();
}

// ------------------------------------------------------------------ batch --

SimOutcome simulate(const ModelParams& params, const SimCaps& caps, std::uint64_t seed,
                    const SimOptions& opts) {
  Engine eng(params, caps, RngStream::substream(seed, 0), opts);
  return eng.run();
}

SimOutcome simulate_reference(const ModelParams& params, const SimCaps& caps, std::uint64_t seed,
                              const SimOptions& opts) {
  ReferenceEngine eng(params, caps, RngStream::substream(seed, 0), opts);
  return eng.run();
}

BatchResult simulate_batch(const ModelParams& params, const SimCaps& caps,
                           std::uint64_t n_replicates, std::uint64_t base_seed,
                           unsigned n_workers) {
  if (n_replicates == 0) throw DomainError("simulate_batch: need at least one replicate");
  BatchResult res;
  res.rows.resize(n_replicates);

  unsigned workers = n_workers != 0 ? n_workers : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(
      std::min<std::uint64_t>(workers, n_replicates));

  std::atomic<std::uint64_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::uint64_t i = next.fetch_add(1);
      if (i >= n_replicates) return;
      Engine eng(params, caps, RngStream::substream(base_seed, i), SimOptions{});
      const SimOutcome out = eng.run();
      ReplicateSummary& row = res.rows[i];
      row.replicate = i;
      row.survived = !out.verdict.extinct;
      row.cap_reason = out.verdict.cap_reason;
      row.final_time = out.final_time;
      row.final_population = out.final_population;
      row.genotypes_created = out.genotypes_created;
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  BatchStats& st = res.stats;
  st.n = n_replicates;
  double ext_time_sum = 0.0;
  for (const auto& row : res.rows) {
    if (row.survived) {
      ++st.survived;
      ++st.cap_counts[static_cast<std::size_t>(row.cap_reason)];
    } else {
      ++st.extinct;
      ext_time_sum += row.final_time;
    }
  }
  st.survival_frac = static_cast<double>(st.survived) / static_cast<double>(st.n);
  st.mean_extinction_time = st.extinct > 0 ? ext_time_sum / static_cast<double>(st.extinct) : 0.0;

  // Wilson 95% interval.
  const double z = 1.959963984540054;
  const double n = static_cast<double>(st.n);
  const double p = st.survival_frac;
  const double denom = 1.0 + z * z / n;
  const double center = (p + z * z / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom;
  st.wilson_lo = std::max(0.0, center - half);
  st.wilson_hi = std::min(1.0, center + half);
  return res;
}

}  // namespace qsim::sim
