// qsim: batch front end for the branching-process survival analysis library.
// Subcommands: phase, threshold, mr-curve, simulate, tree, ode. Every output
// starts with a metadata header (version, effective config echo, seed) so a
// run can be reproduced from its own artifact.

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qsim/ode.hpp"
#include "qsim/sim.hpp"
#include "qsim/theory.hpp"
#include "qsim/tree.hpp"

using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string fmt(const qsim::ExtReal& v) {
  if (!v.is_finite()) return v.tag_string();
  return fmt(v.value());
}

json ext_to_json(const qsim::ExtReal& v) {
  return v.is_finite() ? json(v.value()) : json(nullptr);
}

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<double> linspace(double lo, double hi, std::size_t count) {
  if (!(std::isfinite(lo) && std::isfinite(hi) && lo < hi) || count < 2)
    throw ConfigError("grid: need finite min < max and count >= 2");
  std::vector<double> v(count);
  for (std::size_t i = 0; i < count; ++i)
    v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  return v;
}

void validate_grid(const std::vector<double>& g) {
  if (g.empty()) throw ConfigError("grid: empty");
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g[i])) throw ConfigError("grid: values must be finite");
    if (i > 0 && !(g[i] > g[i - 1])) throw ConfigError("grid: values must be strictly increasing");
  }
}

// "lo:hi:count" or "v1,v2,v3".
std::vector<double> parse_grid_string(const std::string& s) {
  std::vector<double> out;
  if (s.find(':') != std::string::npos) {
    double lo, hi;
    std::size_t count;
    char c1, c2;
    std::istringstream is(s);
    if (!(is >> lo >> c1 >> hi >> c2 >> count) || c1 != ':' || c2 != ':')
      throw ConfigError("grid: expected lo:hi:count");
    out = linspace(lo, hi, count);
  } else {
    std::istringstream is(s);
    std::string tok;
    while (std::getline(is, tok, ',')) out.push_back(std::stod(tok));
  }
  validate_grid(out);
  return out;
}

std::vector<double> parse_grid_json(const json& j) {
  std::vector<double> out;
  if (j.is_array()) {
    out = j.get<std::vector<double>>();
  } else if (j.is_object()) {
    out = linspace(j.at("min").get<double>(), j.at("max").get<double>(),
                   j.at("count").get<std::size_t>());
  } else {
    throw ConfigError("grid: expected array or {min,max,count}");
  }
  validate_grid(out);
  return out;
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return j;
}

struct CommonOpts {
  std::string config_path;
  std::string out_path;
  std::string format = "csv";
  std::uint64_t seed = 0;
  bool seed_given = false;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
  cmd->add_option("--config", c.config_path, "JSON config file");
  cmd->add_option("--out", c.out_path, "output file (default: stdout)");
  cmd->add_option("--format", c.format, "csv|json")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--seed", c.seed, "seed override")->each([&c](const std::string&) {
    c.seed_given = true;
  });
}

void write_meta(std::ostream& os, const std::string& command, const json& config,
                std::uint64_t seed) {
  os << "# qsim " << kVersion << "\n";
  os << "# command=" << command << "\n";
  os << "# config=" << config.dump() << "\n";
  os << "# seed=" << seed << "\n";
}

void emit(const CommonOpts& c, const std::string& payload) {
  if (c.out_path.empty()) {
    std::cout << payload;
    return;
  }
  std::ofstream out(c.out_path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file: " + c.out_path);
  out << payload;
}

unsigned workers_from_env() {
  const char* env = std::getenv("QSIM_THREADS");
  if (!env || !*env) return 0;  // auto
  unsigned v = 0;
  const auto res = std::from_chars(env, env + std::string(env).size(), v);
  if (res.ec != std::errc{}) throw ConfigError("QSIM_THREADS must be a nonnegative integer");
  return v;
}

// ------------------------------------------------------------------ phase --

int cmd_phase(const CommonOpts& c, const std::string& a_grid_str, const std::string& r_grid_str) {
  const json cfg = load_config(c.config_path);
  std::vector<double> a_grid, r_grid;
  if (!a_grid_str.empty())
    a_grid = parse_grid_string(a_grid_str);
  else if (cfg.contains("a_grid"))
    a_grid = parse_grid_json(cfg.at("a_grid"));
  else
    throw ConfigError("phase: need --a-grid or a_grid in config");
  if (!r_grid_str.empty())
    r_grid = parse_grid_string(r_grid_str);
  else if (cfg.contains("r_grid"))
    r_grid = parse_grid_json(cfg.at("r_grid"));
  else
    throw ConfigError("phase: need --r-grid or r_grid in config");
  for (double a : a_grid)
    if (!(a > 0.0)) throw ConfigError("phase: a values must be positive");
  for (double r : r_grid)
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("phase: r values must be in [0,1]");

  const json effective = {{"a_grid", a_grid}, {"r_grid", r_grid}};
  std::ostringstream os;
  write_meta(os, "phase", effective, c.seed);

  int cell_errors = 0;
  json rows = json::array();
  if (c.format == "csv") os << "a,r,phase,m,r_I_boundary,r_c,error\n";
  for (double a : a_grid) {
    for (double r : r_grid) {
      std::string phase, m, rib, rc, err;
      json jrow{{"a", a}, {"r", r}};
      try {
        const auto v = qsim::theory::classify_phase(qsim::RateDistribution::uniform(a), r);
        phase = qsim::theory::phase_name(v.phase);
        m = fmt(v.witness.m_of_r);
        if (v.r_I_boundary) rib = fmt(*v.r_I_boundary);
        if (v.r_c) rc = fmt(*v.r_c);
        jrow["phase"] = phase;
        jrow["m"] = ext_to_json(v.witness.m_of_r);
        jrow["r_I_boundary"] = v.r_I_boundary ? json(*v.r_I_boundary) : json(nullptr);
        jrow["r_c"] = v.r_c ? json(*v.r_c) : json(nullptr);
      } catch (const qsim::NonconvergentQuadrature& e) {
        ++cell_errors;
        err = "nonconvergent_quadrature";
        jrow["error"] = err;
      }
      if (c.format == "csv") {
        os << fmt(a) << ',' << fmt(r) << ',' << phase << ',' << m << ',' << rib << ',' << rc << ','
           << err << "\n";
      } else {
        rows.push_back(jrow);
      }
    }
  }
  if (c.format == "json") {
    const json doc = {{"qsim", kVersion}, {"command", "phase"}, {"config", effective},
                      {"seed", c.seed},   {"rows", rows}};
    std::ostringstream js;
    js << doc.dump(2) << "\n";
    emit(c, js.str());
  } else {
    emit(c, os.str());
  }
  return cell_errors == 0 ? 0 : 3;
}

// -------------------------------------------------------------- threshold --

int cmd_threshold(const CommonOpts& c, const std::string& a_grid_str) {
  const json cfg = load_config(c.config_path);
  std::vector<double> a_grid;
  if (!a_grid_str.empty())
    a_grid = parse_grid_string(a_grid_str);
  else if (cfg.contains("a_grid"))
    a_grid = parse_grid_json(cfg.at("a_grid"));
  else
    throw ConfigError("threshold: need --a-grid or a_grid in config");
  for (double a : a_grid)
    if (!(a > 1.0 && a <= 2.0))
      throw ConfigError("threshold: r_c is defined only for a in (1, 2]");

  const json effective = {{"a_grid", a_grid}};
  std::ostringstream os;
  write_meta(os, "threshold", effective, c.seed);
  json rows = json::array();
  if (c.format == "csv") os << "a,r_c\n";
  for (double a : a_grid) {
    const double rc = qsim::theory::solve_r_c(a);
    if (c.format == "csv")
      os << fmt(a) << ',' << fmt(rc) << "\n";
    else
      rows.push_back({{"a", a}, {"r_c", rc}});
  }
  if (c.format == "json") {
    const json doc = {{"qsim", kVersion}, {"command", "threshold"}, {"config", effective},
                      {"seed", c.seed},   {"rows", rows}};
    emit(c, doc.dump(2) + "\n");
  } else {
    emit(c, os.str());
  }
  return 0;
}

// --------------------------------------------------------------- mr-curve --

int cmd_mr_curve(const CommonOpts& c, double a_flag, const std::string& r_grid_str) {
  const json cfg = load_config(c.config_path);
  double a = a_flag;
  if (a <= 0.0 && cfg.contains("a")) a = cfg.at("a").get<double>();
  if (!(a > 0.0)) throw ConfigError("mr-curve: need --a or a in config, positive");
  std::vector<double> r_grid;
  if (!r_grid_str.empty())
    r_grid = parse_grid_string(r_grid_str);
  else if (cfg.contains("r_grid"))
    r_grid = parse_grid_json(cfg.at("r_grid"));
  else
    throw ConfigError("mr-curve: need --r-grid or r_grid in config");
  for (double r : r_grid)
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("mr-curve: r values must be in [0,1]");

  const json effective = {{"a", a}, {"r_grid", r_grid}};
  std::ostringstream os;
  write_meta(os, "mr-curve", effective, c.seed);
  json rows = json::array();
  if (c.format == "csv") os << "r,m_of_r,condition_I\n";
  for (double r : r_grid) {
    const auto m = qsim::theory::m_uniform(a, r);
    const bool cond_I = r < 1.0 && a * (1.0 - r) > 1.0;
    if (c.format == "csv")
      os << fmt(r) << ',' << fmt(m) << ',' << (cond_I ? "true" : "false") << "\n";
    else
      rows.push_back({{"r", r}, {"m_of_r", ext_to_json(m)}, {"condition_I", cond_I}});
  }
  if (c.format == "json") {
    const json doc = {{"qsim", kVersion}, {"command", "mr-curve"}, {"config", effective},
                      {"seed", c.seed},   {"rows", rows}};
    emit(c, doc.dump(2) + "\n");
  } else {
    emit(c, os.str());
  }
  return 0;
}

// --------------------------------------------------------------- simulate --

int cmd_simulate(const CommonOpts& c) {
  const json cfg = load_config(c.config_path);
  if (!cfg.contains("dist")) throw ConfigError("simulate: config needs \"dist\"");
  if (!cfg.contains("r")) throw ConfigError("simulate: config needs \"r\"");
  if (!cfg.contains("replicates")) throw ConfigError("simulate: config needs \"replicates\"");

  qsim::sim::ModelParams params{qsim::RateDistribution::from_json(cfg.at("dist")),
                                cfg.at("r").get<double>()};
  if (!(params.r >= 0.0 && params.r <= 1.0)) throw ConfigError("simulate: r must be in [0,1]");

  qsim::sim::SimCaps caps;
  if (cfg.contains("caps")) {
    const auto& jc = cfg.at("caps");
    if (jc.contains("t_max")) caps.t_max = jc.at("t_max").get<double>();
    if (jc.contains("pop_max")) caps.pop_max = jc.at("pop_max").get<std::uint64_t>();
    if (jc.contains("event_max")) caps.event_max = jc.at("event_max").get<std::uint64_t>();
  }
  if (!(caps.t_max > 0.0 && caps.pop_max > 0 && caps.event_max > 0))
    throw ConfigError("simulate: caps must be positive");

  const std::int64_t reps_signed = cfg.at("replicates").get<std::int64_t>();
  if (reps_signed < 1) throw ConfigError("simulate: replicates must be >= 1");
  const std::uint64_t replicates = static_cast<std::uint64_t>(reps_signed);

  std::uint64_t seed = c.seed_given ? c.seed
                       : cfg.contains("seed") ? cfg.at("seed").get<std::uint64_t>()
                                              : 12345;

  const json effective = {
      {"dist", params.dist.to_json()},
      {"r", params.r},
      {"caps",
       {{"t_max", caps.t_max}, {"pop_max", caps.pop_max}, {"event_max", caps.event_max}}},
      {"replicates", replicates},
      {"seed", seed}};

  const auto batch =
      qsim::sim::simulate_batch(params, caps, replicates, seed, workers_from_env());

  const auto& st = batch.stats;
  const json summary = {{"replicates", st.n},
                        {"survived", st.survived},
                        {"survival_frac", st.survival_frac},
                        {"wilson_lo", st.wilson_lo},
                        {"wilson_hi", st.wilson_hi},
                        {"extinct", st.extinct},
                        {"mean_extinction_time", st.mean_extinction_time},
                        {"cap_counts",
                         {{"pop_cap", st.cap_counts[0]},
                          {"time_cap", st.cap_counts[1]},
                          {"event_cap", st.cap_counts[2]}}},
                        {"seed", seed}};

  if (c.format == "json") {
    json rows = json::array();
    for (const auto& row : batch.rows) {
      rows.push_back({{"replicate", row.replicate},
                      {"verdict", row.survived ? "survived_censored" : "extinct"},
                      {"reason", row.survived ? qsim::sim::cap_reason_name(row.cap_reason) : ""},
                      {"final_time", row.final_time},
                      {"final_pop", row.final_population},
                      {"genotypes_created", row.genotypes_created}});
    }
    const json doc = {{"qsim", kVersion}, {"command", "simulate"}, {"config", effective},
                      {"seed", seed},     {"summary", summary},    {"rows", rows}};
    emit(c, doc.dump(2) + "\n");
  } else {
    std::ostringstream os;
    write_meta(os, "simulate", effective, seed);
    os << "replicate,verdict,reason,final_time,final_pop,genotypes_created\n";
    for (const auto& row : batch.rows) {
      os << row.replicate << ','
         << (row.survived ? "survived_censored" : "extinct") << ','
         << (row.survived ? qsim::sim::cap_reason_name(row.cap_reason) : "") << ','
         << fmt(row.final_time) << ',' << row.final_population << ',' << row.genotypes_created
         << "\n";
    }
    emit(c, os.str());
    if (!c.out_path.empty()) std::cout << summary.dump() << "\n";
  }
  return 0;
}

// ------------------------------------------------------------------- tree --

int cmd_tree(const CommonOpts& c) {
  const json cfg = load_config(c.config_path);
  if (!cfg.contains("dist")) throw ConfigError("tree: config needs \"dist\"");
  if (!cfg.contains("r")) throw ConfigError("tree: config needs \"r\"");
  if (!cfg.contains("samples")) throw ConfigError("tree: config needs \"samples\"");

  qsim::sim::ModelParams params{qsim::RateDistribution::from_json(cfg.at("dist")),
                                cfg.at("r").get<double>()};
  if (!(params.r >= 0.0 && params.r <= 1.0)) throw ConfigError("tree: r must be in [0,1]");
  const std::uint64_t node_cap =
      cfg.contains("node_cap") ? cfg.at("node_cap").get<std::uint64_t>() : 1000000;
  const std::int64_t samples_signed = cfg.at("samples").get<std::int64_t>();
  if (samples_signed < 1) throw ConfigError("tree: samples must be >= 1");
  const std::uint64_t samples = static_cast<std::uint64_t>(samples_signed);
  if (node_cap < 1) throw ConfigError("tree: node_cap must be >= 1");

  std::uint64_t seed = c.seed_given ? c.seed
                       : cfg.contains("seed") ? cfg.at("seed").get<std::uint64_t>()
                                              : 12345;
  const json effective = {{"dist", params.dist.to_json()},
                          {"r", params.r},
                          {"node_cap", node_cap},
                          {"samples", samples},
                          {"seed", seed}};

  std::ostringstream os;
  write_meta(os, "tree", effective, seed);
  json rows = json::array();
  if (c.format == "csv") os << "sample,nodes,truncated,root_offspring\n";

  std::uint64_t truncated = 0;
  double node_sum = 0.0, root_sum = 0.0;
  std::uint64_t root_known = 0;
  for (std::uint64_t i = 0; i < samples; ++i) {
    auto rng = qsim::RngStream::substream(seed, i);
    const auto tree = qsim::tree::sample_tree(params, node_cap, rng);
    truncated += tree.truncated;
    node_sum += static_cast<double>(tree.nodes.size());
    std::string root;
    if (!tree.offspring_counts.empty()) {
      root = std::to_string(tree.offspring_counts[0]);
      root_sum += static_cast<double>(tree.offspring_counts[0]);
      ++root_known;
    }
    if (c.format == "csv") {
      os << i << ',' << tree.nodes.size() << ',' << (tree.truncated ? "true" : "false") << ','
         << root << "\n";
    } else {
      rows.push_back({{"sample", i},
                      {"nodes", tree.nodes.size()},
                      {"truncated", tree.truncated},
                      {"root_offspring", root.empty() ? json(nullptr) : json(tree.offspring_counts[0])}});
    }
  }
  const json summary = {
      {"samples", samples},
      {"truncated", truncated},
      {"truncation_frac", static_cast<double>(truncated) / static_cast<double>(samples)},
      {"mean_nodes", node_sum / static_cast<double>(samples)},
      {"mean_root_offspring",
       root_known > 0 ? json(root_sum / static_cast<double>(root_known)) : json(nullptr)},
      {"seed", seed}};

  if (c.format == "json") {
    const json doc = {{"qsim", kVersion}, {"command", "tree"}, {"config", effective},
                      {"seed", seed},     {"summary", summary}, {"rows", rows}};
    emit(c, doc.dump(2) + "\n");
  } else {
    emit(c, os.str());
    if (!c.out_path.empty()) std::cout << summary.dump() << "\n";
  }
  return 0;
}

// -------------------------------------------------------------------- ode --

int cmd_ode(const CommonOpts& c) {
  const json cfg = load_config(c.config_path);
  qsim::ode::OdeParams p;
  for (const char* key : {"a1", "a2", "r"})
    if (!cfg.contains(key)) throw ConfigError(std::string("ode: config needs \"") + key + "\"");
  p.a1 = cfg.at("a1").get<double>();
  p.a2 = cfg.at("a2").get<double>();
  p.r = cfg.at("r").get<double>();
  p.v1_0 = cfg.contains("v1_0") ? cfg.at("v1_0").get<double>() : 1.0;
  p.v2_0 = cfg.contains("v2_0") ? cfg.at("v2_0").get<double>() : 0.0;
  const double t_max = cfg.contains("t_max") ? cfg.at("t_max").get<double>() : 10.0;
  const std::size_t points = cfg.contains("points") ? cfg.at("points").get<std::size_t>() : 100;
  if (!(t_max > 0.0) || points < 1) throw ConfigError("ode: need t_max > 0 and points >= 1");
  if (!(p.v1_0 > 0.0)) throw ConfigError("ode: requires v1_0 > 0");

  const json effective = {{"a1", p.a1},     {"a2", p.a2},   {"r", p.r},      {"v1_0", p.v1_0},
                          {"v2_0", p.v2_0}, {"t_max", t_max}, {"points", points}};

  const auto limit = qsim::ode::ratio_limit(p);  // validates parameters up front
  std::ostringstream os;
  write_meta(os, "ode", effective, c.seed);
  json rows = json::array();
  if (c.format == "csv") os << "t,v1,v2,ratio\n";
  for (std::size_t k = 0; k <= points; ++k) {
    const double t = t_max * static_cast<double>(k) / static_cast<double>(points);
    const auto s = qsim::ode::solve_closed_form(p, t);
    const double ratio = s.v2 > 0.0 ? s.v1 / s.v2 : std::numeric_limits<double>::infinity();
    if (c.format == "csv") {
      os << fmt(t) << ',' << fmt(s.v1) << ',' << fmt(s.v2) << ',' << fmt(ratio) << "\n";
    } else {
      rows.push_back({{"t", t},
                      {"v1", s.v1},
                      {"v2", s.v2},
                      {"ratio", std::isinf(ratio) ? json(nullptr) : json(ratio)}});
    }
  }
  const json verdict = {{"positive", limit.positive},
                        {"value", limit.positive && std::isfinite(limit.value)
                                      ? json(limit.value)
                                      : json(nullptr)},
                        {"threshold", 1.0 - p.a2 / p.a1},
                        {"a_order_relaxed", !p.fitness_ordered()}};
  if (c.format == "json") {
    const json doc = {{"qsim", kVersion}, {"command", "ode"}, {"config", effective},
                      {"seed", c.seed},   {"verdict", verdict}, {"rows", rows}};
    emit(c, doc.dump(2) + "\n");
  } else {
    emit(c, os.str());
    if (!c.out_path.empty()) std::cout << verdict.dump() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"branching-process survival analysis: phase diagrams, thresholds, simulation"};
  app.set_version_flag("--version", std::string("qsim ") + kVersion);
  app.require_subcommand(1);

  CommonOpts copts;
  std::string a_grid_str, r_grid_str;
  double a_flag = 0.0;

  auto* phase = app.add_subcommand("phase", "phase diagram over (a, r) for uniform rates");
  add_common(phase, copts);
  phase->add_option("--a-grid", a_grid_str, "a grid: lo:hi:count or comma list");
  phase->add_option("--r-grid", r_grid_str, "r grid: lo:hi:count or comma list");

  auto* threshold = app.add_subcommand("threshold", "critical mutation threshold r_c over a grid");
  add_common(threshold, copts);
  threshold->add_option("--a-grid", a_grid_str, "a grid in (1,2]: lo:hi:count or comma list");

  auto* mr = app.add_subcommand("mr-curve", "m(r) curve for uniform rates on [0,a]");
  add_common(mr, copts);
  mr->add_option("--a", a_flag, "uniform upper endpoint a");
  mr->add_option("--r-grid", r_grid_str, "r grid: lo:hi:count or comma list");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo survival batch");
  add_common(simulate, copts);

  auto* tree = app.add_subcommand("tree", "genotype-tree sampling statistics");
  add_common(tree, copts);

  auto* ode = app.add_subcommand("ode", "two-genome deterministic model trajectory and verdict");
  add_common(ode, copts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (phase->parsed()) return cmd_phase(copts, a_grid_str, r_grid_str);
    if (threshold->parsed()) return cmd_threshold(copts, a_grid_str);
    if (mr->parsed()) return cmd_mr_curve(copts, a_flag, r_grid_str);
    if (simulate->parsed()) return cmd_simulate(copts);
    if (tree->parsed()) return cmd_tree(copts);
    if (ode->parsed()) return cmd_ode(copts);
  } catch (const ConfigError& e) {
    std::cerr << json{{"error", "config_invalid"}, {"message", e.what()}}.dump() << "\n";
    return 2;
  } catch (const qsim::DomainError& e) {
    std::cerr << json{{"error", "domain"}, {"message", e.what()}}.dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
    return 4;
  }
  return 0;
}
