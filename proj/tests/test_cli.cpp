#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <sys/wait.h>

using nlohmann::json;

namespace {

std::string cli_path() {
  const char* p = std::getenv("QSIM_CLI");
  REQUIRE_MESSAGE(p != nullptr, "QSIM_CLI must point at the qsim binary");
  return p;
}

std::string tmp_file(const std::string& stem) {
  static int counter = 0;
  return "/tmp/qsim_test_" + std::to_string(getpid()) + "_" + stem + "_" +
         std::to_string(counter++);
}

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunResult run_cli(const std::string& args, const std::string& env = "") {
  const std::string so = tmp_file("stdout"), se = tmp_file("stderr");
  const std::string cmd = env + " " + cli_path() + " " + args + " >" + so + " 2>" + se;
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(so);
  r.err = slurp(se);
  std::remove(so.c_str());
  std::remove(se.c_str());
  return r;
}

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string line;
  while (std::getline(is, line)) out.push_back(line);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

// Data rows (meta '#' lines and the header skipped), as split fields.
std::vector<std::vector<std::string>> data_rows(const std::string& csv) {
  std::vector<std::vector<std::string>> rows;
  bool header_seen = false;
  for (const auto& line : lines_of(csv)) {
    if (line.rfind('#', 0) == 0) continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    rows.push_back(split_csv(line));
  }
  return rows;
}

std::string extract_config_line(const std::string& csv) {
  for (const auto& line : lines_of(csv)) {
    if (line.rfind("# config=", 0) == 0) return line.substr(9);
  }
  return "";
}

}  // namespace

TEST_CASE("cli phase: corollary cells and metadata header") {
  const auto r = run_cli("phase --a-grid 0.5,1.5,2.5 --r-grid 0.2,0.5,0.95");
  REQUIRE(r.exit_code == 0);
  const auto lines = lines_of(r.out);
  REQUIRE(lines.size() >= 5);
  CHECK(lines[0].rfind("# qsim ", 0) == 0);
  CHECK(lines[1] == "# command=phase");
  CHECK(lines[2].rfind("# config=", 0) == 0);
  CHECK(lines[3].rfind("# seed=", 0) == 0);
  CHECK(lines[4] == "a,r,phase,m,r_I_boundary,r_c,error");

  const auto rows = data_rows(r.out);
  REQUIRE(rows.size() == 9);
  auto find_row = [&](const std::string& a, const std::string& rr) -> std::vector<std::string> {
    for (const auto& row : rows)
      if (row[0] == a && row[1] == rr) return row;
    return {};
  };
  CHECK(find_row("0.5", "0.5")[2] == "extinct");
  CHECK(find_row("2.5", "0.95")[2] == "survives_via_II");
  CHECK(find_row("1.5", "0.2")[2] == "survives_via_I");
  CHECK(find_row("1.5", "0.2")[3] == "inf");  // m infinite under condition I
  CHECK(find_row("2.5", "0.2")[5] == "");     // no r_c for a > 2
}

TEST_CASE("cli threshold: r_c within (1 - 1/a, 1)") {
  const auto r = run_cli("threshold --a-grid 1.1:1.9:9");
  REQUIRE(r.exit_code == 0);
  const auto rows = data_rows(r.out);
  REQUIRE(rows.size() == 9);
  for (const auto& row : rows) {
    const double a = std::stod(row[0]);
    const double rc = std::stod(row[1]);
    CHECK(rc > 1.0 - 1.0 / a);
    CHECK(rc < 1.0);
  }
  // out-of-domain grid is a config error
  CHECK(run_cli("threshold --a-grid 0.5,1.5").exit_code == 2);
}

TEST_CASE("cli mr-curve: monotone decreasing for a = 2, ending at 1") {
  const auto r = run_cli("mr-curve --a 2.0 --r-grid 0.55:1.0:10");
  REQUIRE(r.exit_code == 0);
  const auto rows = data_rows(r.out);
  REQUIRE(rows.size() == 10);
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& row : rows) {
    CHECK(row[2] == "false");
    const double m = std::stod(row[1]);
    CHECK(m < prev);
    prev = m;
  }
  CHECK(rows.back()[1] == "1");  // m(1) = a/2 = 1

  const auto below = run_cli("mr-curve --a 2.0 --r-grid 0.3,0.6");
  const auto brows = data_rows(below.out);
  CHECK(brows[0][1] == "inf");
  CHECK(brows[0][2] == "true");
}

TEST_CASE("cli simulate: csv artifact, json summary, validation") {
  const std::string cfg_path = tmp_file("simcfg");
  {
    std::ofstream f(cfg_path);
    f << R"({"dist":{"kind":"point","lambda":2.0},"r":0.0,
             "caps":{"t_max":30,"pop_max":200,"event_max":1000000},
             "replicates":400,"seed":2024})";
  }
  const std::string out_path = tmp_file("simout");
  const auto r = run_cli("simulate --config " + cfg_path + " --out " + out_path);
  REQUIRE(r.exit_code == 0);

  const auto summary = json::parse(r.out);
  CHECK(summary.at("replicates") == 400);
  const double frac = summary.at("survival_frac").get<double>();
  CHECK(frac > 0.3);
  CHECK(frac < 0.7);
  CHECK(summary.at("wilson_lo").get<double>() <= frac);
  CHECK(summary.at("wilson_hi").get<double>() >= frac);

  const std::string csv = slurp(out_path);
  const auto rows = data_rows(csv);
  REQUIRE(rows.size() == 400);
  std::uint64_t survived = 0;
  for (const auto& row : rows) {
    REQUIRE(row.size() >= 6);
    if (row[1] == "survived_censored") {
      ++survived;
      CHECK(row[2] == "pop_cap");
    } else {
      CHECK(row[1] == "extinct");
      CHECK(row[2] == "");
      CHECK(row[4] == "0");
    }
  }
  CHECK(survived == summary.at("survived").get<std::uint64_t>());

  // replicates = 0 must fail with machine-readable JSON on stderr
  const std::string bad_path = tmp_file("badcfg");
  {
    std::ofstream f(bad_path);
    f << R"({"dist":{"kind":"point","lambda":2.0},"r":0.0,"replicates":0})";
  }
  const auto bad = run_cli("simulate --config " + bad_path);
  CHECK(bad.exit_code == 2);
  const auto err = json::parse(bad.err);
  CHECK(err.at("error") == "config_invalid");

  std::remove(cfg_path.c_str());
  std::remove(bad_path.c_str());
  std::remove(out_path.c_str());
}

TEST_CASE("cli round-trip: embedded config reruns byte-identically") {
  const std::string cfg_path = tmp_file("rtcfg");
  {
    std::ofstream f(cfg_path);
    f << R"({"dist":{"kind":"uniform","a":1.5},"r":0.4,
             "caps":{"t_max":20,"pop_max":300,"event_max":500000},
             "replicates":200,"seed":77})";
  }
  const std::string out1 = tmp_file("rt1"), out2 = tmp_file("rt2");
  REQUIRE(run_cli("simulate --config " + cfg_path + " --out " + out1).exit_code == 0);

  const std::string echoed = extract_config_line(slurp(out1));
  REQUIRE_FALSE(echoed.empty());
  const std::string cfg2 = tmp_file("rtcfg2");
  {
    std::ofstream f(cfg2);
    f << echoed;
  }
  REQUIRE(run_cli("simulate --config " + cfg2 + " --out " + out2).exit_code == 0);
  CHECK(slurp(out1) == slurp(out2));

  // and the same through the phase command
  const std::string p1 = tmp_file("ph1"), p2 = tmp_file("ph2");
  REQUIRE(run_cli("phase --a-grid 1.1,1.6 --r-grid 0.3,0.7 --out " + p1).exit_code == 0);
  const std::string pcfg = tmp_file("phcfg");
  {
    std::ofstream f(pcfg);
    f << extract_config_line(slurp(p1));
  }
  REQUIRE(run_cli("phase --config " + pcfg + " --out " + p2).exit_code == 0);
  CHECK(slurp(p1) == slurp(p2));

  for (const auto& p : {cfg_path, cfg2, out1, out2, p1, p2, pcfg}) std::remove(p.c_str());
}

TEST_CASE("cli simulate: QSIM_THREADS does not change the artifact") {
  const std::string cfg_path = tmp_file("thrcfg");
  {
    std::ofstream f(cfg_path);
    f << R"({"dist":{"kind":"uniform","a":1.5},"r":0.4,
             "caps":{"t_max":20,"pop_max":300,"event_max":500000},
             "replicates":300,"seed":5})";
  }
  const std::string o1 = tmp_file("thr1"), o2 = tmp_file("thr2");
  const auto r1 = run_cli("simulate --config " + cfg_path + " --out " + o1, "QSIM_THREADS=1");
  const auto r2 = run_cli("simulate --config " + cfg_path + " --out " + o2, "QSIM_THREADS=4");
  REQUIRE(r1.exit_code == 0);
  REQUIRE(r2.exit_code == 0);
  CHECK(slurp(o1) == slurp(o2));
  CHECK(r1.out == r2.out);  // summaries agree too
  for (const auto& p : {cfg_path, o1, o2}) std::remove(p.c_str());
}

TEST_CASE("cli ode: trajectory rows and verdict") {
  const std::string cfg_path = tmp_file("odecfg");
  {
    std::ofstream f(cfg_path);
    f << R"({"a1":2.0,"a2":1.0,"r":0.25,"v1_0":1.0,"v2_0":0.0,"t_max":5.0,"points":50})";
  }
  const std::string out_path = tmp_file("odeout");
  const auto r = run_cli("ode --config " + cfg_path + " --out " + out_path);
  REQUIRE(r.exit_code == 0);
  const auto verdict = json::parse(r.out);
  CHECK(verdict.at("positive") == true);
  CHECK(verdict.at("value").get<double>() == doctest::Approx(1.0));
  CHECK(verdict.at("threshold").get<double>() == doctest::Approx(0.5));

  const auto rows = data_rows(slurp(out_path));
  REQUIRE(rows.size() == 51);
  CHECK(std::stod(rows[0][1]) == 1.0);
  CHECK(rows[0][3] == "inf");  // v2(0) = 0
  const double t_last = std::stod(rows.back()[0]);
  CHECK(t_last == doctest::Approx(5.0));
  std::remove(cfg_path.c_str());
  std::remove(out_path.c_str());
}

TEST_CASE("cli tree: sample rows and summary") {
  const std::string cfg_path = tmp_file("treecfg");
  {
    std::ofstream f(cfg_path);
    f << R"({"dist":{"kind":"uniform","a":1.0},"r":1.0,"node_cap":100000,"samples":500,"seed":9})";
  }
  const std::string out_path = tmp_file("treeout");
  const auto r = run_cli("tree --config " + cfg_path + " --out " + out_path);
  REQUIRE(r.exit_code == 0);
  const auto summary = json::parse(r.out);
  CHECK(summary.at("samples") == 500);
  CHECK(summary.at("truncation_frac").get<double>() <= 0.001);
  // subcritical: mean offspring of the root is a/2 = 0.5, loosely checked
  CHECK(summary.at("mean_root_offspring").get<double>() > 0.3);
  CHECK(summary.at("mean_root_offspring").get<double>() < 0.7);
  const auto rows = data_rows(slurp(out_path));
  REQUIRE(rows.size() == 500);
  std::remove(cfg_path.c_str());
  std::remove(out_path.c_str());
}

TEST_CASE("cli: json format emits one document") {
  const auto r = run_cli("mr-curve --a 1.5 --r-grid 0.2,0.8 --format json");
  REQUIRE(r.exit_code == 0);
  const auto doc = json::parse(r.out);
  CHECK(doc.at("command") == "mr-curve");
  REQUIRE(doc.at("rows").size() == 2);
  CHECK(doc.at("rows")[0].at("m_of_r").is_null());       // a(1-r) = 1.2: condition I, m infinite
  CHECK(doc.at("rows")[1].at("m_of_r").get<double>() >
        0.0);  // finite at r = 0.8
}
