#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "sirb/cli.hpp"

using namespace sirb;
using namespace sirb::cli;
namespace fs = std::filesystem;

namespace {

ModelParams growth_regime() {
  ModelParams p;
  p.b0 = 2.0;
  p.k1 = 10.0;
  p.beta1 = 0.5;
  p.beta2 = 1.0;
  p.k2 = 1.0;
  p.g0 = 1.5;
  p.k3 = 5.0;
  p.d1 = 1.0;
  p.d2 = 0.5;
  p.d3 = 0.2;
  p.d4 = 0.5;
  p.sigma = 0.2;
  p.gamma = 0.5;
  p.xi = 0.5;
  return p;
}

Scenario base_scenario() {
  Scenario s;
  s.name = "unit";
  s.params = growth_regime();
  s.grid = Grid::line(2.0, 16);
  for (auto& a : s.diffusion) a = CoefficientField::constant(0.1);
  s.run.t_end = 0.5;
  s.run.dt = 0.01;
  s.analysis.modes = 8;
  return s;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("sirb_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path / name) << text;
    return path / name;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t column(const SweepTable& t, const std::string& name) {
  const auto it = std::find(t.header.begin(), t.header.end(), name);
  REQUIRE(it != t.header.end());
  return static_cast<std::size_t>(it - t.header.begin());
}

}  // namespace

TEST_CASE("scenario JSON round trip") {
  Scenario s = base_scenario();
  PerturbationSpec ps;
  ps.base = std::string("Z3");
  ps.epsilon = 1e-3;
  ps.mode = 2;
  s.initial = ps;
  s.run.record_modes = {0, 1, 2};
  s.run.snapshot_times = {0.1, 0.25};
  s.analysis.steady = {"Z1", "Z3"};
  const json j = to_json(s);
  const Scenario back = parse_scenario(parse_json_text(j.dump(), "mem"));
  CHECK(to_json(back).dump() == j.dump());
  CHECK(std::get<PerturbationSpec>(back.initial) == ps);
}

TEST_CASE("config errors name the offending field or line") {
  json j = to_json(base_scenario());
  j["params"]["beta1"] = -0.5;
  try {
    parse_scenario(j);
    FAIL("expected rejection");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("beta1") != std::string::npos);
  }

  json k = to_json(base_scenario());
  k["run"]["dtt"] = 1.0;
  try {
    parse_scenario(k);
    FAIL("expected rejection");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("run.dtt") != std::string::npos);
  }

  try {
    parse_json_text("{\n  \"name\": \"x\",\n  \"params\": {\n}}}", "bad.json");
    FAIL("expected rejection");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("bad.json:4") != std::string::npos);
  }

  json missing = to_json(base_scenario());
  missing["params"].erase("xi");
  CHECK_THROWS_AS(parse_scenario(missing), ConfigError);
}

TEST_CASE("steady command") {
  TempDir dir("steady");
  const auto cfg = dir.write("s.json", to_json(base_scenario()).dump());
  std::ostringstream out, err;
  REQUIRE(cmd_steady(cfg, out, err) == kExitOk);
  const json rep = json::parse(out.str());
  CHECK(rep["endemic"]["states"].size() >= 1);
  for (const auto& z : rep["endemic"]["states"]) CHECK(z["residual"].get<double>() < 1e-9);

  Scenario low = base_scenario();
  low.params.b0 = 0.5;
  low.params.g0 = 0.3;
  const auto cfg2 = dir.write("low.json", to_json(low).dump());
  std::ostringstream out2;
  REQUIRE(cmd_steady(cfg2, out2, err) == kExitOk);
  const json rep2 = json::parse(out2.str());
  REQUIRE(rep2["trivial"].size() == 1);
  CHECK(rep2["trivial"][0]["tag"] == "Z1");
  CHECK(rep2["endemic"]["states"].empty());

  const auto broken = dir.write("broken.json", "{ \"params\": ");
  std::ostringstream out3, err3;
  CHECK(cmd_steady(broken, out3, err3) != kExitOk);
  CHECK(out3.str().empty());
  CHECK_FALSE(err3.str().empty());
}

TEST_CASE("stability command") {
  TempDir dir("stab");
  const Scenario s = base_scenario();
  const auto cfg = dir.write("s.json", to_json(s).dump());
  std::ostringstream out, err;
  Options opt;
  opt.modes = 6;
  REQUIRE(cmd_stability(cfg, opt, out, err) == kExitOk);
  const json rep = json::parse(out.str());
  const auto modes = neumann_modes(s.grid, 6);
  for (const auto& r : rep["reports"]) {
    REQUIRE(r["modes"].size() == 6);
    for (std::size_t j = 0; j < 6; ++j) CHECK(r["modes"][j]["lambda"].get<double>() == modes.modes[j].lambda);
    const std::string tag = r["state"]["tag"];
    if (tag == "Z1" || tag == "Z2" || tag == "Z3") CHECK(r["overall"] == "unstable");
  }

  Scenario decay = base_scenario();
  decay.params.b0 = 0.5;
  decay.params.g0 = 0.3;
  const auto cfg2 = dir.write("d.json", to_json(decay).dump());
  std::ostringstream out2;
  REQUIRE(cmd_stability(cfg2, Options{}, out2, err) == kExitOk);
  const json rep2 = json::parse(out2.str());
  REQUIRE(rep2["reports"].size() == 1);
  CHECK(rep2["reports"][0]["overall"] == "stable");
  for (const auto& m : rep2["reports"][0]["modes"]) CHECK(m["verdict"] == "stable");
  CHECK(json::parse(rep2.dump()) == rep2);
}

TEST_CASE("sweep over beta2 flips endemic existence once") {
  SweepSpec spec;
  spec.base = base_scenario();
  spec.base.params.beta1 = 0.01;
  SweepAxis axis{"beta2", {}};
  for (int k = 0; k < 30; ++k) axis.values.push_back(0.05 * (k + 1));
  spec.axes = {axis};
  spec.outputs = {"endemic_exists", "z2_exists"};
  const auto t = run_sweep(spec, 1, 4);
  REQUIRE(t.rows.size() == 30);
  const std::size_t c = column(t, "endemic_exists");
  int flips = 0;
  for (std::size_t r = 1; r < t.rows.size(); ++r) flips += t.rows[r][c] != t.rows[r - 1][c];
  CHECK(flips == 1);
  CHECK(t.rows.front()[c] == "false");
  CHECK(t.rows.back()[c] == "true");
}

TEST_CASE("sweep over d1 through b0 flips Z2 existence at d1 = b0") {
  SweepSpec spec;
  spec.base = base_scenario();
  spec.axes = {{"d1", {1.0, 1.5, 1.9, 2.0, 2.1, 3.0}}};
  spec.outputs = {"z2_exists"};
  const auto t = run_sweep(spec, 2, 4);
  const std::size_t c = column(t, "z2_exists");
  const std::vector<std::string> expect{"true", "true", "true", "false", "false", "false"};
  for (std::size_t r = 0; r < expect.size(); ++r) CHECK(t.rows[r][c] == expect[r]);
}

TEST_CASE("sweep without axes has one row and parallel equals serial") {
  SweepSpec spec;
  spec.base = base_scenario();
  spec.outputs = default_sweep_outputs();
  CHECK(run_sweep(spec, 1, 4).rows.size() == 1);

  spec.axes = {{"beta1", {0.1, 0.5, 1.0}}, {"a3", {0.1, 1.0, 10.0}}, {"d4", {0.2, 2.0}}};
  const auto serial = run_sweep(spec, 1, 6);
  const auto parallel = run_sweep(spec, 4, 6);
  REQUIRE(serial.rows.size() == 18);
  std::ostringstream a, b;
  write_csv(a, serial);
  write_csv(b, parallel);
  CHECK(a.str() == b.str());
  // Last axis varies fastest.
  const std::size_t d4 = column(serial, "d4");
  CHECK(serial.rows[0][d4] != serial.rows[1][d4]);
  CHECK(serial.rows[0][column(serial, "beta1")] == serial.rows[5][column(serial, "beta1")]);
}

TEST_CASE("sweep records per-point failures in the row") {
  SweepSpec spec;
  spec.base = base_scenario();
  spec.axes = {{"k2", {1.0, -1.0}}};
  spec.outputs = {"z2_exists"};
  const auto t = run_sweep(spec, 1, 4);
  REQUIRE(t.rows.size() == 2);
  const std::size_t e = column(t, "error");
  CHECK(t.rows[0][e].empty());
  CHECK_FALSE(t.rows[1][e].empty());
}

TEST_CASE("simulate command") {
  TempDir dir("sim");
  Scenario s = base_scenario();
  PerturbationSpec eq;
  eq.base = std::string("Z3");
  s.initial = eq;
  s.run.record_modes = {0, 1};
  s.run.snapshot_times = {0.25};
  const auto cfg = dir.write("z3.json", to_json(s).dump());
  std::ostringstream err;
  REQUIRE(cmd_simulate(cfg, dir.path / "out", Options{}, err) == kExitOk);
  CHECK(fs::exists(dir.path / "out" / "trajectory.csv"));
  CHECK(fs::exists(dir.path / "out" / "meta.json"));
  CHECK(fs::exists(dir.path / "out" / "snapshots" / "snapshot_0000_B.csv"));
  const json meta = json::parse(slurp(dir.path / "out" / "meta.json"));
  CHECK(meta["status"] == "ok");

  std::istringstream traj(slurp(dir.path / "out" / "trajectory.csv"));
  std::string line;
  std::getline(traj, line);
  auto values = [](const std::string& row) {
    std::vector<double> v;
    std::istringstream is(row);
    std::string cell;
    while (std::getline(is, cell, ',')) v.push_back(std::stod(cell));
    return v;
  };
  std::getline(traj, line);
  const auto first = values(line);
  int rows = 1;
  while (std::getline(traj, line)) {
    const auto v = values(line);
    REQUIRE(v.size() == first.size());
    for (std::size_t k = 2; k < v.size(); ++k) CHECK(std::abs(v[k] - first[k]) <= 1e-12 * (1.0 + std::abs(first[k])));
    ++rows;
  }
  CHECK(rows == 51);

  Scenario fast = base_scenario();
  fast.params.beta1 = 50.0;
  fast.params.beta2 = 50.0;
  fast.initial = initial::Constant{{5.0, 5.0, 1.0, 4.0}};
  fast.run.dt = 1.0;
  fast.run.t_end = 5.0;
  const auto cfg2 = dir.write("fast.json", to_json(fast).dump());
  std::ostringstream err2;
  CHECK(cmd_simulate(cfg2, dir.path / "fast", Options{}, err2) == kExitNumerical);
  CHECK(err2.str().find("negative") != std::string::npos);
}
