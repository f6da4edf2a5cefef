#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "sirb/integrator.hpp"
#include "sirb/steady_state.hpp"

using namespace sirb;

namespace {

ModelParams endemic_params() {
  ModelParams p;
  p.b0 = 2.0;
  p.k1 = 10.0;
  p.beta1 = 0.5;
  p.beta2 = 1.0;
  p.k2 = 1.0;
  p.g0 = 1.5;
  p.k3 = 5.0;
  p.d1 = 0.5;
  p.d2 = 0.3;
  p.d3 = 0.2;
  p.d4 = 0.5;
  p.sigma = 0.2;
  p.gamma = 0.3;
  p.xi = 0.5;
  return p;
}

SimConfig base_config(const ModelParams& p, int cells = 32) {
  SimConfig cfg;
  cfg.grid = Grid::line(4.0, cells);
  cfg.params = p;
  cfg.diffusion = {CoefficientField::constant(1.0), CoefficientField::constant(0.5),
                   CoefficientField::constant(0.2), CoefficientField::constant(0.05)};
  return cfg;
}

double max_deviation(const StateField& a, const State4& z) {
  double m = 0.0;
  for (int k = 0; k < kSpecies; ++k) {
    for (double v : a.u[k].values) m = std::max(m, std::abs(v - z[k]));
  }
  return m;
}

/// Final state of the spatially constant problem after IMEX steps of size dt.
oracle::Vec4 constant_run(const ModelParams& p, const State4& u0, double dt, double t_end) {
  SimConfig cfg = base_config(p, 3);
  cfg.initial = initial::Constant{u0};
  cfg.dt = dt;
  cfg.t_end = t_end;
  cfg.record_every = 1 << 30;
  const Trajectory traj = simulate(cfg);
  const auto& last = traj.samples.back();
  return {last.sup[0], last.sup[1], last.sup[2], last.sup[3]};
}

}  // namespace

TEST_CASE("constant steady states are left unchanged") {
  const ModelParams p = endemic_params();
  for (const auto& z : trivial_states(p)) {
    SimConfig cfg = base_config(p);
    const StateField u = StateField::uniform(cfg.grid, z.value);
    const StateField next = step(u, 0.01, cfg);
    CHECK(max_deviation(next, z.value) <= 1e-12 * (1.0 + z.value[0] + z.value[3]));
  }
}

TEST_CASE("spatially constant state takes an exact forward-Euler step") {
  const ModelParams p = endemic_params();
  SimConfig cfg = base_config(p, 8);
  const State4 u0{3.0, 0.7, 0.4, 1.2};
  const double dt = 0.02;
  const StateField next = step(StateField::uniform(cfg.grid, u0), dt, cfg);
  const auto f = oracle::reaction(u0, oracle::from(p));
  for (int k = 0; k < kSpecies; ++k) {
    for (double v : next.u[k].values) CHECK(v == doctest::Approx(u0[k] + dt * f[k]).epsilon(1e-14));
  }
}

TEST_CASE("diffusion part conserves mass") {
  const ModelParams p = endemic_params();
  SimConfig cfg = base_config(p, 40);
  cfg.grid = Grid::rectangle(2.0, 1.0, 20, 10);
  initial::Gaussian g;
  g.background = {1.0, 0.1, 0.0, 0.2};
  g.amplitude = {2.0, 1.0, 0.5, 3.0};
  g.center = {0.6, 0.3};
  g.width = 0.2;
  cfg.initial = g;
  const StateField u = make_initial(cfg);
  const double dt = 0.01;
  const StateField next = step(u, dt, cfg);
  for (int k = 0; k < kSpecies; ++k) {
    double expected = 0.0;
    for (std::size_t c = 0; c < u.grid().size(); ++c) {
      const auto f = oracle::reaction({u.u[0].values[c], u.u[1].values[c], u.u[2].values[c],
                                       u.u[3].values[c]},
                                      oracle::from(p));
      expected += u.u[k].values[c] + dt * f[k];
    }
    double got = 0.0;
    for (double v : next.u[k].values) got += v;
    CHECK(got == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("equilibrium run has flat diagnostics") {
  const ModelParams p = endemic_params();
  const auto states = trivial_states(p);
  const SteadyState& z3 = states.back();
  REQUIRE(z3.tag == SteadyTag::Z3);
  SimConfig cfg = base_config(p);
  cfg.initial = initial::Constant{z3.value};
  cfg.t_end = 2.0;
  cfg.dt = 0.05;
  const Trajectory traj = simulate(cfg);
  REQUIRE(traj.samples.size() > 10);
  for (const auto& s : traj.samples) {
    for (int k = 0; k < kSpecies; ++k) {
      CHECK(s.sup[k] == doctest::Approx(z3.value[k]).epsilon(1e-12));
    }
  }
  CHECK(traj.violations.empty());
}

TEST_CASE("zero-amplitude perturbation stays at the steady state") {
  const ModelParams p = endemic_params();
  const auto endemic = solve_endemic(p);
  REQUIRE_FALSE(endemic.states.empty());
  const State4 z = endemic.states.front().value;
  SimConfig cfg = base_config(p);
  initial::SteadyPerturbation sp;
  sp.base = z;
  sp.epsilon = 0.0;
  sp.mode = neumann_modes(cfg.grid, 3)[2];
  cfg.initial = sp;
  cfg.t_end = 1.0;
  cfg.dt = 0.01;
  cfg.snapshot_times = {1.0};
  const Trajectory traj = simulate(cfg);
  REQUIRE(traj.snapshots.size() == 1);
  CHECK(max_deviation(traj.snapshots.front().state, z) < 1e-10);
}

TEST_CASE("mass is nonincreasing in the damped regime") {
  ModelParams p = endemic_params();
  p.d1 = 2.5;
  p.d4 = 2.0;
  SimConfig cfg = base_config(p, 48);
  initial::Gaussian g;
  g.background = {1.0, 0.5, 0.2, 1.0};
  g.amplitude = {4.0, 2.0, 1.0, 3.0};
  g.center = {1.0, 0.0};
  g.width = 0.3;
  cfg.initial = g;
  cfg.t_end = 5.0;
  cfg.dt = 0.01;
  const Trajectory traj = simulate(cfg);
  CHECK(traj.cor21_regime);
  CHECK(traj.violations.empty());
  for (std::size_t k = 1; k < traj.samples.size(); ++k) {
    CHECK(traj.samples[k].mass <= traj.samples[k - 1].mass * (1.0 + 1e-10));
  }
}

TEST_CASE("oversized fixed steps abort with a positivity error") {
  const ModelParams p = endemic_params();
  SimConfig cfg = base_config(p);
  cfg.initial = initial::Constant{{5.0, 2.0, 1.0, 2.0}};
  const double bound = reaction_dt_bound(make_initial(cfg), cfg);
  CHECK(bound > 0.0);
  cfg.dt = 100.0 * bound;
  cfg.t_end = 10.0 * cfg.dt;
  try {
    simulate(cfg);
    FAIL("expected a simulation error");
  } catch (const SimulationError& e) {
    CHECK(std::string(e.what()).find("negative") != std::string::npos);
    CHECK(e.time > 0.0);
    REQUIRE_FALSE(e.trajectory.violations.empty());
    CHECK(e.trajectory.violations.front().kind == "nonnegativity");
  }

  cfg.adaptive = true;
  const Trajectory traj = simulate(cfg);
  CHECK(traj.samples.back().t == cfg.t_end);
  for (const auto& s : traj.samples) {
    for (int k = 0; k < kSpecies; ++k) CHECK(s.min[k] >= -1e-12 * s.sup[k]);
  }
}

TEST_CASE("spatially constant runs agree with an RK4 reference") {
  const ModelParams p = endemic_params();
  const State4 u0{3.0, 0.7, 0.4, 1.2};
  const auto ref = oracle::rk4(u0, oracle::from(p), 1.0, 4000);
  const auto got = constant_run(p, u0, 1e-5, 1.0);
  for (int k = 0; k < kSpecies; ++k) CHECK(got[k] == doctest::Approx(ref[k]).epsilon(1e-4));
}

TEST_CASE("temporal order is one") {
  const ModelParams p = endemic_params();
  const State4 u0{3.0, 0.7, 0.4, 1.2};
  const auto ref = oracle::rk4(u0, oracle::from(p), 1.0, 4000);
  auto err = [&](double dt) {
    const auto got = constant_run(p, u0, dt, 1.0);
    double e = 0.0;
    for (int k = 0; k < kSpecies; ++k) e = std::max(e, std::abs(got[k] - ref[k]));
    return e;
  };
  const double e1 = err(0.01), e2 = err(0.005), e3 = err(0.0025);
  CHECK(std::abs(std::log2(e1 / e2) - 1.0) <= 0.2);
  CHECK(std::abs(std::log2(e2 / e3) - 1.0) <= 0.2);
}

TEST_CASE("random initial data is reproducible") {
  SimConfig cfg = base_config(endemic_params());
  cfg.initial = initial::Random{{1.0, 0.5, 0.2, 1.0}, {0.5, 0.5, 0.5, 0.5}, 42};
  const StateField a = make_initial(cfg);
  const StateField b = make_initial(cfg);
  for (int k = 0; k < kSpecies; ++k) {
    CHECK(a.u[k].values == b.u[k].values);
    CHECK(a.u[k].min() >= 0.0);
  }
  cfg.initial = initial::Random{{1.0, 0.5, 0.2, 1.0}, {0.5, 0.5, 0.5, 0.5}, 43};
  CHECK(make_initial(cfg).u[0].values != a.u[0].values);

  cfg.initial = initial::Constant{{1.0, -0.1, 0.0, 0.0}};
  CHECK_THROWS_AS(make_initial(cfg), DomainError);
}

TEST_CASE("recorded modes and snapshots") {
  const ModelParams p = endemic_params();
  SimConfig cfg = base_config(p);
  const auto modes = neumann_modes(cfg.grid, 3);
  initial::SteadyPerturbation sp;
  sp.base = {1.0, 1.0, 1.0, 1.0};
  sp.epsilon = 0.1;
  sp.mode = modes[2];
  cfg.initial = sp;
  cfg.record_modes = {modes[0], modes[2]};
  cfg.snapshot_times = {0.0, 0.25, 0.5};
  cfg.t_end = 0.5;
  cfg.dt = 0.1;
  cfg.record_every = 2;
  const Trajectory traj = simulate(cfg);
  REQUIRE(traj.snapshots.size() == 3);
  CHECK(traj.snapshots[1].t == 0.25);
  const auto& first = traj.samples.front();
  REQUIRE(first.amplitudes.size() == 2);
  CHECK(first.amplitudes[0][0] == doctest::Approx(1.0));
  CHECK(first.amplitudes[1][0] == doctest::Approx(0.1));
  CHECK(traj.samples.back().t == 0.5);
  for (std::size_t k = 1; k < traj.samples.size(); ++k) {
    CHECK(traj.samples[k].t > traj.samples[k - 1].t);
  }
}

TEST_CASE("relaxation towards steady states") {
  ModelParams p = endemic_params();
  // Host-only equilibrium made attracting: weak transmission, decaying bacteria.
  p.beta1 = 0.01;
  p.beta2 = 0.02;
  p.d4 = 2.0;
  const State4 z2{p.k1 * (p.b0 - p.d1) / p.b0, 0.0, 0.0, 0.0};

  SimConfig cfg = base_config(p);
  cfg.initial = initial::Constant{z2};
  const RelaxResult at_rest = relax_to_steady(cfg, 1e-9);
  CHECK(at_rest.converged);
  CHECK(at_rest.steps == 0);

  initial::SteadyPerturbation sp;
  sp.base = z2;
  sp.epsilon = 0.05;
  sp.mode = neumann_modes(cfg.grid, 2)[1];
  sp.direction = {1.0, 0.0, 0.0, 0.0};
  cfg.initial = sp;
  cfg.t_end = 200.0;
  cfg.dt = 0.05;
  const RelaxResult near = relax_to_steady(cfg, 1e-9);
  CHECK(near.converged);
  CHECK(max_deviation(near.state, z2) < 1e-6);

  // The origin repels when b0 > d1.
  cfg.initial = initial::Constant{{1e-3, 0.0, 0.0, 0.0}};
  cfg.t_end = 5.0;
  const RelaxResult away = relax_to_steady(cfg, 1e-9);
  CHECK((!away.converged || max_deviation(away.state, {0, 0, 0, 0}) > 1e-3));
}

TEST_CASE("fields near the bottom of the double range still step") {
  ModelParams p = endemic_params();
  p.d1 = 3.0;
  p.d4 = 2.0;
  SimConfig cfg = base_config(p, 16);
  cfg.initial = initial::Gaussian{{0, 0, 0, 0}, {1e-160, 2e-160, 1e-161, 3e-160}, {2.0, 0.0}, 0.5};
  const StateField u = make_initial(cfg);
  const StateField next = step(u, 0.01, cfg);
  for (int k = 0; k < kSpecies; ++k) {
    CHECK(next.u[k].sup_norm() > 0.0);
    CHECK(next.u[k].sup_norm() < u.u[k].sup_norm() * 1.1);
    CHECK(next.u[k].min() >= 0.0);
  }
}
