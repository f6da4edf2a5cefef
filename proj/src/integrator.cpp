#include "sirb/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "sirb/format.hpp"

namespace sirb {

namespace {

constexpr const char* kSpeciesNames[] = {"S", "I", "R", "B"};

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

bool cor21_holds(const SimConfig& cfg) {
  ModelParams p = cfg.params;
  if (cfg.b0_field) p.b0 = cfg.b0_field->upper_bound();
  if (cfg.g0_field) p.g0 = cfg.g0_field->upper_bound();
  return check_regime(p, Regime::Cor21).all_satisfied();
}

}  // namespace

StateField StateField::uniform(const Grid& g, const State4& value, double time) {
  StateField s(g, time);
  for (int k = 0; k < kSpecies; ++k) {
    std::fill(s.u[k].values.begin(), s.u[k].values.end(), value[k]);
  }
  return s;
}

void SimConfig::validate() const {
  params.validate();
  if (!(t_end > 0.0)) throw DomainError("t_end must be > 0");
  if (!(dt > 0.0)) throw DomainError("dt must be > 0");
  if (record_every < 1) throw DomainError("record_every must be >= 1");
  if (!(cg_tolerance > 0.0)) throw DomainError("cg_tolerance must be > 0");
  for (const auto& m : record_modes) mode_profile(grid, m);
  if (const auto* sp = std::get_if<initial::SteadyPerturbation>(&initial)) {
    if (!(sp->epsilon >= 0.0)) throw DomainError("perturbation epsilon must be >= 0");
  }
  if (const auto* sf = std::get_if<StateField>(&initial)) {
    if (!(sf->grid() == grid)) throw DomainError("initial state lives on a different grid");
  }
}

PositivityError::PositivityError(Species s, std::size_t c, double v, double sc, double t)
    : StepError("negative " + std::string(kSpeciesNames[static_cast<int>(s)]) + " = " +
                format_double(v) + " at cell " + std::to_string(c) + " (t = " +
                format_double(t) + ", scale " + format_double(sc) +
                "); time step too large for the explicit reaction"),
      species(s),
      cell(c),
      value(v),
      scale(sc),
      time(t) {}

StateField make_initial(const SimConfig& cfg) {
  const Grid& g = cfg.grid;
  StateField out(g);
  std::visit(
      [&](const auto& ic) {
        using T = std::decay_t<decltype(ic)>;
        if constexpr (std::is_same_v<T, initial::Constant>) {
          out = StateField::uniform(g, ic.value);
        } else if constexpr (std::is_same_v<T, initial::Gaussian>) {
          const double w2 = 2.0 * ic.width * ic.width;
          for (int iy = 0; iy < g.cells(1); ++iy) {
            for (int ix = 0; ix < g.cells(0); ++ix) {
              const double dx = g.center(0, ix) - ic.center[0];
              const double dy = g.dim() == 2 ? g.center(1, iy) - ic.center[1] : 0.0;
              const double bump = std::exp(-(dx * dx + dy * dy) / w2);
              for (int k = 0; k < kSpecies; ++k) {
                out.u[k].values[g.index(ix, iy)] = ic.background[k] + ic.amplitude[k] * bump;
              }
            }
          }
        } else if constexpr (std::is_same_v<T, initial::SteadyPerturbation>) {
          const auto phi = mode_profile(g, ic.mode);
          for (int k = 0; k < kSpecies; ++k) {
            for (std::size_t c = 0; c < phi.size(); ++c) {
              out.u[k].values[c] = ic.base[k] + ic.epsilon * ic.direction[k] * phi[c];
            }
          }
        } else if constexpr (std::is_same_v<T, initial::Random>) {
          std::mt19937_64 rng(ic.seed);
          for (std::size_t c = 0; c < g.size(); ++c) {
            for (int k = 0; k < kSpecies; ++k) {
              out.u[k].values[c] = ic.mean[k] * (1.0 + ic.spread[k] * (2.0 * uniform01(rng) - 1.0));
            }
          }
        } else {
          out = ic;
        }
      },
      cfg.initial);
  for (int k = 0; k < kSpecies; ++k) {
    for (double v : out.u[k].values) {
      if (!(v >= 0.0)) {
        throw DomainError(std::string("initial ") + kSpeciesNames[k] + " must be nonnegative");
      }
    }
  }
  out.t = 0.0;
  return out;
}

double reaction_dt_bound(const StateField& state, const SimConfig& cfg) {
  const ModelParams& p = cfg.params;
  const double b0 = cfg.b0_field ? cfg.b0_field->upper_bound() : p.b0;
  const double g0 = cfg.g0_field ? cfg.g0_field->upper_bound() : p.g0;
  const double s = state.u[0].sup_norm(), i = state.u[1].sup_norm();
  const double bm = state.u[3].sup_norm();
  // Row sums of |df_k/du_j| bounded over [0, max]^4.
  const double row1 = b0 * (1.0 + 2.0 * s / p.k1) + p.beta1 * i + p.beta2 + p.d1 +
                      p.beta1 * s + p.sigma + p.beta2 * s / p.k2;
  const double row2 = p.beta1 * i + p.beta2 + p.beta1 * s + p.d2 + p.gamma + p.beta2 * s / p.k2;
  const double row3 = p.gamma + p.d3 + p.sigma;
  const double row4 = p.xi + g0 * (1.0 + 2.0 * bm / p.k3) + p.d4;
  const double lip = std::max({row1, row2, row3, row4});
  return 0.5 / lip;
}

ImexStepper::ImexStepper(const SimConfig& cfg) : cfg_(cfg) {
  for (const auto& a : cfg_.diffusion) time_dependent_ |= a.time_dependent();
  if (cfg_.b0_field) time_dependent_ |= cfg_.b0_field->time_dependent();
  if (cfg_.g0_field) time_dependent_ |= cfg_.g0_field->time_dependent();
  const std::size_t n = cfg_.grid.size();
  r_.resize(n);
  z_.resize(n);
  p_.resize(n);
  q_.resize(n);
}

void ImexStepper::refresh(double t) {
  if (!ops_.empty() && (!time_dependent_ || t == sampled_at_)) return;
  const Grid& g = cfg_.grid;
  ops_.clear();
  for (const auto& a : cfg_.diffusion) {
    const auto samples = a.sample(g, t);
    ops_.emplace_back(g, samples);
  }
  b0_cells_ = cfg_.b0_field ? cfg_.b0_field->sample(g, t) : std::vector<double>{};
  g0_cells_ = cfg_.g0_field ? cfg_.g0_field->sample(g, t) : std::vector<double>{};
  sampled_at_ = t;
}

void ImexStepper::reaction_at(const StateField& state,
                              std::array<std::vector<double>, kSpecies>& f) const {
  const std::size_t n = state.grid().size();
  for (auto& v : f) v.resize(n);
  ModelParams p = cfg_.params;
  for (std::size_t c = 0; c < n; ++c) {
    State4 u = state.at(c);
    // Undershoots within the positivity tolerance are evaluated at zero.
    for (double& v : u) v = std::max(v, 0.0);
    if (!b0_cells_.empty()) p.b0 = b0_cells_[c];
    if (!g0_cells_.empty()) p.g0 = g0_cells_[c];
    const auto r = reaction_rhs_unchecked(u, p);
    f[0][c] = r.f1;
    f[1][c] = r.f2;
    f[2][c] = r.f3;
    f[3][c] = r.f4;
  }
}

int ImexStepper::solve(const DiffusionOperator& op, double dt, std::span<const double> rhs,
                       std::span<double> x) {
  // Jacobi-preconditioned CG on (I - dt D) x = rhs, starting from x = rhs.
  // The system is solved for rhs scaled by a power of two near 1/max|rhs|,
  // which is exact and keeps squared norms of decayed fields from underflowing.
  const std::size_t n = rhs.size();
  double peak = 0.0;
  for (double v : rhs) peak = std::max(peak, std::abs(v));
  if (peak == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    return 0;
  }
  int exponent = 0;
  std::frexp(peak, &exponent);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::ldexp(rhs[i], -exponent);
  struct Unscale {
    std::span<double> x;
    int exponent;
    ~Unscale() {
      for (double& v : x) v = std::ldexp(v, exponent);
    }
  } unscale{x, exponent};
  const double bnorm = std::sqrt(dot(x, x));
  const auto& dg = op.diagonal();

  op.apply(x, q_);
  for (std::size_t i = 0; i < n; ++i) r_[i] = dt * q_[i];  // rhs - (x - dt D x) with x = rhs
  double rnorm = std::sqrt(dot(r_, r_));
  if (rnorm <= cfg_.cg_tolerance * bnorm) return 0;

  for (std::size_t i = 0; i < n; ++i) {
    z_[i] = r_[i] / (1.0 - dt * dg[i]);
    p_[i] = z_[i];
  }
  double rz = dot(r_, z_);
  const long max_iter = 10L * static_cast<long>(n);
  double best = rnorm;
  long last_improvement = 0;
  constexpr long kStallWindow = 50;
  for (long k = 1; k <= max_iter; ++k) {
    op.apply(p_, q_);
    for (std::size_t i = 0; i < n; ++i) q_[i] = p_[i] - dt * q_[i];
    const double alpha = rz / dot(p_, q_);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p_[i];
      r_[i] -= alpha * q_[i];
    }
    rnorm = std::sqrt(dot(r_, r_));
    if (rnorm <= cfg_.cg_tolerance * bnorm) return static_cast<int>(k);
    if (rnorm < 0.5 * best) {
      best = rnorm;
      last_improvement = k;
    } else if (k - last_improvement > kStallWindow && rnorm <= kCgContractTolerance * bnorm) {
      return static_cast<int>(k);
    }
    for (std::size_t i = 0; i < n; ++i) z_[i] = r_[i] / (1.0 - dt * dg[i]);
    const double rz_next = dot(r_, z_);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i) p_[i] = z_[i] + beta * p_[i];
  }
  if (rnorm <= kCgContractTolerance * bnorm) return static_cast<int>(max_iter);
  throw CgDivergence("CG did not reach relative residual " + format_double(kCgContractTolerance) +
                     " within " + std::to_string(max_iter) + " iterations (residual " +
                     format_double(rnorm / bnorm) + ")");
}

StateField ImexStepper::step(const StateField& state, double dt) {
  refresh(state.t);
  std::array<std::vector<double>, kSpecies> f;
  reaction_at(state, f);
  StateField next(state.grid(), state.t + dt);
  std::vector<double> rhs(state.grid().size());
  last_cg_iterations_ = 0;
  for (int k = 0; k < kSpecies; ++k) {
    const auto& u = state.u[k].values;
    for (std::size_t c = 0; c < rhs.size(); ++c) rhs[c] = u[c] + dt * f[k][c];
    last_cg_iterations_ = std::max(last_cg_iterations_, solve(ops_[k], dt, rhs, next.u[k].values));
  }
  for (int k = 0; k < kSpecies; ++k) {
    const auto& v = next.u[k].values;
    const double scale = next.u[k].sup_norm();
    const auto it = std::min_element(v.begin(), v.end());
    if (*it < -kPositivityTolerance * scale) {
      throw PositivityError(static_cast<Species>(k), static_cast<std::size_t>(it - v.begin()),
                            *it, scale, next.t);
    }
  }
  return next;
}

double ImexStepper::rate(const StateField& state) {
  refresh(state.t);
  std::array<std::vector<double>, kSpecies> f;
  reaction_at(state, f);
  std::vector<double> lap(state.grid().size());
  double worst = 0.0;
  for (int k = 0; k < kSpecies; ++k) {
    ops_[k].apply(state.u[k].values, lap);
    for (std::size_t c = 0; c < lap.size(); ++c) worst = std::max(worst, std::abs(lap[c] + f[k][c]));
  }
  return worst;
}

StateField step(const StateField& state, double dt, const SimConfig& cfg) {
  ImexStepper stepper(cfg);
  return stepper.step(state, dt);
}

Sample diagnose(const StateField& state, const std::vector<Mode>& modes) {
  Sample s;
  s.t = state.t;
  const double vol = state.grid().cell_volume();
  for (int k = 0; k < kSpecies; ++k) {
    const auto& v = state.u[k].values;
    double sup = 0.0, l1 = 0.0, mn = v.front();
    for (double x : v) {
      sup = std::max(sup, std::abs(x));
      l1 += std::abs(x);
      mn = std::min(mn, x);
    }
    s.sup[k] = sup;
    s.l1[k] = l1 * vol;
    s.min[k] = mn;
  }
  s.mass = state.u[0].integral() + state.u[1].integral() + state.u[2].integral();
  for (const auto& m : modes) {
    std::array<double, kSpecies> amp{};
    for (int k = 0; k < kSpecies; ++k) amp[k] = project_mode(state.u[k], m);
    s.amplitudes.push_back(amp);
  }
  return s;
}

namespace {

/// Shared time loop of simulate() and relax_to_steady(). `observe` is called
/// after every accepted step and returns true to stop early.
template <typename Observe>
StateField run(const SimConfig& cfg, ImexStepper& stepper, StateField state, Trajectory& traj,
               Observe&& observe) {
  std::vector<double> targets;
  for (double t : cfg.snapshot_times) {
    if (t > 0.0 && t < cfg.t_end) targets.push_back(t);
  }
  targets.push_back(cfg.t_end);
  std::sort(targets.begin(), targets.end());
  std::size_t next_target = 0;
  // Fixed steps count from the last landing point so times do not drift.
  double segment_start = state.t;
  long segment_steps = 0;

  while (next_target < targets.size()) {
    const double target = targets[next_target];
    double dt = cfg.dt;
    if (cfg.adaptive) dt = std::min(dt, reaction_dt_bound(state, cfg));
    const double remaining = target - state.t;
    bool lands = false;
    if (dt * (1.0 + 1e-9) >= remaining) {
      dt = remaining;
      lands = true;
    }
    StateField next = [&] {
      for (int attempt = 0;; ++attempt) {
        try {
          return stepper.step(state, dt);
        } catch (const PositivityError& e) {
          if (!cfg.adaptive || attempt >= 40) throw;
          dt *= 0.5;
          lands = false;
        }
      }
    }();
    if (lands) {
      next.t = target;
      ++next_target;
      segment_start = target;
      segment_steps = 0;
    } else if (!cfg.adaptive) {
      next.t = segment_start + static_cast<double>(++segment_steps) * cfg.dt;
    }
    ++traj.steps;
    state = std::move(next);
    if (observe(state, dt, lands)) break;
  }
  return state;
}

}  // namespace

Trajectory simulate(const SimConfig& cfg) {
  cfg.validate();
  Trajectory traj;
  traj.cor21_regime = cor21_holds(cfg);
  StateField state = make_initial(cfg);
  ImexStepper stepper(cfg);

  auto record = [&](const StateField& s, double dt) {
    Sample smp = diagnose(s, cfg.record_modes);
    smp.dt = dt;
    if (traj.cor21_regime && !traj.samples.empty()) {
      const double prev = traj.samples.back().mass;
      const bool flagged = std::any_of(traj.violations.begin(), traj.violations.end(),
                                       [](const Violation& v) { return v.kind == "mass_increase"; });
      if (!flagged && smp.mass > prev * (1.0 + 1e-10)) {
        traj.violations.push_back({s.t, "mass_increase",
                                   "total mass " + format_double(smp.mass) +
                                       " exceeds previous sample " + format_double(prev)});
      }
    }
    traj.samples.push_back(std::move(smp));
  };
  auto maybe_snapshot = [&](const StateField& s) {
    for (double t : cfg.snapshot_times) {
      if (t == s.t) {
        traj.snapshots.push_back({s.t, s});
        break;
      }
    }
  };

  record(state, 0.0);
  maybe_snapshot(state);
  try {
    run(cfg, stepper, std::move(state), traj, [&](const StateField& s, double dt, bool landed) {
      if (traj.steps % cfg.record_every == 0 || (landed && s.t == cfg.t_end)) record(s, dt);
      if (landed) maybe_snapshot(s);
      return false;
    });
  } catch (const PositivityError& e) {
    traj.violations.push_back({e.time, "nonnegativity", e.what()});
    throw SimulationError(e.what(), e.time, std::move(traj));
  } catch (const CgDivergence& e) {
    const double t = traj.samples.empty() ? 0.0 : traj.samples.back().t;
    traj.violations.push_back({t, "cg", e.what()});
    throw SimulationError(e.what(), t, std::move(traj));
  }
  return traj;
}

RelaxResult relax_to_steady(const SimConfig& cfg, double tol) {
  cfg.validate();
  ImexStepper stepper(cfg);
  StateField state = make_initial(cfg);
  double rate = stepper.rate(state);
  if (rate < tol) return {state, true, rate, 0};
  Trajectory traj;
  bool converged = false;
  double last_t = 0.0;
  try {
    state = run(cfg, stepper, std::move(state), traj, [&](const StateField& s, double, bool) {
      last_t = s.t;
      rate = stepper.rate(s);
      converged = rate < tol;
      return converged;
    });
  } catch (const StepError& e) {
    throw SimulationError(e.what(), last_t, std::move(traj));
  }
  return {std::move(state), converged, rate, traj.steps};
}

}  // namespace sirb
