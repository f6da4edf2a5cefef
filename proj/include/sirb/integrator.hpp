// IMEX-Euler time integration of the SIRB reaction-diffusion system:
// implicit diffusion (matrix-free conjugate gradients), explicit reaction.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "sirb/grid.hpp"
#include "sirb/model.hpp"

namespace sirb {

struct StateField {
  std::array<ScalarField, kSpecies> u;
  double t = 0.0;

  explicit StateField(const Grid& g, double time = 0.0)
      : u{ScalarField(g), ScalarField(g), ScalarField(g), ScalarField(g)}, t(time) {}

  const Grid& grid() const { return u[0].grid; }
  ScalarField& operator[](Species s) { return u[static_cast<int>(s)]; }
  const ScalarField& operator[](Species s) const { return u[static_cast<int>(s)]; }
  State4 at(std::size_t cell) const {
    return {u[0].values[cell], u[1].values[cell], u[2].values[cell], u[3].values[cell]};
  }
  static StateField uniform(const Grid& g, const State4& value, double time = 0.0);
};

namespace initial {
struct Constant {
  State4 value{};
};
/// background + amplitude * exp(-|x - center|^2 / (2 width^2))
struct Gaussian {
  State4 background{};
  State4 amplitude{};
  std::array<double, 2> center{0.0, 0.0};
  double width = 0.1;
};
/// base + epsilon * direction * cos-profile(mode)
struct SteadyPerturbation {
  State4 base{};
  double epsilon = 0.0;
  Mode mode;
  State4 direction{1.0, 1.0, 1.0, 1.0};
};
/// Cellwise mean * (1 + spread * (2U - 1)) with U uniform in [0, 1).
struct Random {
  State4 mean{};
  State4 spread{};
  std::uint64_t seed = 0;
};
}  // namespace initial

using InitialCondition = std::variant<initial::Constant, initial::Gaussian,
                                      initial::SteadyPerturbation, initial::Random, StateField>;

struct SimConfig {
  Grid grid = Grid::line(1.0, 32);
  ModelParams params;
  std::array<CoefficientField, kSpecies> diffusion;
  /// Optional per-cell overrides of b0 and g0.
  std::optional<CoefficientField> b0_field;
  std::optional<CoefficientField> g0_field;
  InitialCondition initial = initial::Constant{};
  double t_end = 1.0;
  double dt = 1e-2;
  bool adaptive = false;
  int record_every = 1;
  std::vector<Mode> record_modes;
  std::vector<double> snapshot_times;
  /// CG stops here; anything at or below the 1e-10 contract is accepted
  /// once the iteration stagnates.
  double cg_tolerance = 1e-13;

  void validate() const;
};

/// Relative residual every CG solve must reach.
inline constexpr double kCgContractTolerance = 1e-10;
/// Undershoot allowed below zero, relative to the species sup-norm.
inline constexpr double kPositivityTolerance = 1e-12;

class StepError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PositivityError : public StepError {
 public:
  PositivityError(Species s, std::size_t cell, double value, double scale, double t);
  Species species;
  std::size_t cell;
  double value;
  double scale;
  double time;
};

class CgDivergence : public StepError {
 public:
  using StepError::StepError;
};

StateField make_initial(const SimConfig& cfg);

/// Explicit-reaction step bound 0.5 / L, with L a row-sum Lipschitz
/// estimate of the reaction Jacobian over the current field maxima.
double reaction_dt_bound(const StateField& state, const SimConfig& cfg);

/// Caches the diffusion operators of a configuration between steps.
class ImexStepper {
 public:
  explicit ImexStepper(const SimConfig& cfg);

  /// One IMEX-Euler step. Throws PositivityError or CgDivergence.
  StateField step(const StateField& state, double dt);

  /// max over species of sup |div(a grad u) + f(u)|.
  double rate(const StateField& state);

  int last_cg_iterations() const { return last_cg_iterations_; }

 private:
  void refresh(double t);
  void reaction_at(const StateField& state, std::array<std::vector<double>, kSpecies>& f) const;
  int solve(const DiffusionOperator& op, double dt, std::span<const double> rhs,
            std::span<double> x);

  SimConfig cfg_;
  std::vector<DiffusionOperator> ops_;
  std::vector<double> b0_cells_, g0_cells_;
  double sampled_at_ = -1.0;
  bool time_dependent_ = false;
  std::vector<double> r_, z_, p_, q_;
  int last_cg_iterations_ = 0;
};

StateField step(const StateField& state, double dt, const SimConfig& cfg);

struct Sample {
  double t = 0.0;
  double dt = 0.0;  // last step size
  std::array<double, kSpecies> sup{};
  std::array<double, kSpecies> min{};
  std::array<double, kSpecies> l1{};
  double mass = 0.0;  // integral of S + I + R
  /// amplitudes[m][species] for cfg.record_modes[m]
  std::vector<std::array<double, kSpecies>> amplitudes;
};

struct Snapshot {
  double t = 0.0;
  StateField state;
};

struct Violation {
  double t = 0.0;
  std::string kind;  // "nonnegativity", "mass_increase", "cg"
  std::string detail;
};

struct Trajectory {
  std::vector<Sample> samples;
  std::vector<Snapshot> snapshots;
  std::vector<Violation> violations;
  long steps = 0;
  bool cor21_regime = false;
};

class SimulationError : public std::runtime_error {
 public:
  SimulationError(const std::string& what, double t, Trajectory partial)
      : std::runtime_error(what), time(t), trajectory(std::move(partial)) {}
  double time;
  Trajectory trajectory;
};

Sample diagnose(const StateField& state, const std::vector<Mode>& modes);

/// Integrates to cfg.t_end. Throws SimulationError (with the trajectory up
/// to the failure) when a step fails.
Trajectory simulate(const SimConfig& cfg);

struct RelaxResult {
  StateField state;
  bool converged = false;
  double rate = 0.0;
  long steps = 0;
};

/// Integrates until the sup-norm of du/dt drops below tol or t_end.
RelaxResult relax_to_steady(const SimConfig& cfg, double tol);

}  // namespace sirb
