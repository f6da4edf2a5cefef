// Command-line front end: JSON scenarios, the simulate / steady /
// stability / sweep workflows and their CSV and JSON artifacts.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "sirb/grid.hpp"
#include "sirb/integrator.hpp"
#include "sirb/model.hpp"
#include "sirb/stability.hpp"
#include "sirb/steady_state.hpp"

namespace sirb::cli {

using json = nlohmann::ordered_json;

/// Malformed or invalid configuration. The message names the offending
/// field path or the line of a syntax error.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Perturbation around a steady state named by tag ("Z2", "Z4-branch-S1",
/// ...) or given explicitly.
struct PerturbationSpec {
  std::variant<std::string, State4> base = std::string("Z1");
  double epsilon = 0.0;
  int mode = 0;  // index into the sorted Neumann spectrum
  State4 direction{1.0, 1.0, 1.0, 1.0};

  bool operator==(const PerturbationSpec&) const = default;
};

using InitialSpec =
    std::variant<initial::Constant, initial::Gaussian, PerturbationSpec, initial::Random>;

struct RunSpec {
  double t_end = 1.0;
  double dt = 1e-2;
  bool adaptive = false;
  int record_every = 1;
  std::vector<int> record_modes;  // mode indices
  std::vector<double> snapshot_times;
};

struct AnalysisSpec {
  int modes = 32;
  /// Steady-state tags to analyse; empty means all.
  std::vector<std::string> steady;
};

struct Scenario {
  std::string name = "scenario";
  ModelParams params;
  Grid grid = Grid::line(1.0, 64);
  std::array<CoefficientField, kSpecies> diffusion;
  std::optional<CoefficientField> b0_field;
  std::optional<CoefficientField> g0_field;
  InitialSpec initial = initial::Constant{};
  RunSpec run;
  AnalysisSpec analysis;
};

json to_json(const ModelParams& p);
/// Every field is required and unknown keys are rejected.
ModelParams params_from_json(const json& j, const std::string& path = "params");

json to_json(const Scenario& s);
Scenario parse_scenario(const json& j);
/// `source` prefixes syntax errors, which carry the line number.
json parse_json_text(const std::string& text, const std::string& source);
Scenario load_scenario(const std::filesystem::path& path);

/// Resolves named steady states and mode indices. `seed` replaces the seed
/// of a random initial profile.
SimConfig build_sim_config(const Scenario& s, std::optional<std::uint64_t> seed = std::nullopt);

/// Requires constant diffusion coefficients.
DiffusionMatrix constant_diffusion(const Scenario& s);

/// Trivial states followed by endemic states.
std::vector<SteadyState> steady_states(const ModelParams& p);

json to_json(const SteadyState& z);
json steady_report(const ModelParams& p);
json to_json(const StabilityReport& r);
/// One report per selected steady state. Propagates ConsistencyError.
json stability_report(const Scenario& s, int modes);

// Trajectory exports.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const std::vector<Mode>& modes);
json run_metadata(const Scenario& s, const Trajectory& traj, std::optional<std::uint64_t> seed,
                  const std::string& status, const std::string& error);

struct SweepAxis {
  std::string param;  // ModelParams field, or a1..a4 for constant diffusion
  std::vector<double> values;
};

struct SweepSpec {
  Scenario base;
  std::vector<SweepAxis> axes;
  std::vector<std::string> outputs;
};

inline constexpr std::size_t kMaxSweepPoints = 100000;

/// Names accepted in SweepSpec::outputs.
const std::vector<std::string>& sweep_output_names();
std::vector<std::string> default_sweep_outputs();

SweepSpec parse_sweep(const json& j);
SweepSpec load_sweep(const std::filesystem::path& path);

struct SweepTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Rows in lexicographic order over the axes (first axis slowest). A failing
/// point fills the error column instead of aborting.
SweepTable run_sweep(const SweepSpec& spec, int jobs, int modes);
void write_csv(std::ostream& os, const SweepTable& table);

struct Options {
  int jobs = 1;
  std::optional<int> modes;
  std::optional<std::uint64_t> seed;
};

// Exit codes shared by the subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitConsistency = 4;

int cmd_simulate(const std::filesystem::path& config, const std::filesystem::path& out_dir,
                 const Options& opt, std::ostream& err);
int cmd_steady(const std::filesystem::path& config, std::ostream& out, std::ostream& err);
int cmd_stability(const std::filesystem::path& config, const Options& opt, std::ostream& out,
                  std::ostream& err);
int cmd_sweep(const std::filesystem::path& spec, const std::filesystem::path& out_dir,
              const Options& opt, std::ostream& err);

/// Parses argv and dispatches to a subcommand.
int main(int argc, char** argv);

}  // namespace sirb::cli
