// Constant equilibria: the closed-form disease-free states Z1-Z3 and the
// endemic family Z4 obtained by intersecting the host-balance parabola with
// the infection-balance curve.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sirb/model.hpp"

namespace sirb {

enum class SteadyTag { Z1, Z2, Z3, Z4BranchS1, Z4BranchS2 };

std::string to_string(SteadyTag tag);
SteadyTag parse_steady_tag(const std::string& name);

struct SteadyState {
  State4 value{};
  SteadyTag tag = SteadyTag::Z1;
  double residual = 0.0;
  /// Set when the S1 and S2 intersections coincide (I at the cap I*).
  bool merged_branches = false;

  /// "Z4-branch-S1+S2" for merged states, otherwise to_string(tag).
  std::string label() const;
};

/// Max-abs reaction at a constant state; rejects negative components.
double residual(const State4& z, const ModelParams& p);

/// Tolerance every constructed SteadyState satisfies.
double residual_tolerance(const State4& z);

/// Z1 always; Z2 iff b0 > d1; Z3 iff g0 > d4.
std::vector<SteadyState> trivial_states(const ModelParams& p);

struct EndemicDiagnostics {
  double i_star = 0.0;          // admissible infected range is [0, i_star]
  double condition_lhs = 0.0;   // k1 (b0 - d1) / (2 b0)
  double condition_rhs = 0.0;   // (d2 + gamma) / beta2
  /// Sign changes of the branch-minus-balance function found by the scan,
  /// counted regardless of the threshold condition.
  int branch_intersections = 0;
};

struct EndemicCheck {
  bool exists = false;
  EndemicDiagnostics diagnostics;
};

/// Threshold test k1 (b0 - d1) / (2 b0) > (d2 + gamma) / beta2 (false
/// whenever b0 <= d1).
EndemicCheck endemic_exists(const ModelParams& p);

enum class EndemicStatus { Found, NotAdmissible, BracketFailure };
std::string to_string(EndemicStatus s);

struct EndemicResult {
  EndemicStatus status = EndemicStatus::NotAdmissible;
  std::vector<SteadyState> states;
  EndemicDiagnostics diagnostics;
};

/// Endemic equilibria. Empty with NotAdmissible when the threshold fails;
/// BracketFailure when it holds but no sign change was found.
EndemicResult solve_endemic(const ModelParams& p);

enum class Branch { S1, S2 };

/// d2 + gamma - sigma gamma / (d3 + sigma). Throws DomainError if <= 0.
double effective_infected_loss(const ModelParams& p);
/// k1 (b0 - d1)^2 / (4 b0 c) with c the effective loss; 0 when b0 <= d1.
double infected_cap(const ModelParams& p);
/// Positive root B of (g0/k3) B^2 - (g0 - d4) B - xi I = 0.
double bacteria_of_infected(double infected, const ModelParams& p);
/// S solving the infection balance S (beta1 I + beta2 h1(B(I))) = (d2 + gamma) I.
double s_from_infection(double infected, const ModelParams& p);
/// S on the given branch of the host-balance parabola at infected level I.
double s_branch(double infected, const ModelParams& p, Branch branch);
/// Inverse of s_branch: infected level on the parabola at susceptible level S.
double infected_on_parabola(double s, const ModelParams& p);

/// Bisection for the intersection on `branch` inside the infected bracket
/// [i_lo, i_hi]. Returns the infected level. Throws DomainError if the
/// bracket holds no sign change.
double bisect_branch(const ModelParams& p, Branch branch, double i_lo, double i_hi);

/// Builds the endemic state at susceptible level S on the parabola.
State4 endemic_state_at(double s, const ModelParams& p);

}  // namespace sirb
