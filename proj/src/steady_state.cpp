#include "sirb/steady_state.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sirb/format.hpp"

namespace sirb {

namespace {

constexpr int kScanPoints = 4096;
constexpr double kMergeTolerance = 1e-8;

SteadyState make_state(const State4& value, SteadyTag tag, const ModelParams& p) {
  SteadyState s{value, tag, residual(value, p), false};
  if (!(s.residual <= residual_tolerance(value))) {
    throw std::runtime_error("steady state " + to_string(tag) + " has residual " +
                             format_double(s.residual) + " above tolerance");
  }
  return s;
}

double s_max(const ModelParams& p) { return p.k1 * (p.b0 - p.d1) / p.b0; }

/// Host-balance branch minus infection-balance curve, parameterized by S
/// along the parabola. Its zeros in (0, s_max) are the endemic states.
double balance_gap(double s, const ModelParams& p) {
  return s - s_from_infection(infected_on_parabola(s, p), p);
}

double bisect_s(const ModelParams& p, double lo, double hi) {
  double flo = balance_gap(lo, p);
  double fhi = balance_gap(hi, p);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0)) {
    throw DomainError("bracket [" + format_double(lo) + ", " + format_double(hi) +
                      "] holds no sign change");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= std::min(lo, hi) || mid >= std::max(lo, hi)) break;
    const double fm = balance_gap(mid, p);
    if (fm == 0.0) return mid;
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
      fhi = fm;
    }
  }
  return std::abs(flo) <= std::abs(fhi) ? lo : hi;
}

/// All sign changes of balance_gap on (0, s_max), refined by bisection.
std::vector<double> scan_roots(const ModelParams& p) {
  std::vector<double> roots;
  if (!(p.b0 > p.d1)) return roots;
  const double top = s_max(p);
  std::vector<double> grid;
  grid.reserve(kScanPoints + 16);
  for (int e = 12; e >= 4; --e) grid.push_back(top * std::pow(10.0, -e));
  for (int k = 1; k <= kScanPoints; ++k) grid.push_back(top * k / kScanPoints);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  double prev_s = grid.front();
  double prev_f = balance_gap(prev_s, p);
  if (prev_f == 0.0) roots.push_back(prev_s);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double s = grid[k];
    const double f = balance_gap(s, p);
    if (f == 0.0) {
      if (s < top) roots.push_back(s);
    } else if (prev_f != 0.0 && (f > 0.0) != (prev_f > 0.0)) {
      const double r = bisect_s(p, prev_s, s);
      if (r > 0.0 && r < top) roots.push_back(r);
    }
    prev_s = s;
    prev_f = f;
  }
  return roots;
}

}  // namespace

std::string to_string(SteadyTag tag) {
  switch (tag) {
    case SteadyTag::Z1: return "Z1";
    case SteadyTag::Z2: return "Z2";
    case SteadyTag::Z3: return "Z3";
    case SteadyTag::Z4BranchS1: return "Z4-branch-S1";
    case SteadyTag::Z4BranchS2: return "Z4-branch-S2";
  }
  return "?";
}

SteadyTag parse_steady_tag(const std::string& name) {
  for (SteadyTag t : {SteadyTag::Z1, SteadyTag::Z2, SteadyTag::Z3, SteadyTag::Z4BranchS1,
                      SteadyTag::Z4BranchS2}) {
    if (name == to_string(t)) return t;
  }
  throw DomainError("unknown steady-state tag '" + name + "'");
}

std::string SteadyState::label() const {
  return merged_branches ? std::string("Z4-branch-S1+S2") : to_string(tag);
}

std::string to_string(EndemicStatus s) {
  switch (s) {
    case EndemicStatus::Found: return "found";
    case EndemicStatus::NotAdmissible: return "not_admissible";
    case EndemicStatus::BracketFailure: return "bracket_failure";
  }
  return "?";
}

double residual(const State4& z, const ModelParams& p) {
  const auto f = reaction_rhs(z, p);
  return std::max({std::abs(f.f1), std::abs(f.f2), std::abs(f.f3), std::abs(f.f4)});
}

double residual_tolerance(const State4& z) {
  return 1e-10 * (1.0 + *std::max_element(z.begin(), z.end()));
}

std::vector<SteadyState> trivial_states(const ModelParams& p) {
  std::vector<SteadyState> out;
  out.push_back(make_state({0.0, 0.0, 0.0, 0.0}, SteadyTag::Z1, p));
  if (p.b0 > p.d1) {
    out.push_back(make_state({s_max(p), 0.0, 0.0, 0.0}, SteadyTag::Z2, p));
  }
  if (p.g0 > p.d4) {
    out.push_back(make_state({0.0, 0.0, 0.0, p.k3 * (p.g0 - p.d4) / p.g0}, SteadyTag::Z3, p));
  }
  return out;
}

double effective_infected_loss(const ModelParams& p) {
  const double c = p.d2 + p.gamma - p.sigma * p.gamma / (p.d3 + p.sigma);
  if (!(c > 0.0)) {
    throw DomainError("d2 + gamma - sigma*gamma/(d3 + sigma) must be positive, got " +
                      format_double(c));
  }
  return c;
}

double infected_cap(const ModelParams& p) {
  if (!(p.b0 > p.d1)) return 0.0;
  const double gap = p.b0 - p.d1;
  return p.k1 * gap * gap / (4.0 * p.b0 * effective_infected_loss(p));
}

double bacteria_of_infected(double infected, const ModelParams& p) {
  const double g = p.g0 - p.d4;
  const double root = std::sqrt(g * g + 4.0 * p.g0 * p.xi * infected / p.k3);
  if (g >= 0.0) return p.k3 * (g + root) / (2.0 * p.g0);
  // Cancellation-free form of the same root.
  return 2.0 * p.xi * infected / (root - g);
}

double s_from_infection(double infected, const ModelParams& p) {
  const double loss = p.d2 + p.gamma;
  if (infected == 0.0) {
    if (p.g0 < p.d4) {
      // B ~ xi I / (d4 - g0) as I -> 0.
      return loss / (p.beta1 + p.beta2 * p.xi / ((p.d4 - p.g0) * p.k2));
    }
    return 0.0;
  }
  const double b = bacteria_of_infected(infected, p);
  return loss * infected / (p.beta1 * infected + p.beta2 * b / (b + p.k2));
}

double s_branch(double infected, const ModelParams& p, Branch branch) {
  const double gap = p.b0 - p.d1;
  const double c = effective_infected_loss(p);
  const double disc = std::max(0.0, gap * gap - 4.0 * p.b0 * c * infected / p.k1);
  const double upper = (gap + std::sqrt(disc)) * p.k1 / (2.0 * p.b0);
  if (branch == Branch::S1) return upper;
  // Product of the roots is c I k1 / b0.
  return upper > 0.0 ? c * infected * p.k1 / (p.b0 * upper) : 0.0;
}

double infected_on_parabola(double s, const ModelParams& p) {
  const double c = effective_infected_loss(p);
  return std::max(0.0, s * ((p.b0 - p.d1) - p.b0 * s / p.k1) / c);
}

double bisect_branch(const ModelParams& p, Branch branch, double i_lo, double i_hi) {
  const double s = bisect_s(p, s_branch(i_lo, p, branch), s_branch(i_hi, p, branch));
  return infected_on_parabola(s, p);
}

State4 endemic_state_at(double s, const ModelParams& p) {
  const double i = infected_on_parabola(s, p);
  return {s, i, p.gamma * i / (p.d3 + p.sigma), bacteria_of_infected(i, p)};
}

EndemicCheck endemic_exists(const ModelParams& p) {
  EndemicCheck out;
  auto& d = out.diagnostics;
  d.condition_lhs = p.k1 * (p.b0 - p.d1) / (2.0 * p.b0);
  d.condition_rhs = (p.d2 + p.gamma) / p.beta2;
  if (!(p.b0 > p.d1)) return out;
  d.i_star = infected_cap(p);
  d.branch_intersections = static_cast<int>(scan_roots(p).size());
  out.exists = d.condition_lhs > d.condition_rhs;
  return out;
}

EndemicResult solve_endemic(const ModelParams& p) {
  EndemicResult out;
  const auto check = endemic_exists(p);
  out.diagnostics = check.diagnostics;
  if (!check.exists) {
    out.status = EndemicStatus::NotAdmissible;
    return out;
  }
  auto roots = scan_roots(p);
  if (roots.empty()) {
    out.status = EndemicStatus::BracketFailure;
    return out;
  }
  const double mid = 0.5 * s_max(p);
  std::vector<std::pair<double, bool>> merged;  // (S, merged flag)
  for (double r : roots) {
    if (!merged.empty() && std::abs(r - merged.back().first) <= kMergeTolerance * std::abs(r)) {
      merged.back().second = merged.back().second || ((r >= mid) != (merged.back().first >= mid));
      continue;
    }
    merged.emplace_back(r, std::abs(r - mid) <= kMergeTolerance * mid);
  }
  for (const auto& [s, both] : merged) {
    const SteadyTag tag = s >= mid ? SteadyTag::Z4BranchS1 : SteadyTag::Z4BranchS2;
    SteadyState st = make_state(endemic_state_at(s, p), tag, p);
    st.merged_branches = both;
    out.states.push_back(st);
  }
  out.status = EndemicStatus::Found;
  return out;
}

}  // namespace sirb
