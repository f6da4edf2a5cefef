// SIRB reaction terms: susceptible (S), infected (I), recovered (R) and
// bacteria (B) with logistic host growth, saturating environmental
// transmission and logistic bacterial growth.

#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sirb {

/// Raised when an input lies outside the domain of a model function
/// (negative densities, non-positive capacities, unknown names).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Species : int { S = 0, I = 1, R = 2, B = 3 };
inline constexpr int kSpecies = 4;

/// A point value (S, I, R, B).
using State4 = std::array<double, kSpecies>;

struct ModelParams {
  double b0 = 1.0;      // host growth rate
  double k1 = 1.0;      // host capacity
  double beta1 = 1.0;   // direct transmission
  double beta2 = 1.0;   // environmental transmission
  double k2 = 1.0;      // bacterial half-saturation
  double g0 = 1.0;      // bacterial growth rate
  double k3 = 1.0;      // bacterial capacity
  double d1 = 0.0;
  double d2 = 0.0;
  double d3 = 0.0;
  double d4 = 0.0;
  double sigma = 1.0;   // immunity loss
  double gamma = 1.0;   // recovery
  double xi = 1.0;      // shedding

  /// Throws DomainError naming the first offending field.
  void validate() const;

  /// Field access by name; throws DomainError for unknown names.
  double get(std::string_view name) const;
  void set(std::string_view name, double value);

  static const std::vector<std::string>& field_names();

  bool operator==(const ModelParams&) const = default;
};

struct ReactionVector {
  double f1 = 0.0;
  double f2 = 0.0;
  double f3 = 0.0;
  double f4 = 0.0;

  double operator[](int i) const;
  State4 as_array() const { return {f1, f2, f3, f4}; }
};

double logistic_b(double s, const ModelParams& p);
double saturation_h1(double bacteria, const ModelParams& p);
/// Derivative of h1 with respect to B: k2 / (B + k2)^2.
double saturation_h1_prime(double bacteria, const ModelParams& p);
double infection_g1(double s, double i, double bacteria, const ModelParams& p);
double bacterial_g2(double bacteria, const ModelParams& p);

ReactionVector reaction_rhs(const State4& u, const ModelParams& p);

/// Same formulas without the domain check. Used on hot paths after the
/// caller has established nonnegativity.
ReactionVector reaction_rhs_unchecked(const State4& u, const ModelParams& p) noexcept;

enum class Regime { H23, Cor21, H51, Thm22Candidate };

Regime parse_regime(std::string_view name);
std::string_view to_string(Regime r);

struct RegimeCondition {
  std::string description;
  double margin = 0.0;   // positive side means satisfied
  bool strict = true;    // strict: margin > 0, otherwise margin >= 0
  bool satisfied() const { return strict ? margin > 0.0 : margin >= 0.0; }
};

struct RegimeReport {
  Regime regime = Regime::H23;
  std::vector<RegimeCondition> conditions;
  bool all_satisfied() const;
};

/// Lists every inequality of the named hypothesis with its margin. Never
/// throws on a violated inequality. `state` is only used by
/// Thm22Candidate (constant steady state; defaults to the origin).
RegimeReport check_regime(const ModelParams& p, Regime regime,
                          const std::optional<State4>& state = std::nullopt);

}  // namespace sirb
