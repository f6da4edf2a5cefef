// Linear stability of constant steady states under diffusion: Jacobians of
// the reaction terms, per-Neumann-mode matrices J - lambda*A, eigenvalues,
// the cubic Routh-Hurwitz classification and Turing detection.

#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sirb/grid.hpp"
#include "sirb/model.hpp"
#include "sirb/steady_state.hpp"

namespace sirb {

/// Raised when a closed-form classification disagrees with the numeric
/// eigenvalues of the same matrix.
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

using Matrix4 = Eigen::Matrix4d;
using Spectrum4 = std::array<std::complex<double>, 4>;

struct Jacobian4 {
  Matrix4 m = Matrix4::Zero();
  std::string source = "numeric";  // Z1..Z4 tag label or "numeric"
};

/// Analytic partials df_i/du_j.
Jacobian4 jacobian(const State4& z, const ModelParams& p);
Jacobian4 jacobian(const SteadyState& z, const ModelParams& p);

struct DiffusionMatrix {
  std::array<double, kSpecies> a{1.0, 1.0, 1.0, 1.0};
  void validate() const;
};

/// J - lambda * diag(a).
Matrix4 mode_matrix(const Jacobian4& j, const DiffusionMatrix& a, double lambda);

/// All four eigenvalues, sorted by real part (then imaginary part)
/// descending. Throws DomainError on non-finite input.
Spectrum4 eigenvalues4(const Matrix4& m);

/// Real part of the eigenvector of the eigenvalue with largest real part,
/// scaled so its largest component has magnitude 1.
std::array<double, kSpecies> leading_direction(const Matrix4& m);

struct CubicCoeffs {
  double p = 0.0;
  double q = 0.0;
  double h = 0.0;
};

enum class CubicClass { HasPositiveRoot, AllNegativeRealParts, HasPositiveRealPart, Boundary };
std::string to_string(CubicClass c);

struct CubicVerdict {
  CubicClass cls = CubicClass::Boundary;
  /// -p, +sqrt(-q), -sqrt(-q) when cls == Boundary.
  std::array<std::complex<double>, 3> boundary_roots{};
};

/// Classification of mu^3 + p mu^2 + q mu + h. Requires p > 0.
/// Order of tests: pq = h (within tolerance), then h < 0, then pq < h.
CubicVerdict classify_cubic(const CubicCoeffs& c);

enum class Verdict { Stable, Unstable, Marginal };
std::string to_string(Verdict v);

/// Below this magnitude a leading real part counts as marginal.
double marginal_tolerance(const Matrix4& m);

struct ModeVerdict {
  int index = 0;
  double lambda = 0.0;
  Spectrum4 eigenvalues{};
  double max_real = 0.0;
  Verdict verdict = Verdict::Marginal;
  /// Verdict from the closed-form factorization for this state type.
  std::optional<Verdict> closed_form;
  /// Cubic of the (S, I, R) block where the state type uses one.
  std::optional<CubicCoeffs> cubic;
};

struct Theorem22Margins {
  double b0_bound = 0.0;  // B0 = |b_s(S*)|
  double g0_bound = 0.0;  // G0 = |g2_s(B*)|
  double margin_b = 0.0;  // d1 - B0
  double margin_g = 0.0;  // d4 - G0
  RegimeReport conditions;
};

Theorem22Margins theorem22_margins(const SteadyState& z, const ModelParams& p);

struct StabilityAux {
  std::optional<double> m0, M1, M2;          // Z2, lambda = 0
  std::optional<double> L0, p0, q0, h0;      // Z3/Z4 cubic at lambda = 0
  double B0 = 0.0;
  double G0 = 0.0;
};

struct StabilityReport {
  SteadyState state;
  std::vector<ModeVerdict> modes;
  Verdict overall = Verdict::Marginal;
  bool turing = false;
  /// Every mode with lambda above this is certified stable by Gershgorin.
  double tail_threshold = 0.0;
  bool tail_certified = false;
  /// Z4 only: whether the (S, I, R) + decoupled-B reduction reproduces the
  /// full 4x4 verdict at every listed mode.
  std::optional<bool> reduction_agrees;
  StabilityAux aux;
  Theorem22Margins margins;
};

/// Throws ConsistencyError on closed-form/numeric disagreement and
/// DomainError if the first mode is not lambda = 0.
StabilityReport classify_state(const SteadyState& z, const ModelParams& p,
                               const DiffusionMatrix& a, const ModeSpectrum& modes);

}  // namespace sirb
