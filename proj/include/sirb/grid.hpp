// Cell-centered interval/rectangle grids with zero-flux (homogeneous
// Neumann) boundaries, the flux-form variable-coefficient diffusion
// operator, and the analytic Neumann Laplacian spectrum.

#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace sirb {

class Grid {
 public:
  /// Throws DomainError for fewer than 3 cells per axis or non-positive length.
  static Grid line(double length, int cells);
  static Grid rectangle(double lx, double ly, int nx, int ny);

  int dim() const { return dim_; }
  double length(int axis) const { return lengths_[axis]; }
  int cells(int axis) const { return cells_[axis]; }
  double spacing(int axis) const { return lengths_[axis] / cells_[axis]; }
  std::size_t size() const { return static_cast<std::size_t>(cells_[0]) * cells_[1]; }
  double cell_volume() const;

  std::size_t index(int ix, int iy = 0) const {
    return static_cast<std::size_t>(iy) * cells_[0] + ix;
  }
  /// Cell-center coordinate along `axis`.
  double center(int axis, int i) const { return (i + 0.5) * spacing(axis); }

  bool operator==(const Grid&) const = default;

 private:
  Grid(int dim, std::array<double, 2> lengths, std::array<int, 2> cells);

  int dim_ = 1;
  std::array<double, 2> lengths_{1.0, 1.0};
  std::array<int, 2> cells_{3, 1};
};

struct ScalarField {
  Grid grid;
  std::vector<double> values;

  explicit ScalarField(const Grid& g, double fill = 0.0) : grid(g), values(g.size(), fill) {}
  ScalarField(const Grid& g, std::vector<double> v);

  double sup_norm() const;
  double min() const;
  /// Sum of value * cell volume.
  double integral() const;
};

enum class Profile {
  Linear,     // params: left, right; varies along x
  Cosine,     // params: mean, amplitude, mode; mean + amplitude*cos(mode*pi*x/Lx)
  Pulsating,  // params: mean, amplitude, omega; mean*(1 + amplitude*sin(omega*t))
};

Profile parse_profile(const std::string& name);
std::string to_string(Profile p);

/// A diffusion coefficient (or per-cell rate) a(x, t). Constructed values
/// are checked against 0 < a0 <= a <= A0.
class CoefficientField {
 public:
  struct Constant { double value; };
  struct Samples { std::vector<double> values; };
  struct Analytic { Profile profile; std::vector<double> params; };

  /// Unit constant coefficient.
  CoefficientField() : CoefficientField(Constant{1.0}) {}

  static CoefficientField constant(double value);
  static CoefficientField samples(std::vector<double> values);
  static CoefficientField analytic(Profile profile, std::vector<double> params);

  /// Values at cell centers at time t.
  std::vector<double> sample(const Grid& g, double t = 0.0) const;

  double lower_bound() const { return lower_; }
  double upper_bound() const { return upper_; }
  bool is_constant() const { return std::holds_alternative<Constant>(kind_); }
  /// Time-independent fields need sampling only once per run.
  bool time_dependent() const;

  const std::variant<Constant, Samples, Analytic>& kind() const { return kind_; }

 private:
  explicit CoefficientField(std::variant<Constant, Samples, Analytic> kind);

  std::variant<Constant, Samples, Analytic> kind_;
  double lower_ = 0.0;
  double upper_ = 0.0;
};

/// out = div(a grad u) with arithmetic-mean face coefficients and zero
/// boundary flux. `a` holds per-cell coefficients.
void apply_diffusion(const Grid& g, std::span<const double> u, std::span<const double> a,
                     std::span<double> out);

ScalarField apply_diffusion(const ScalarField& u, std::span<const double> a);
ScalarField apply_diffusion(const ScalarField& u, const CoefficientField& a, double t = 0.0);

/// Precomputed face weights a_face / h^2 for repeated application, as in
/// the implicit solve. Same stencil as apply_diffusion.
class DiffusionOperator {
 public:
  DiffusionOperator(const Grid& g, std::span<const double> a);

  void apply(std::span<const double> u, std::span<double> out) const;
  /// Diagonal entries of the operator (all <= 0).
  const std::vector<double>& diagonal() const { return diag_; }
  const Grid& grid() const { return grid_; }

 private:
  Grid grid_;
  std::vector<double> wx_;  // (nx-1) * ny interior x-faces
  std::vector<double> wy_;  // nx * (ny-1) interior y-faces
  std::vector<double> diag_;
};

struct Mode {
  int index = 0;
  double lambda = 0.0;
  int kx = 0;
  int ky = 0;
  std::string profile;  // e.g. "cos(2*pi*x/Lx)"
};

struct ModeSpectrum {
  std::vector<Mode> modes;
  std::size_t size() const { return modes.size(); }
  const Mode& operator[](std::size_t j) const { return modes.at(j); }
};

/// First `count` eigenvalues of -Laplace with Neumann boundaries, sorted,
/// repeated with multiplicity. Ties are ordered by (kx, ky).
ModeSpectrum neumann_modes(const Grid& g, int count);

/// Amplitude of the unit-amplitude cosine profile of `mode` in u, i.e.
/// sum(u*phi) / sum(phi*phi). Throws DomainError if the grid cannot
/// represent the mode.
double project_mode(const ScalarField& u, const Mode& mode);

/// Unit-amplitude cosine profile sampled at cell centers.
std::vector<double> mode_profile(const Grid& g, const Mode& mode);

/// CSV with one row per cell: x[,y],value.
void write_csv(std::ostream& os, const ScalarField& u, const std::string& value_name = "value");
void write_csv(std::ostream& os, const Grid& g, const CoefficientField& a, double t = 0.0);

}  // namespace sirb
