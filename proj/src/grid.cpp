#include "sirb/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <tuple>

#include "sirb/format.hpp"
#include "sirb/model.hpp"

namespace sirb {

namespace {

constexpr double kPi = std::numbers::pi;

void check_axis(double length, int cells, const char* axis) {
  if (!(length > 0.0) || !std::isfinite(length)) {
    throw DomainError(std::string("grid length along ") + axis + " must be positive");
  }
  if (cells < 3) {
    throw DomainError(std::string("grid needs at least 3 cells along ") + axis);
  }
}

void check_same_grid(const Grid& g, std::size_t n, const char* what) {
  if (n != g.size()) {
    throw DomainError(std::string("grid mismatch: ") + what + " has " + std::to_string(n) +
                      " entries, grid has " + std::to_string(g.size()) + " cells");
  }
}

}  // namespace

Grid::Grid(int dim, std::array<double, 2> lengths, std::array<int, 2> cells)
    : dim_(dim), lengths_(lengths), cells_(cells) {}

Grid Grid::line(double length, int cells) {
  check_axis(length, cells, "x");
  return Grid(1, {length, 1.0}, {cells, 1});
}

Grid Grid::rectangle(double lx, double ly, int nx, int ny) {
  check_axis(lx, nx, "x");
  check_axis(ly, ny, "y");
  return Grid(2, {lx, ly}, {nx, ny});
}

double Grid::cell_volume() const {
  return dim_ == 1 ? spacing(0) : spacing(0) * spacing(1);
}

ScalarField::ScalarField(const Grid& g, std::vector<double> v) : grid(g), values(std::move(v)) {
  check_same_grid(grid, values.size(), "field");
}

double ScalarField::sup_norm() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

double ScalarField::min() const {
  return *std::min_element(values.begin(), values.end());
}

double ScalarField::integral() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s * grid.cell_volume();
}

Profile parse_profile(const std::string& name) {
  if (name == "linear") return Profile::Linear;
  if (name == "cosine") return Profile::Cosine;
  if (name == "pulsating") return Profile::Pulsating;
  throw DomainError("unknown coefficient profile '" + name + "'");
}

std::string to_string(Profile p) {
  switch (p) {
    case Profile::Linear: return "linear";
    case Profile::Cosine: return "cosine";
    case Profile::Pulsating: return "pulsating";
  }
  return "?";
}

CoefficientField::CoefficientField(std::variant<Constant, Samples, Analytic> kind)
    : kind_(std::move(kind)) {
  if (const auto* c = std::get_if<Constant>(&kind_)) {
    lower_ = upper_ = c->value;
  } else if (const auto* s = std::get_if<Samples>(&kind_)) {
    if (s->values.empty()) throw DomainError("coefficient samples are empty");
    auto [lo, hi] = std::minmax_element(s->values.begin(), s->values.end());
    lower_ = *lo;
    upper_ = *hi;
  } else {
    const auto& a = std::get<Analytic>(kind_);
    if (a.params.size() != 3 && !(a.profile == Profile::Linear && a.params.size() == 2)) {
      throw DomainError("profile '" + to_string(a.profile) + "' has wrong parameter count");
    }
    switch (a.profile) {
      case Profile::Linear:
        lower_ = std::min(a.params[0], a.params[1]);
        upper_ = std::max(a.params[0], a.params[1]);
        break;
      case Profile::Cosine:
        lower_ = a.params[0] - std::abs(a.params[1]);
        upper_ = a.params[0] + std::abs(a.params[1]);
        if (a.params[2] < 0 || a.params[2] != std::floor(a.params[2])) {
          throw DomainError("cosine profile mode must be a nonnegative integer");
        }
        break;
      case Profile::Pulsating:
        lower_ = a.params[0] * (1.0 - std::abs(a.params[1]));
        upper_ = a.params[0] * (1.0 + std::abs(a.params[1]));
        break;
    }
  }
  if (!(lower_ > 0.0) || !std::isfinite(upper_)) {
    throw DomainError("coefficient must satisfy 0 < a0 <= a <= A0 (lower bound " +
                      std::to_string(lower_) + ")");
  }
}

CoefficientField CoefficientField::constant(double value) {
  return CoefficientField(Constant{value});
}

CoefficientField CoefficientField::samples(std::vector<double> values) {
  return CoefficientField(Samples{std::move(values)});
}

CoefficientField CoefficientField::analytic(Profile profile, std::vector<double> params) {
  return CoefficientField(Analytic{profile, std::move(params)});
}

bool CoefficientField::time_dependent() const {
  const auto* a = std::get_if<Analytic>(&kind_);
  return a && a->profile == Profile::Pulsating;
}

std::vector<double> CoefficientField::sample(const Grid& g, double t) const {
  std::vector<double> out(g.size());
  if (const auto* c = std::get_if<Constant>(&kind_)) {
    std::fill(out.begin(), out.end(), c->value);
    return out;
  }
  if (const auto* s = std::get_if<Samples>(&kind_)) {
    check_same_grid(g, s->values.size(), "coefficient samples");
    return s->values;
  }
  const auto& a = std::get<Analytic>(kind_);
  const int nx = g.cells(0), ny = g.cells(1);
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      const double x = g.center(0, ix);
      double v = 0.0;
      switch (a.profile) {
        case Profile::Linear:
          v = a.params[0] + (a.params[1] - a.params[0]) * x / g.length(0);
          break;
        case Profile::Cosine:
          v = a.params[0] + a.params[1] * std::cos(a.params[2] * kPi * x / g.length(0));
          break;
        case Profile::Pulsating:
          v = a.params[0] * (1.0 + a.params[1] * std::sin(a.params[2] * t));
          break;
      }
      out[g.index(ix, iy)] = v;
    }
  }
  return out;
}

void apply_diffusion(const Grid& g, std::span<const double> u, std::span<const double> a,
                     std::span<double> out) {
  check_same_grid(g, u.size(), "field");
  check_same_grid(g, a.size(), "coefficient");
  check_same_grid(g, out.size(), "output");
  const int nx = g.cells(0), ny = g.cells(1);
  const double hx = g.spacing(0);
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      const std::size_t c = g.index(ix, iy);
      double fl = 0.0, fr = 0.0;
      if (ix > 0) {
        const std::size_t w = g.index(ix - 1, iy);
        fl = 0.5 * (a[w] + a[c]) * (u[c] - u[w]) / hx;
      }
      if (ix + 1 < nx) {
        const std::size_t e = g.index(ix + 1, iy);
        fr = 0.5 * (a[c] + a[e]) * (u[e] - u[c]) / hx;
      }
      double div = (fr - fl) / hx;
      if (g.dim() == 2) {
        const double hy = g.spacing(1);
        double fs = 0.0, fn = 0.0;
        if (iy > 0) {
          const std::size_t s = g.index(ix, iy - 1);
          fs = 0.5 * (a[s] + a[c]) * (u[c] - u[s]) / hy;
        }
        if (iy + 1 < ny) {
          const std::size_t n = g.index(ix, iy + 1);
          fn = 0.5 * (a[c] + a[n]) * (u[n] - u[c]) / hy;
        }
        div += (fn - fs) / hy;
      }
      out[c] = div;
    }
  }
}

ScalarField apply_diffusion(const ScalarField& u, std::span<const double> a) {
  ScalarField out(u.grid);
  apply_diffusion(u.grid, u.values, a, out.values);
  return out;
}

ScalarField apply_diffusion(const ScalarField& u, const CoefficientField& a, double t) {
  const auto samples = a.sample(u.grid, t);
  return apply_diffusion(u, samples);
}

DiffusionOperator::DiffusionOperator(const Grid& g, std::span<const double> a) : grid_(g) {
  check_same_grid(g, a.size(), "coefficient");
  const int nx = g.cells(0), ny = g.cells(1);
  const double hx2 = g.spacing(0) * g.spacing(0);
  diag_.assign(g.size(), 0.0);
  wx_.resize(static_cast<std::size_t>(nx - 1) * ny);
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix + 1 < nx; ++ix) {
      const std::size_t c = g.index(ix, iy), e = g.index(ix + 1, iy);
      const double w = 0.5 * (a[c] + a[e]) / hx2;
      wx_[static_cast<std::size_t>(iy) * (nx - 1) + ix] = w;
      diag_[c] -= w;
      diag_[e] -= w;
    }
  }
  if (g.dim() == 2) {
    const double hy2 = g.spacing(1) * g.spacing(1);
    wy_.resize(static_cast<std::size_t>(nx) * (ny - 1));
    for (int iy = 0; iy + 1 < ny; ++iy) {
      for (int ix = 0; ix < nx; ++ix) {
        const std::size_t c = g.index(ix, iy), n = g.index(ix, iy + 1);
        const double w = 0.5 * (a[c] + a[n]) / hy2;
        wy_[static_cast<std::size_t>(iy) * nx + ix] = w;
        diag_[c] -= w;
        diag_[n] -= w;
      }
    }
  }
}

void DiffusionOperator::apply(std::span<const double> u, std::span<double> out) const {
  const Grid& g = grid_;
  const int nx = g.cells(0), ny = g.cells(1);
  for (int iy = 0; iy < ny; ++iy) {
    const double* wrow = wx_.data() + static_cast<std::size_t>(iy) * (nx - 1);
    for (int ix = 0; ix < nx; ++ix) {
      const std::size_t c = g.index(ix, iy);
      double v = 0.0;
      if (ix + 1 < nx) v += wrow[ix] * (u[c + 1] - u[c]);
      if (ix > 0) v -= wrow[ix - 1] * (u[c] - u[c - 1]);
      out[c] = v;
    }
  }
  if (g.dim() == 2) {
    for (int iy = 0; iy < ny; ++iy) {
      for (int ix = 0; ix < nx; ++ix) {
        const std::size_t c = g.index(ix, iy);
        double v = 0.0;
        if (iy + 1 < ny) v += wy_[c] * (u[c + nx] - u[c]);
        if (iy > 0) v -= wy_[c - nx] * (u[c] - u[c - nx]);
        out[c] += v;
      }
    }
  }
}

ModeSpectrum neumann_modes(const Grid& g, int count) {
  if (count < 1) throw DomainError("mode count must be >= 1");
  ModeSpectrum spec;
  auto describe = [&](int kx, int ky) {
    std::string s = "cos(" + std::to_string(kx) + "*pi*x/Lx)";
    if (g.dim() == 2) s += "*cos(" + std::to_string(ky) + "*pi*y/Ly)";
    return s;
  };
  const double lx = g.length(0);
  if (g.dim() == 1) {
    for (int j = 0; j < count; ++j) {
      const double k = j * kPi / lx;
      spec.modes.push_back({j, k * k, j, 0, describe(j, 0)});
    }
    return spec;
  }
  // Any (kx, ky) among the first `count` has kx, ky < count.
  const double ly = g.length(1);
  std::vector<std::tuple<double, int, int>> all;
  all.reserve(static_cast<std::size_t>(count) * count);
  for (int kx = 0; kx < count; ++kx) {
    for (int ky = 0; ky < count; ++ky) {
      const double ax = kx * kPi / lx, ay = ky * kPi / ly;
      all.emplace_back(ax * ax + ay * ay, kx, ky);
    }
  }
  std::partial_sort(all.begin(), all.begin() + count, all.end());
  for (int j = 0; j < count; ++j) {
    const auto& [lam, kx, ky] = all[j];
    spec.modes.push_back({j, lam, kx, ky, describe(kx, ky)});
  }
  return spec;
}

std::vector<double> mode_profile(const Grid& g, const Mode& mode) {
  if (mode.kx < 0 || mode.ky < 0 || mode.kx >= g.cells(0) ||
      (g.dim() == 1 ? mode.ky != 0 : mode.ky >= g.cells(1))) {
    throw DomainError("mode " + mode.profile + " is not representable on this grid");
  }
  std::vector<double> phi(g.size());
  for (int iy = 0; iy < g.cells(1); ++iy) {
    const double cy =
        g.dim() == 2 ? std::cos(mode.ky * kPi * g.center(1, iy) / g.length(1)) : 1.0;
    for (int ix = 0; ix < g.cells(0); ++ix) {
      phi[g.index(ix, iy)] = std::cos(mode.kx * kPi * g.center(0, ix) / g.length(0)) * cy;
    }
  }
  return phi;
}

double project_mode(const ScalarField& u, const Mode& mode) {
  const auto phi = mode_profile(u.grid, mode);
  double num = 0.0, den = 0.0;
  for (std::size_t c = 0; c < phi.size(); ++c) {
    num += u.values[c] * phi[c];
    den += phi[c] * phi[c];
  }
  return num / den;
}

void write_csv(std::ostream& os, const ScalarField& u, const std::string& value_name) {
  const Grid& g = u.grid;
  os << (g.dim() == 1 ? "x," : "x,y,") << value_name << '\n';
  for (int iy = 0; iy < g.cells(1); ++iy) {
    for (int ix = 0; ix < g.cells(0); ++ix) {
      os << format_double(g.center(0, ix)) << ',';
      if (g.dim() == 2) os << format_double(g.center(1, iy)) << ',';
      os << format_double(u.values[g.index(ix, iy)]) << '\n';
    }
  }
}

void write_csv(std::ostream& os, const Grid& g, const CoefficientField& a, double t) {
  write_csv(os, ScalarField(g, a.sample(g, t)), "coefficient");
}

}  // namespace sirb
