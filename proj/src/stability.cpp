#include "sirb/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sirb/format.hpp"

namespace sirb {

namespace {

using cd = std::complex<double>;

double inf_norm(const Matrix4& m) {
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

Verdict verdict_of(double max_real, double tol) {
  if (std::abs(max_real) < tol) return Verdict::Marginal;
  return max_real > 0.0 ? Verdict::Unstable : Verdict::Stable;
}

void sort_desc(std::vector<cd>& v) {
  std::sort(v.begin(), v.end(), [](const cd& x, const cd& y) {
    if (x.real() != y.real()) return x.real() > y.real();
    return x.imag() > y.imag();
  });
}

/// Largest distance from a closed-form eigenvalue to its greedily matched
/// numeric counterpart.
double spectrum_deviation(const std::vector<cd>& closed, const Spectrum4& numeric) {
  std::array<bool, 4> used{};
  double worst = 0.0;
  for (const cd& c : closed) {
    double best = std::numeric_limits<double>::infinity();
    int pick = -1;
    for (int k = 0; k < 4; ++k) {
      if (used[k]) continue;
      const double d = std::abs(c - numeric[k]);
      if (d < best) {
        best = d;
        pick = k;
      }
    }
    used[pick] = true;
    worst = std::max(worst, best);
  }
  return worst;
}

/// Power-of-two diagonal balancing (Parlett-Reinsch). Exact similarity.
Matrix4 balance(Matrix4 m) {
  constexpr double radix = 2.0;
  bool done = false;
  for (int sweep = 0; sweep < 100 && !done; ++sweep) {
    done = true;
    for (int i = 0; i < 4; ++i) {
      double c = 0.0, r = 0.0;
      for (int j = 0; j < 4; ++j) {
        if (j == i) continue;
        c += std::abs(m(j, i));
        r += std::abs(m(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      double g = r / radix, f = 1.0;
      const double s = c + r;
      while (c < g) {
        f *= radix;
        c *= radix * radix;
      }
      g = r * radix;
      while (c > g) {
        f /= radix;
        c /= radix * radix;
      }
      if ((c + r) / f < 0.95 * s) {
        done = false;
        m.row(i) /= f;
        m.col(i) *= f;
      }
    }
  }
  return m;
}

struct ClosedForm {
  std::optional<Verdict> verdict;
  std::vector<cd> eigenvalues;  // empty when the form does not give all four
  std::optional<CubicCoeffs> cubic;
  bool cubic_exact = false;  // cubic is the exact (S, I, R) block polynomial
  std::optional<Verdict> cubic_block_verdict;
};

Verdict cubic_block_verdict(const CubicCoeffs& c) {
  if (!(c.p > 0.0)) {
    // Roots sum to -p >= 0: a root with nonnegative real part.
    return c.p < 0.0 ? Verdict::Unstable : Verdict::Marginal;
  }
  switch (classify_cubic(c).cls) {
    case CubicClass::HasPositiveRoot:
    case CubicClass::HasPositiveRealPart: return Verdict::Unstable;
    case CubicClass::AllNegativeRealParts: return Verdict::Stable;
    case CubicClass::Boundary: return Verdict::Marginal;
  }
  return Verdict::Marginal;
}

Verdict combine(Verdict block, double decoupled, double tol) {
  const Verdict d = verdict_of(decoupled, tol);
  if (block == Verdict::Unstable || d == Verdict::Unstable) return Verdict::Unstable;
  if (block == Verdict::Stable && d == Verdict::Stable) return Verdict::Stable;
  return Verdict::Marginal;
}

/// Characteristic cubic mu^3 + p mu^2 + q mu + h of a 3x3 matrix.
CubicCoeffs cubic_of(const Eigen::Matrix3d& m) {
  const double minors = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0) + m(0, 0) * m(2, 2) -
                        m(0, 2) * m(2, 0) + m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1);
  return {-m.trace(), minors, -m.determinant()};
}

ClosedForm closed_form(SteadyTag tag, const State4& z, const ModelParams& p,
                       const DiffusionMatrix& a, double lambda, double tol) {
  ClosedForm out;
  const double la1 = lambda * a.a[0], la2 = lambda * a.a[1];
  const double la3 = lambda * a.a[2], la4 = lambda * a.a[3];
  switch (tag) {
    case SteadyTag::Z1: {
      out.eigenvalues = {cd(p.b0 - p.d1 - la1), cd(-(p.d2 + p.gamma) - la2),
                         cd(-(p.d3 + p.sigma) - la3), cd(p.g0 - p.d4 - la4)};
      double mx = -std::numeric_limits<double>::infinity();
      for (const cd& e : out.eigenvalues) mx = std::max(mx, e.real());
      out.verdict = verdict_of(mx, tol);
      break;
    }
    case SteadyTag::Z2: {
      const double s = z[0];
      const double gain = p.beta1 * s - (p.d2 + p.gamma + la2);
      const double bact = p.g0 - p.d4 - la4;
      const double m1 = gain + bact;
      const double m2 = gain * bact - p.xi * p.beta2 * s / p.k2;
      const cd root = std::sqrt(cd(m1 * m1 - 4.0 * m2));
      const double mu1 = -(p.b0 - p.d1) - la1;
      const double mu2 = -(p.d3 + p.sigma) - la3;
      out.eigenvalues = {cd(mu1), cd(mu2), 0.5 * (m1 + root), 0.5 * (m1 - root)};
      const bool unstable = mu1 > tol || mu2 > tol || m1 > tol || m2 < -tol * tol;
      const bool stable = mu1 < -tol && mu2 < -tol && m1 < -tol && m2 > tol * tol;
      out.verdict = unstable ? Verdict::Unstable : stable ? Verdict::Stable : Verdict::Marginal;
      break;
    }
    case SteadyTag::Z3: {
      const double eta = p.beta2 * z[3] / (z[3] + p.k2);
      const double e1 = p.b0 - p.d1 - eta - la1;
      const double m2 = p.d2 + p.gamma + la2;
      const double m3 = p.d3 + p.sigma + la3;
      CubicCoeffs c{m2 + m3 - e1, m2 * m3 - e1 * (m2 + m3), -e1 * m2 * m3 - p.sigma * p.gamma * eta};
      out.cubic = c;
      out.cubic_exact = true;
      out.cubic_block_verdict = cubic_block_verdict(c);
      out.verdict = combine(*out.cubic_block_verdict, -(p.g0 - p.d4) - la4, tol);
      break;
    }
    case SteadyTag::Z4BranchS1:
    case SteadyTag::Z4BranchS2: {
      const double s = z[0], i = z[1], b = z[3];
      const double h1 = b / (b + p.k2);
      const double l0 = (p.d1 - p.b0) + 2.0 * p.b0 * s / p.k1 + p.beta1 * i + p.beta2 * h1;
      const double a1 = l0 + la1;
      const double a2 = p.d2 + p.gamma - p.beta1 * s + la2;
      const double a3 = p.d3 + p.sigma + la3;
      const double c12 = p.beta1 * s;
      const double c21 = p.beta1 * i + p.beta2 * h1;
      CubicCoeffs c{a1 + a2 + a3, a1 * a2 + c12 * c21 + a1 * a3 + a2 * a3,
                    a3 * (a1 * a2 + c12 * c21) - p.sigma * p.gamma * c21};
      out.cubic = c;
      out.cubic_exact = true;
      out.cubic_block_verdict = cubic_block_verdict(c);
      const double mu4 = p.g0 * (1.0 - 2.0 * b / p.k3) - p.d4 - la4;
      out.verdict = combine(*out.cubic_block_verdict, mu4, tol);
      break;
    }
  }
  return out;
}

}  // namespace

Jacobian4 jacobian(const State4& z, const ModelParams& p) {
  for (double v : z) {
    if (!(v >= 0.0)) throw DomainError("jacobian requires a nonnegative state");
  }
  const double s = z[0], i = z[1], b = z[3];
  const double h1 = b / (b + p.k2);
  const double dh1 = p.k2 / ((b + p.k2) * (b + p.k2));
  Jacobian4 j;
  auto& m = j.m;
  m(0, 0) = p.b0 * (1.0 - 2.0 * s / p.k1) - p.beta1 * i - p.beta2 * h1 - p.d1;
  m(0, 1) = -p.beta1 * s;
  m(0, 2) = p.sigma;
  m(0, 3) = -p.beta2 * s * dh1;
  m(1, 0) = p.beta1 * i + p.beta2 * h1;
  m(1, 1) = p.beta1 * s - (p.d2 + p.gamma);
  m(1, 2) = 0.0;
  m(1, 3) = p.beta2 * s * dh1;
  m(2, 0) = 0.0;
  m(2, 1) = p.gamma;
  m(2, 2) = -(p.d3 + p.sigma);
  m(2, 3) = 0.0;
  m(3, 0) = 0.0;
  m(3, 1) = p.xi;
  m(3, 2) = 0.0;
  m(3, 3) = p.g0 * (1.0 - 2.0 * b / p.k3) - p.d4;
  return j;
}

Jacobian4 jacobian(const SteadyState& z, const ModelParams& p) {
  Jacobian4 j = jacobian(z.value, p);
  j.source = z.label();
  return j;
}

void DiffusionMatrix::validate() const {
  for (double v : a) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw DomainError("diffusion coefficients must be positive and finite");
    }
  }
}

Matrix4 mode_matrix(const Jacobian4& j, const DiffusionMatrix& a, double lambda) {
  if (!(lambda >= 0.0)) throw DomainError("mode eigenvalue must be >= 0");
  Matrix4 m = j.m;
  for (int k = 0; k < 4; ++k) m(k, k) -= lambda * a.a[k];
  return m;
}

Spectrum4 eigenvalues4(const Matrix4& m) {
  if (!m.allFinite()) throw DomainError("eigenvalues4: non-finite matrix entry");
  Eigen::EigenSolver<Matrix4> solver(balance(m), false);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("eigenvalues4: QR iteration did not converge");
  }
  std::vector<cd> ev(4);
  for (int k = 0; k < 4; ++k) ev[k] = solver.eigenvalues()[k];
  sort_desc(ev);
  return {ev[0], ev[1], ev[2], ev[3]};
}

std::array<double, kSpecies> leading_direction(const Matrix4& m) {
  if (!m.allFinite()) throw DomainError("leading_direction: non-finite matrix entry");
  Eigen::EigenSolver<Matrix4> solver(m, true);
  int best = 0;
  for (int k = 1; k < 4; ++k) {
    if (solver.eigenvalues()[k].real() > solver.eigenvalues()[best].real()) best = k;
  }
  const auto v = solver.eigenvectors().col(best);
  // Rotate the complex vector so its largest entry is real before taking
  // the real part.
  int big = 0;
  for (int k = 1; k < 4; ++k) {
    if (std::abs(v[k]) > std::abs(v[big])) big = k;
  }
  const cd phase = std::conj(v[big]) / std::abs(v[big]);
  std::array<double, kSpecies> out{};
  for (int k = 0; k < 4; ++k) out[k] = (v[k] * phase).real();
  const double scale = std::abs(out[big]);
  for (double& x : out) x /= scale;
  return out;
}

std::string to_string(CubicClass c) {
  switch (c) {
    case CubicClass::HasPositiveRoot: return "has-positive-root";
    case CubicClass::AllNegativeRealParts: return "all-negative-real-parts";
    case CubicClass::HasPositiveRealPart: return "has-positive-real-part";
    case CubicClass::Boundary: return "boundary";
  }
  return "?";
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Stable: return "stable";
    case Verdict::Unstable: return "unstable";
    case Verdict::Marginal: return "marginal";
  }
  return "?";
}

CubicVerdict classify_cubic(const CubicCoeffs& c) {
  if (!(c.p > 0.0)) throw DomainError("classify_cubic requires p > 0, got " + format_double(c.p));
  const double pq = c.p * c.q;
  const double tol = 1e-9 * (1.0 + std::abs(pq) + std::abs(c.h));
  CubicVerdict out;
  if (std::abs(pq - c.h) <= tol) {
    // (mu + p)(mu^2 + q)
    const cd r = std::sqrt(cd(-c.q));
    out.cls = CubicClass::Boundary;
    out.boundary_roots = {cd(-c.p), r, -r};
  } else if (c.h < 0.0) {
    out.cls = CubicClass::HasPositiveRoot;
  } else if (pq < c.h) {
    out.cls = CubicClass::HasPositiveRealPart;
  } else if (c.h > 0.0) {
    out.cls = CubicClass::AllNegativeRealParts;
  } else {
    // h == 0: a root at the origin.
    out.cls = CubicClass::Boundary;
    const cd disc = std::sqrt(cd(c.p * c.p - 4.0 * c.q));
    out.boundary_roots = {cd(0.0), 0.5 * (-c.p + disc), 0.5 * (-c.p - disc)};
  }
  return out;
}

double marginal_tolerance(const Matrix4& m) { return 1e-9 * (1.0 + inf_norm(m)); }

Theorem22Margins theorem22_margins(const SteadyState& z, const ModelParams& p) {
  Theorem22Margins out;
  const double s = z.value[0], b = z.value[3];
  out.b0_bound = std::abs(p.b0 * (1.0 - 2.0 * s / p.k1));
  out.g0_bound = std::abs(p.g0 * (1.0 - 2.0 * b / p.k3));
  out.margin_b = p.d1 - out.b0_bound;
  out.margin_g = p.d4 - out.g0_bound;
  out.conditions = check_regime(p, Regime::Thm22Candidate, z.value);
  return out;
}

StabilityReport classify_state(const SteadyState& z, const ModelParams& p,
                               const DiffusionMatrix& a, const ModeSpectrum& modes) {
  a.validate();
  if (modes.size() == 0 || modes[0].lambda != 0.0) {
    throw DomainError("classify_state needs the lambda = 0 mode first");
  }
  StabilityReport rep;
  rep.state = z;
  rep.margins = theorem22_margins(z, p);
  rep.aux.B0 = rep.margins.b0_bound;
  rep.aux.G0 = rep.margins.g0_bound;
  const Jacobian4 jac = jacobian(z, p);
  const bool endemic = z.tag == SteadyTag::Z4BranchS1 || z.tag == SteadyTag::Z4BranchS2;

  if (z.tag == SteadyTag::Z2) {
    const double s = z.value[0];
    const double gain = p.beta1 * s - (p.d2 + p.gamma);
    const double bact = p.g0 - p.d4;
    rep.aux.m0 = p.beta1 * s;
    rep.aux.M1 = gain + bact;
    rep.aux.M2 = gain * bact - p.xi * p.beta2 * s / p.k2;
  }
  if (endemic) {
    const double s = z.value[0], i = z.value[1], b = z.value[3];
    rep.aux.L0 = (p.d1 - p.b0) + 2.0 * p.b0 * s / p.k1 + p.beta1 * i + p.beta2 * b / (b + p.k2);
    rep.reduction_agrees = true;
  }

  bool any_unstable = false, all_stable = true;
  for (const Mode& mode : modes.modes) {
    const Matrix4 m = mode_matrix(jac, a, mode.lambda);
    const double tol = marginal_tolerance(m);
    ModeVerdict mv;
    mv.index = mode.index;
    mv.lambda = mode.lambda;
    mv.eigenvalues = eigenvalues4(m);
    mv.max_real = mv.eigenvalues[0].real();
    mv.verdict = verdict_of(mv.max_real, tol);

    const ClosedForm cf = closed_form(z.tag, z.value, p, a, mode.lambda, tol);
    mv.closed_form = cf.verdict;
    mv.cubic = cf.cubic;
    if (mode.lambda == 0.0 && cf.cubic && !rep.aux.p0) {
      rep.aux.p0 = cf.cubic->p;
      rep.aux.q0 = cf.cubic->q;
      rep.aux.h0 = cf.cubic->h;
    }
    if (!cf.eigenvalues.empty()) {
      const double dev = spectrum_deviation(cf.eigenvalues, mv.eigenvalues);
      if (dev > 1e-6 * (1.0 + inf_norm(m))) {
        throw ConsistencyError("closed-form eigenvalues of " + z.label() + " at lambda = " +
                               format_double(mode.lambda) + " deviate by " + format_double(dev));
      }
    }
    if (cf.cubic_exact) {
      // The cubic is exact for the (S, I, R) block; check it against that block.
      Eigen::Matrix3d block = m.topLeftCorner<3, 3>();
      const CubicCoeffs direct = cubic_of(block);
      const double n3 = 1.0 + block.cwiseAbs().rowwise().sum().maxCoeff();
      if (std::abs(direct.p - cf.cubic->p) > 1e-9 * n3 ||
          std::abs(direct.q - cf.cubic->q) > 1e-9 * n3 * n3 ||
          std::abs(direct.h - cf.cubic->h) > 1e-9 * n3 * n3 * n3) {
        throw ConsistencyError("closed-form cubic of " + z.label() + " at lambda = " +
                               format_double(mode.lambda) + " does not match its block");
      }
      Eigen::EigenSolver<Eigen::Matrix3d> es(block, false);
      double mx = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < 3; ++k) mx = std::max(mx, es.eigenvalues()[k].real());
      const Verdict numeric_block = verdict_of(mx, tol);
      if (numeric_block != Verdict::Marginal && *cf.cubic_block_verdict != Verdict::Marginal &&
          numeric_block != *cf.cubic_block_verdict) {
        throw ConsistencyError("cubic classification of " + z.label() + " at lambda = " +
                               format_double(mode.lambda) + " disagrees with its eigenvalues");
      }
    }
    if (cf.verdict && *cf.verdict != Verdict::Marginal && mv.verdict != Verdict::Marginal &&
        *cf.verdict != mv.verdict) {
      if (endemic) {
        rep.reduction_agrees = false;
      } else {
        throw ConsistencyError("closed-form verdict " + to_string(*cf.verdict) + " of " +
                               z.label() + " at lambda = " + format_double(mode.lambda) +
                               " disagrees with numeric verdict " + to_string(mv.verdict));
      }
    }
    any_unstable |= mv.verdict == Verdict::Unstable;
    all_stable &= mv.verdict == Verdict::Stable;
    rep.modes.push_back(std::move(mv));
  }

  // Gershgorin tail: for lambda > t every row (or every column) disc of
  // J - lambda*A lies strictly in the left half-plane.
  double t_row = -std::numeric_limits<double>::infinity();
  double t_col = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < 4; ++i) {
    double r = 0.0, c = 0.0;
    for (int j = 0; j < 4; ++j) {
      if (j == i) continue;
      r += std::abs(jac.m(i, j));
      c += std::abs(jac.m(j, i));
    }
    t_row = std::max(t_row, (jac.m(i, i) + r) / a.a[i]);
    t_col = std::max(t_col, (jac.m(i, i) + c) / a.a[i]);
  }
  const double t = std::min(t_row, t_col);
  rep.tail_threshold = std::max(t, 0.0);
  rep.tail_certified = t < 0.0 || modes.modes.back().lambda > t;

  if (any_unstable) {
    rep.overall = Verdict::Unstable;
  } else if (all_stable && rep.tail_certified) {
    rep.overall = Verdict::Stable;
  } else {
    rep.overall = Verdict::Marginal;
  }
  if (rep.modes.front().verdict == Verdict::Stable) {
    for (std::size_t k = 1; k < rep.modes.size(); ++k) {
      if (rep.modes[k].verdict == Verdict::Unstable) {
        rep.turing = true;
        break;
      }
    }
  }
  return rep;
}

}  // namespace sirb
