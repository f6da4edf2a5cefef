#include "sirb/model.hpp"

#include <cmath>
#include <string>

namespace sirb {

namespace {

struct FieldRef {
  const char* name;
  double ModelParams::*member;
};

constexpr FieldRef kFields[] = {
    {"b0", &ModelParams::b0},         {"k1", &ModelParams::k1},
    {"beta1", &ModelParams::beta1},   {"beta2", &ModelParams::beta2},
    {"k2", &ModelParams::k2},         {"g0", &ModelParams::g0},
    {"k3", &ModelParams::k3},         {"d1", &ModelParams::d1},
    {"d2", &ModelParams::d2},         {"d3", &ModelParams::d3},
    {"d4", &ModelParams::d4},         {"sigma", &ModelParams::sigma},
    {"gamma", &ModelParams::gamma},   {"xi", &ModelParams::xi},
};

bool is_death_rate(std::string_view name) {
  return name.size() == 2 && name[0] == 'd';
}

void require_nonnegative(double v, const char* what) {
  if (!(v >= 0.0)) {
    throw DomainError(std::string(what) + " must be >= 0, got " + std::to_string(v));
  }
}

}  // namespace

void ModelParams::validate() const {
  for (const auto& f : kFields) {
    const double v = this->*f.member;
    if (!std::isfinite(v)) {
      throw DomainError(std::string("parameter '") + f.name + "' must be finite");
    }
    if (is_death_rate(f.name)) {
      if (v < 0.0) {
        throw DomainError(std::string("parameter '") + f.name + "' must be >= 0, got " +
                          std::to_string(v));
      }
    } else if (!(v > 0.0)) {
      throw DomainError(std::string("parameter '") + f.name + "' must be > 0, got " +
                        std::to_string(v));
    }
  }
}

double ModelParams::get(std::string_view name) const {
  for (const auto& f : kFields) {
    if (name == f.name) return this->*f.member;
  }
  throw DomainError("unknown parameter '" + std::string(name) + "'");
}

void ModelParams::set(std::string_view name, double value) {
  for (const auto& f : kFields) {
    if (name == f.name) {
      this->*f.member = value;
      return;
    }
  }
  throw DomainError("unknown parameter '" + std::string(name) + "'");
}

const std::vector<std::string>& ModelParams::field_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& f : kFields) out.emplace_back(f.name);
    return out;
  }();
  return names;
}

double ReactionVector::operator[](int i) const {
  switch (i) {
    case 0: return f1;
    case 1: return f2;
    case 2: return f3;
    case 3: return f4;
    default: throw std::out_of_range("ReactionVector index");
  }
}

double logistic_b(double s, const ModelParams& p) {
  require_nonnegative(s, "S");
  return p.b0 * s * (1.0 - s / p.k1);
}

double saturation_h1(double bacteria, const ModelParams& p) {
  require_nonnegative(bacteria, "B");
  return bacteria / (bacteria + p.k2);
}

double saturation_h1_prime(double bacteria, const ModelParams& p) {
  require_nonnegative(bacteria, "B");
  const double den = bacteria + p.k2;
  return p.k2 / (den * den);
}

double infection_g1(double s, double i, double bacteria, const ModelParams& p) {
  require_nonnegative(s, "S");
  require_nonnegative(i, "I");
  return p.beta1 * s * i + p.beta2 * s * saturation_h1(bacteria, p);
}

double bacterial_g2(double bacteria, const ModelParams& p) {
  require_nonnegative(bacteria, "B");
  return p.g0 * bacteria * (1.0 - bacteria / p.k3);
}

ReactionVector reaction_rhs_unchecked(const State4& u, const ModelParams& p) noexcept {
  const double s = u[0], i = u[1], r = u[2], b = u[3];
  const double g1 = p.beta1 * s * i + p.beta2 * s * (b / (b + p.k2));
  ReactionVector out;
  out.f1 = p.b0 * s * (1.0 - s / p.k1) - g1 - p.d1 * s + p.sigma * r;
  out.f2 = g1 - (p.d2 + p.gamma) * i;
  out.f3 = p.gamma * i - (p.d3 + p.sigma) * r;
  out.f4 = p.xi * i + p.g0 * b * (1.0 - b / p.k3) - p.d4 * b;
  return out;
}

ReactionVector reaction_rhs(const State4& u, const ModelParams& p) {
  static constexpr const char* kNames[] = {"S", "I", "R", "B"};
  for (int k = 0; k < kSpecies; ++k) require_nonnegative(u[k], kNames[k]);
  return reaction_rhs_unchecked(u, p);
}

Regime parse_regime(std::string_view name) {
  if (name == "H23") return Regime::H23;
  if (name == "Cor21") return Regime::Cor21;
  if (name == "H51") return Regime::H51;
  if (name == "Thm22-candidate") return Regime::Thm22Candidate;
  throw DomainError("unknown regime '" + std::string(name) + "'");
}

std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::H23: return "H23";
    case Regime::Cor21: return "Cor21";
    case Regime::H51: return "H51";
    case Regime::Thm22Candidate: return "Thm22-candidate";
  }
  return "?";
}

bool RegimeReport::all_satisfied() const {
  for (const auto& c : conditions) {
    if (!c.satisfied()) return false;
  }
  return true;
}

RegimeReport check_regime(const ModelParams& p, Regime regime,
                          const std::optional<State4>& state) {
  RegimeReport rep;
  rep.regime = regime;
  auto add = [&](std::string d, double margin, bool strict) {
    rep.conditions.push_back({std::move(d), margin, strict});
  };
  switch (regime) {
    case Regime::H23:
      // Structural conditions of the concrete nonlinearities. b_s and g2_s
      // attain their supremum b0 (resp. g0) at zero density.
      add("b(0) >= 0", 0.0, false);
      add("sup_s b_s(s) <= b0", 0.0, false);
      add("g1(0, I, B) >= 0", 0.0, false);
      add("g2(0) >= 0", 0.0, false);
      add("sup_s g2_s(s) <= g0", 0.0, false);
      add("d1 >= 0", p.d1, false);
      add("d2 >= 0", p.d2, false);
      add("d3 >= 0", p.d3, false);
      add("d4 >= 0", p.d4, false);
      break;
    case Regime::Cor21:
      add("d1 > b0", p.d1 - p.b0, true);
      add("d4 > g0", p.d4 - p.g0, true);
      break;
    case Regime::H51:
      add("d1 > 0", p.d1, true);
      add("d2 > 0", p.d2, true);
      add("d3 > 0", p.d3, true);
      add("d4 > 0", p.d4, true);
      add("b0 > 0", p.b0, true);
      add("g0 > 0", p.g0, true);
      add("k1 > 0", p.k1, true);
      add("k2 > 0", p.k2, true);
      add("k3 > 0", p.k3, true);
      break;
    case Regime::Thm22Candidate: {
      const State4 z = state.value_or(State4{0.0, 0.0, 0.0, 0.0});
      const double B0 = std::abs(p.b0 * (1.0 - 2.0 * z[0] / p.k1));
      const double G0 = std::abs(p.g0 * (1.0 - 2.0 * z[3] / p.k3));
      add("d1 > B0", p.d1 - B0, true);
      add("d4 > G0", p.d4 - G0, true);
      add("d2 + gamma > beta1 * U0", p.d2 + p.gamma - p.beta1 * z[0], true);
      add("d3 + sigma > 0", p.d3 + p.sigma, true);
      break;
    }
  }
  return rep;
}

}  // namespace sirb
