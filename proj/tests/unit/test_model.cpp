#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "sirb/model.hpp"

using namespace sirb;

namespace {

ModelParams sample_params() {
  ModelParams p;
  p.b0 = 2.0;
  p.k1 = 10.0;
  p.beta1 = 1.0;
  p.beta2 = 2.0;
  p.k2 = 1.0;
  p.g0 = 1.5;
  p.k3 = 4.0;
  p.d1 = 1.0;
  p.d2 = 0.3;
  p.d3 = 0.2;
  p.d4 = 0.5;
  p.sigma = 0.5;
  p.gamma = 0.4;
  p.xi = 0.7;
  return p;
}

}  // namespace

TEST_CASE("logistic host growth") {
  ModelParams p = sample_params();
  CHECK(logistic_b(0.0, p) == 0.0);
  CHECK(logistic_b(p.k1, p) == doctest::Approx(0.0));
  CHECK(logistic_b(5.0, p) == doctest::Approx(5.0));
  CHECK(logistic_b(20.0, p) < 0.0);
  CHECK_THROWS_AS(logistic_b(-1e-3, p), DomainError);
}

TEST_CASE("saturation h1 and its derivative") {
  ModelParams p = sample_params();
  p.k2 = 3.0;
  CHECK(saturation_h1(0.0, p) == 0.0);
  CHECK(saturation_h1(p.k2, p) == doctest::Approx(0.5));
  CHECK(saturation_h1(1e12 * p.k2, p) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK_THROWS_AS(saturation_h1(-1.0, p), DomainError);

  double prev = -1.0;
  for (double b = 0.0; b < 50.0; b += 0.37) {
    const double h = saturation_h1(b, p);
    CHECK(h > prev);
    CHECK(h < 1.0);
    prev = h;
    if (b > 0.0) {
      const double step = 1e-6 * b;
      const double fd = (saturation_h1(b + step, p) - saturation_h1(b - step, p)) / (2.0 * step);
      CHECK(saturation_h1_prime(b, p) == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("infection and bacterial growth terms") {
  ModelParams p = sample_params();
  p.beta1 = 1.0;
  p.beta2 = 2.0;
  p.k2 = 1.0;
  CHECK(infection_g1(0.0, 3.0, 5.0, p) == 0.0);
  CHECK(infection_g1(2.0, 0.0, 0.0, p) == 0.0);
  CHECK(infection_g1(1.0, 3.0, 1.0, p) == doctest::Approx(4.0));
  CHECK_THROWS_AS(infection_g1(1.0, -1.0, 1.0, p), DomainError);

  p.g0 = 3.0;
  p.k3 = 6.0;
  CHECK(bacterial_g2(0.0, p) == 0.0);
  CHECK(bacterial_g2(6.0, p) == doctest::Approx(0.0));
  CHECK(bacterial_g2(2.0, p) == doctest::Approx(4.0));
  CHECK_THROWS_AS(bacterial_g2(-2.0, p), DomainError);
}

TEST_CASE("reaction right-hand side") {
  ModelParams p = sample_params();
  const auto zero = reaction_rhs({0.0, 0.0, 0.0, 0.0}, p);
  CHECK(zero.f1 == 0.0);
  CHECK(zero.f2 == 0.0);
  CHECK(zero.f3 == 0.0);
  CHECK(zero.f4 == 0.0);

  // Hand-computed point.
  const auto f = reaction_rhs({1.0, 3.0, 2.0, 1.0}, p);
  CHECK(f.f1 == doctest::Approx(2.0 * 1.0 * 0.9 - 4.0 - 1.0 + 1.0));

  // Host-only equilibrium.
  const double s2 = p.k1 * (p.b0 - p.d1) / p.b0;
  const auto r2 = reaction_rhs({s2, 0.0, 0.0, 0.0}, p);
  for (int k = 0; k < 4; ++k) CHECK(std::abs(r2[k]) < 1e-12);

  CHECK_THROWS_AS(reaction_rhs({1.0, -1e-9, 0.0, 0.0}, p), DomainError);
}

TEST_CASE("reaction matches the independent oracle and the sum identity") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 5.0), q(0.05, 3.0);
  for (int n = 0; n < 200; ++n) {
    ModelParams p;
    for (const auto& name : ModelParams::field_names()) p.set(name, q(rng));
    const State4 x{u(rng), u(rng), u(rng), u(rng)};
    const auto f = reaction_rhs(x, p);
    const auto g = oracle::reaction(x, oracle::from(p));
    for (int k = 0; k < 4; ++k) CHECK(f[k] == doctest::Approx(g[k]).epsilon(1e-13).scale(10.0));
    const double identity = logistic_b(x[0], p) - p.d1 * x[0] + p.sigma * x[2] - (p.d2 + p.gamma) * x[1];
    CHECK(f.f1 + f.f2 == doctest::Approx(identity).epsilon(1e-12).scale(10.0));
  }
}

TEST_CASE("quasi-positivity") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 10.0), q(0.01, 4.0);
  for (int n = 0; n < 500; ++n) {
    ModelParams p;
    for (const auto& name : ModelParams::field_names()) p.set(name, q(rng));
    for (int k = 0; k < 4; ++k) {
      State4 x{u(rng), u(rng), u(rng), u(rng)};
      x[k] = 0.0;
      CHECK(reaction_rhs(x, p)[k] >= 0.0);
    }
  }
}

TEST_CASE("parameter validation and named access") {
  ModelParams p = sample_params();
  CHECK_NOTHROW(p.validate());
  CHECK(p.get("beta2") == 2.0);
  p.set("xi", 3.5);
  CHECK(p.xi == 3.5);
  CHECK_THROWS_AS(p.get("beta3"), DomainError);
  CHECK(ModelParams::field_names().size() == 14);

  ModelParams bad = sample_params();
  bad.beta1 = -0.1;
  try {
    bad.validate();
    FAIL("expected rejection");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("beta1") != std::string::npos);
  }
  bad = sample_params();
  bad.d3 = 0.0;
  CHECK_NOTHROW(bad.validate());
  bad.k2 = 0.0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("regime checks report margins without throwing") {
  ModelParams p = sample_params();
  p.b0 = 2.0;
  p.d1 = 1.0;
  auto rep = check_regime(p, Regime::Cor21);
  REQUIRE(rep.conditions.size() == 2);
  CHECK(rep.conditions[0].margin == doctest::Approx(-1.0));
  CHECK_FALSE(rep.conditions[0].satisfied());
  CHECK_FALSE(rep.all_satisfied());

  p.b0 = 1.0;
  p.d1 = 2.0;
  rep = check_regime(p, Regime::Cor21);
  CHECK(rep.conditions[0].margin == doctest::Approx(1.0));
  CHECK(rep.conditions[0].satisfied());

  CHECK(check_regime(sample_params(), Regime::H51).all_satisfied());
  CHECK(check_regime(sample_params(), Regime::H23).all_satisfied());
  CHECK(parse_regime("Thm22-candidate") == Regime::Thm22Candidate);
  CHECK(to_string(Regime::H51) == "H51");
  CHECK_THROWS_AS(parse_regime("H99"), DomainError);
}
