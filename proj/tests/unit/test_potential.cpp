#include <cmath>

#include "doctest.h"
#include "driftscape/errors.hpp"
#include "driftscape/io.hpp"
#include "driftscape/potential.hpp"
#include "driftscape/rng.hpp"
#include "oracles.hpp"

#include <nlohmann/json.hpp>

using namespace driftscape;
using namespace driftscape::testing;

TEST_CASE("potential value, direct substitutions") {
  const ModelParams k1 = standard_k1();
  CHECK(potential_value(k1.potential(), Vec2(0, 0)) == doctest::Approx(1.0));
  CHECK(potential_value(k1.potential(), Vec2(1, 0)) ==
        doctest::Approx(std::exp(-0.5)).epsilon(1e-12));

  const MixturePotential two({{0.5, Vec2(0, 0), Mat2::Identity()},
                              {0.5, Vec2(4, 0), Mat2::Identity()}});
  CHECK(potential_value(two, Vec2(0, 0)) ==
        doctest::Approx(0.5 + 0.5 * std::exp(-8.0)).epsilon(1e-12));
}

TEST_CASE("drift at and away from the mode") {
  const ModelParams k1 = standard_k1();
  CHECK(drift(k1.potential(), Vec2(0, 0)).norm() == doctest::Approx(0.0));
  const Vec2 d = drift(k1.potential(), Vec2(1, 0));
  CHECK(d.x() == doctest::Approx(-std::exp(-0.5)).epsilon(1e-12));
  CHECK(d.y() == doctest::Approx(0.0));
}

TEST_CASE("drift equals finite differences of the potential") {
  Rng rng(101);
  for (int rep = 0; rep < 1000; ++rep) {
    const ModelParams theta = random_theta(rng, 1 + (rep % 3));
    const Vec2 x(rng.uniform(-6, 6), rng.uniform(-6, 6));
    const Vec2 want = fd_gradient(
        [&](const Vec2& z) { return potential_value(theta.potential(), z); },
        x);
    CHECK(relative_error(drift(theta.potential(), x), want) < 1e-6);
  }

  // the K=2 example point
  const MixturePotential two({{0.5, Vec2(0, 0), Mat2::Identity()},
                              {0.5, Vec2(4, 0), Mat2::Identity()}});
  const Vec2 want =
      fd_gradient([&](const Vec2& z) { return potential_value(two, z); },
                  Vec2(2, 0));
  CHECK(relative_error(drift(two, Vec2(2, 0)), want) < 1e-6);
}

TEST_CASE("drift jacobian: mode value, finite differences, symmetry") {
  const ModelParams k1 = standard_k1();
  const Mat2 at_mode = drift_jacobian(k1.potential(), Vec2(0, 0));
  CHECK((at_mode + Mat2::Identity()).norm() == doctest::Approx(0.0));

  const Mat2 fd = fd_jacobian(
      [&](const Vec2& z) { return drift(k1.potential(), z); }, Vec2(1, 0));
  const Mat2 got = drift_jacobian(k1.potential(), Vec2(1, 0));
  CHECK(relative_error(got, fd) < 1e-6);
  CHECK(got(0, 0) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(got(1, 1) == doctest::Approx(-std::exp(-0.5)).epsilon(1e-9));

  Rng rng(102);
  for (int rep = 0; rep < 300; ++rep) {
    const ModelParams theta = random_theta(rng, 2);
    const Vec2 x(rng.uniform(-6, 6), rng.uniform(-6, 6));
    const Mat2 j = drift_jacobian(theta.potential(), x);
    CHECK(j(0, 1) == j(1, 0));  // exact symmetry
    const Mat2 want = fd_jacobian(
        [&](const Vec2& z) { return drift(theta.potential(), z); }, x);
    CHECK(relative_error(j, want) < 1e-5);
  }
}

TEST_CASE("lamperti drift and H") {
  const ModelParams k1 = standard_k1();
  Rng rng(103);
  for (int rep = 0; rep < 50; ++rep) {
    const Vec2 y(rng.uniform(-3, 3), rng.uniform(-3, 3));
    CHECK((lamperti_drift(k1, y) - drift(k1.potential(), y)).norm() ==
          doctest::Approx(0.0));
  }

  const ModelParams k1g2 = standard_k1(2.0);
  const Vec2 a = lamperti_drift(k1g2, Vec2(0.5, 0));
  CHECK(a.x() == doctest::Approx(-0.5 * std::exp(-0.5)).epsilon(1e-12));
  CHECK(h_value(k1g2, Vec2(0.5, 0)) ==
        doctest::Approx(0.25 * std::exp(-0.5)).epsilon(1e-12));
  CHECK(h_value(k1, Vec2(0, 0)) == doctest::Approx(1.0));

  for (int rep = 0; rep < 1000; ++rep) {
    const ModelParams theta = random_theta(rng, 1 + (rep % 2));
    const Vec2 y(rng.uniform(-4, 4), rng.uniform(-4, 4));
    const Vec2 want =
        fd_gradient([&](const Vec2& z) { return h_value(theta, z); }, y);
    CHECK(relative_error(lamperti_drift(theta, y), want) < 1e-6);
    const double h = h_value(theta, y);
    CHECK(h >= 0.0);
    CHECK(h <= 1.0 / (theta.gamma() * theta.gamma()) + 1e-12);
  }
}

TEST_CASE("laplacian of H") {
  const ModelParams k1 = standard_k1();
  CHECK(laplacian_h(k1, Vec2(0, 0)) == doctest::Approx(-2.0));

  // finite differences on the components of alpha
  const double h = 1e-5;
  const auto alpha_x = [&](const Vec2& y) { return lamperti_drift(k1, y).x(); };
  const auto alpha_y = [&](const Vec2& y) { return lamperti_drift(k1, y).y(); };
  const Vec2 y(1, 0);
  const double fd =
      (alpha_x(y + Vec2(h, 0)) - alpha_x(y - Vec2(h, 0))) / (2 * h) +
      (alpha_y(y + Vec2(0, h)) - alpha_y(y - Vec2(0, h))) / (2 * h);
  CHECK(laplacian_h(k1, y) == doctest::Approx(fd).epsilon(1e-6));
  CHECK(laplacian_h(k1, y) == doctest::Approx(-std::exp(-0.5)).epsilon(1e-9));

  Rng rng(104);
  for (int rep = 0; rep < 200; ++rep) {
    const ModelParams theta = random_theta(rng, 2);
    const EaBounds b = ea_bounds(theta);
    const Vec2 z(rng.uniform(-8, 8), rng.uniform(-8, 8));
    const double lap = laplacian_h(theta, z);
    CHECK(lap >= b.lap_lower - 1e-12);
    CHECK(lap <= b.lap_upper + 1e-12);
  }
}

TEST_CASE("ea bounds: closed forms and gamma scaling") {
  const ModelParams k1 = standard_k1();
  const EaBounds b = ea_bounds(k1);
  const double inv_e = std::exp(-1.0);
  CHECK(b.alpha_sq_upper == doctest::Approx(inv_e).epsilon(1e-12));
  CHECK(b.lap_lower == doctest::Approx(-2.0));
  CHECK(b.lap_upper == doctest::Approx(2.0 * inv_e).epsilon(1e-12));
  CHECK(b.m == b.lap_lower);
  CHECK(b.M == doctest::Approx(b.alpha_sq_upper + b.lap_upper));
  CHECK(b.rate == doctest::Approx(1.551819).epsilon(1e-6));

  const EaBounds b2 = ea_bounds(standard_k1(2.0));
  CHECK(b2.alpha_sq_upper == doctest::Approx(b.alpha_sq_upper / 4.0));
  CHECK(b2.lap_lower == doctest::Approx(b.lap_lower));
  CHECK(b2.lap_upper == doctest::Approx(b.lap_upper));
}

TEST_CASE("bound validity by random search") {
  Rng rng(105);
  for (int t = 0; t < 20; ++t) {
    const ModelParams theta = random_theta(rng, 1 + (t % 3));
    const EaBounds b = ea_bounds(theta);
    for (int rep = 0; rep < 10000; ++rep) {
      const Vec2 y(rng.uniform(-12, 12), rng.uniform(-12, 12));
      const double a2 = lamperti_drift(theta, y).squaredNorm();
      const double lap = laplacian_h(theta, y);
      CHECK(a2 <= b.alpha_sq_upper * (1 + 1e-12) + 1e-15);
      CHECK(lap >= b.lap_lower - 1e-12);
      CHECK(lap <= b.lap_upper + 1e-12);
      const double p = phi(theta, b, y);
      CHECK(p >= -1e-12);
      CHECK(p <= b.rate + 1e-12);
    }
  }
}

TEST_CASE("phi examples") {
  const ModelParams k1 = standard_k1();
  const EaBounds b = ea_bounds(k1);
  CHECK(phi(k1, b, Vec2(0, 0)) == doctest::Approx(0.0));
  const double e_half = std::exp(-0.5);
  const double want = 0.5 * (e_half * e_half - e_half + 2.0);
  CHECK(phi(k1, b, Vec2(1, 0)) == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("construction invariants") {
  CHECK_THROWS_AS(MixturePotential({}), InvalidParameter);
  CHECK_THROWS_AS(
      MixturePotential({{-1.0, Vec2(0, 0), Mat2::Identity()}}),
      InvalidParameter);

  Mat2 asym;
  asym << 1.0, 0.5, -0.5, 1.0;
  CHECK_THROWS_AS(MixturePotential({{1.0, Vec2(0, 0), asym}}),
                  InvalidParameter);

  Mat2 indefinite;
  indefinite << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(MixturePotential({{1.0, Vec2(0, 0), indefinite}}),
                  InvalidParameter);

  CHECK_THROWS_AS(ModelParams(standard_k1().potential(), -1.0),
                  InvalidParameter);

  // weights normalized within 1e-12
  const MixturePotential p({{2.0, Vec2(0, 0), Mat2::Identity()},
                            {6.0, Vec2(1, 1), Mat2::Identity()}});
  double total = 0.0;
  for (const auto& c : p.components()) total += c.weight;
  CHECK(std::abs(total - 1.0) <= 1e-12);
  CHECK(p.component(0).weight == doctest::Approx(0.25));
}

TEST_CASE("potential range and affine equivariance") {
  Rng rng(106);
  for (int rep = 0; rep < 200; ++rep) {
    const ModelParams theta = random_theta(rng, 2);
    const Vec2 x(rng.uniform(-10, 10), rng.uniform(-10, 10));
    const double v = potential_value(theta.potential(), x);
    CHECK(v > 0.0);
    CHECK(v <= 1.0 + 1e-15);
  }

  // translating all centers translates the grid argmax
  const ModelParams theta = random_theta(rng, 2);
  const Vec2 shift(1.75, -2.5);
  auto shifted_comps = theta.potential().components();
  for (auto& c : shifted_comps) c.center += shift;
  const MixturePotential shifted(shifted_comps);

  const int nx = 61, ny = 61;
  const auto argmax_on_grid = [&](const MixturePotential& p, Vec2 origin) {
    double best = -1.0;
    Vec2 arg = origin;
    for (int iy = 0; iy < ny; ++iy) {
      for (int ix = 0; ix < nx; ++ix) {
        const Vec2 z = origin + Vec2(0.25 * ix, 0.25 * iy);
        const double v = potential_value(p, z);
        if (v > best) {
          best = v;
          arg = z;
        }
      }
    }
    return arg;
  };
  const Vec2 lo(-7.5, -7.5);
  const Vec2 a1 = argmax_on_grid(theta.potential(), lo);
  const Vec2 a2 = argmax_on_grid(shifted, lo + shift);
  CHECK((a2 - a1 - shift).norm() == doctest::Approx(0.0));
}

TEST_CASE("parameter serialization round trip with exact field names") {
  Rng rng(107);
  const ModelParams theta = random_theta(rng, 3);
  const nlohmann::json j = params_to_json(theta);
  CHECK(j.contains("gamma"));
  CHECK(j.contains("components"));
  CHECK(j["components"][0].contains("weight"));
  CHECK(j["components"][0].contains("center"));
  CHECK(j["components"][0].contains("information"));
  CHECK(j["components"][0]["information"][0][1] ==
        j["components"][0]["information"][1][0]);

  const ModelParams back = params_from_json(j);
  CHECK(back.gamma() == doctest::Approx(theta.gamma()).epsilon(1e-15));
  for (int k = 0; k < 3; ++k) {
    CHECK((back.potential().component(k).center -
           theta.potential().component(k).center)
              .norm() == doctest::Approx(0.0));
    CHECK((back.potential().component(k).information -
           theta.potential().component(k).information)
              .norm() == doctest::Approx(0.0).epsilon(1e-15));
  }

  nlohmann::json bad = j;
  bad["extra"] = 1;
  CHECK_THROWS_AS(params_from_json(bad), ConfigError);
}
