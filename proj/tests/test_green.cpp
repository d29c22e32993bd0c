#include <doctest.h>

#include <cmath>
#include <numbers>

#include "heatlab/errors.hpp"
#include "heatlab/green.hpp"
#include "oracles.hpp"

using namespace heatlab;

namespace {

EnvironmentField random_box(int n, std::uint64_t seed) {
  EnvironmentSpec s;
  s.dim = 3;
  s.box_side = n;
  s.cells_per_side = n;
  s.dependence_range = 2;
  s.exponents = {4, 4, 2};
  s.seed = seed;
  return generate_environment(s);
}

DiscreteGenerator dirichlet(const EnvironmentField& f) { return assemble_generator(f, {Boundary::dirichlet}); }

GreenOptions tight() {
  GreenOptions o;
  o.tolerance = 1e-13;
  return o;
}

}  // namespace

TEST_CASE("Gaussian kernel values and normalization") {
  const double pi = std::numbers::pi;
  CHECK(gaussian_kernel(1.0, {0, 0, 0}, {0, 0, 0}, Covariance::Identity(), 2) == doctest::Approx(1.0 / (2 * pi)));
  CHECK(gaussian_kernel(2.0, {0, 0, 0}, {0, 0, 0}, 2.0 * Covariance::Identity(), 2) == doctest::Approx(1.0 / (8 * pi)));
  Covariance s = Covariance::Identity();
  s(0, 0) = 2.0;
  s(0, 1) = s(1, 0) = 0.5;
  const double mass = oracle::simpson(
      [&](double x) {
        return oracle::simpson([&](double y) { return gaussian_kernel(1.5, {0, 0, 0}, {x, y, 0}, s, 2); }, -15, 15, 300);
      },
      -15, 15, 300);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-8));
  CHECK_THROWS_AS(gaussian_kernel(0.0, {0, 0, 0}, {1, 0, 0}, s, 2), DomainError);
}

TEST_CASE("Brownian Green's function against time integration") {
  Covariance s = Covariance::Identity();
  s(0, 0) = 2.0;
  s(1, 2) = s(2, 1) = 0.3;
  const Point y{0.7, -0.4, 1.1};
  const double Q = Eigen::Vector3d(y[0], y[1], y[2]).dot(s.inverse() * Eigen::Vector3d(y[0], y[1], y[2]));
  const double det = s.determinant();
  // t = e^u turns the integral into a smooth one on the real line.
  const double quad = oracle::simpson(
      [&](double u) {
        const double t = std::exp(u);
        return t * std::pow(2 * std::numbers::pi * t, -1.5) / std::sqrt(det) * std::exp(-Q / (2 * t));
      },
      -40, 60, 20000);
  CHECK(brownian_green({0, 0, 0}, y, s, 3) == doctest::Approx(quad).epsilon(1e-8));
  CHECK(brownian_green({0, 0, 0}, {1, 0, 0}, Covariance::Identity(), 3) ==
        doctest::Approx(1.0 / (2 * std::numbers::pi)));
  CHECK_THROWS_AS(brownian_green({0, 0, 0}, y, s, 2), DimensionError);
  Covariance bad = Covariance::Identity();
  bad(2, 2) = -1.0;
  CHECK_THROWS_AS(brownian_green({0, 0, 0}, y, bad, 3), MatrixError);
}

TEST_CASE("discrete Green's function matches a dense solve") {
  for (std::uint64_t seed : {1, 2}) {
    const EnvironmentField f = random_box(8, seed);
    const DiscreteGenerator gen = dirichlet(f);
    for (std::size_t x0 : {std::size_t{0}, std::size_t{93}}) {
      const GreenField g = green_function(gen, x0, tight());
      const Vec ref = oracle::dense_green(f, x0);
      CHECK((g.values - ref).cwiseAbs().maxCoeff() <= 1e-9 * ref.maxCoeff());
      CHECK(g.values.minCoeff() > 0.0);
      Eigen::Index arg;
      g.values.maxCoeff(&arg);
      CHECK(static_cast<std::size_t>(arg) == x0);
    }
    const GreenField a = green_function(gen, 10, tight());
    const GreenField b = green_function(gen, 150, tight());
    CHECK(a.values[150] == doctest::Approx(b.values[10]).epsilon(1e-9));
    // theta does not enter the integrated kernel.
    const GreenField u = green_function(dirichlet(f.with_speed(SpeedMode::unit)), 10, tight());
    CHECK((u.values - a.values).cwiseAbs().maxCoeff() <= 1e-9 * a.values.maxCoeff());
  }
}

TEST_CASE("constant Dirichlet data shifts the solution by that constant") {
  const EnvironmentField f = random_box(8, 3);
  const DiscreteGenerator gen = dirichlet(f);
  GreenOptions o = tight();
  const GreenField zero = green_function(gen, 40, o);
  o.boundary = [](const Point&) { return 0.25; };
  const GreenField shifted = green_function(gen, 40, o);
  CHECK((shifted.values - zero.values).array().abs().maxCoeff() > 0.0);
  CHECK(((shifted.values - zero.values).array() - 0.25).abs().maxCoeff() <= 1e-10);
}

TEST_CASE("Green's function input errors") {
  const EnvironmentField f2 = EnvironmentField::constant(Grid(2, 8, 1.0), 1.0);
  CHECK_THROWS_AS(green_function(dirichlet(f2), 0), DimensionError);
  const EnvironmentField f3 = EnvironmentField::constant(Grid(3, 4, 1.0), 1.0);
  CHECK_THROWS_AS(green_function(assemble_generator(f3), 0), DomainError);
  CHECK_THROWS_AS(green_function(dirichlet(f3), 64), DomainError);
}

TEST_CASE("interpolation reproduces linear functions") {
  const Grid g(3, 5, 0.5);
  Vec v(static_cast<Eigen::Index>(g.size()));
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Point p = g.position(i);
    v[static_cast<Eigen::Index>(i)] = 1.0 + 2 * p[0] - p[1] + 0.5 * p[2];
  }
  CHECK(interpolate(g, v, {0.8, 1.3, 0.37}) == doctest::Approx(1.0 + 1.6 - 1.3 + 0.185));
  CHECK_THROWS_AS(interpolate(g, v, {3.0, 0, 0}), DomainError);
}

TEST_CASE("effective covariance of constant fields") {
  for (double a : {1.0, 4.0}) {
    const Grid g(2, 96, 1.0);
    const DiscreteGenerator gen = assemble_generator(EnvironmentField::constant(g, a));
    const std::size_t x0 = g.index({48, 48, 0});
    const KernelColumn col = heat_kernel_column(gen, x0, std::vector<double>{4, 8, 16});
    const SigmaEstimate s = sigma_estimate(col, gen);
    CHECK(s.sigma(0, 0) == doctest::Approx(2 * a).epsilon(0.01));
    CHECK(s.sigma(1, 1) == doctest::Approx(2 * a).epsilon(0.01));
    CHECK(std::abs(s.sigma(0, 1)) <= 0.01 * a);
    CHECK(s.stable);

    const SigmaEstimate w = sigma_from_walkers(gen, x0, 2.0, 10.0, 20000, 11);
    CHECK(w.sigma(0, 0) == doctest::Approx(2 * a).epsilon(0.05));
    CHECK(w.sigma(1, 1) == doctest::Approx(2 * a).epsilon(0.05));
  }
}

TEST_CASE("annulus points") {
  const auto pts = annulus_points(64, 0.375, 0.75, 3);
  CHECK(pts.size() == 64);
  for (const Point& p : pts) {
    const double r = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
    CHECK(r >= 0.375 - 1e-12);
    CHECK(r <= 0.75 + 1e-12);
  }
}
