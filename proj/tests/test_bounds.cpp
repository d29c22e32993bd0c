#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "heatlab/bounds.hpp"
#include "heatlab/errors.hpp"

using namespace heatlab;

namespace {

std::vector<CurvePoint> curve(std::initializer_list<double> values) {
  std::vector<CurvePoint> c;
  double t = 1.0;
  for (double v : values) {
    c.push_back({t, v, 1});
    t *= 2.0;
  }
  return c;
}

struct Flat {
  EnvironmentField field;
  DiscreteGenerator gen;
  std::size_t center;
};

Flat flat(int n, double h) {
  const Grid g(2, n, h);
  Flat f{EnvironmentField::constant(g, 1.0), {}, g.index({n / 2, n / 2, 0})};
  f.gen = assemble_generator(f.field);
  return f;
}

}  // namespace

TEST_CASE("burn-in on synthetic curves") {
  // Suffix maxima 5, 3, 1.2, 1.01, 1.01, 1.0: stable from t = 8.
  CHECK(dyadic_burn_in(curve({5, 3, 1.2, 1.0, 1.01, 1.0})) == 8.0);
  CHECK(dyadic_burn_in(curve({2, 2, 2, 2})) == 1.0);
  CHECK(std::isinf(dyadic_burn_in(curve({8, 4, 2, 1}))));
  CHECK(std::isinf(dyadic_burn_in(curve({1}))));
  // Lower bounds track suffix minima.
  CHECK(dyadic_burn_in(curve({-5, -3, -1.2, -1.0, -1.01, -1.0}), false) == 8.0);
}

TEST_CASE("trend slope against log t") {
  std::vector<CurvePoint> c;
  for (double t : {0.5, 1.0, 3.0, 10.0}) c.push_back({t, 2.0 * std::log(t) + 1.0, 1});
  CHECK(trend_slope(c) == doctest::Approx(2.0));
  CHECK(trend_slope(curve({4})) == 0.0);
}

TEST_CASE("upper bound on a constant environment") {
  const Flat f = flat(64, 1.0);
  const KernelColumn col = heat_kernel_column(f.gen, f.center, std::vector<double>{1, 2, 4, 8, 16, 32});
  const MetricField m = intrinsic_distance_map(f.field, f.center, 16);
  const BoundFit fit = verify_upper_intrinsic(col, m, f.field);
  CHECK(fit.pass);
  // Continuum kernel (4 pi t)^{-1} exp(-r^2 / 4t) gives c1 = 1 / (4 pi).
  CHECK(fit.constants.at("c1") == doctest::Approx(1.0 / (4.0 * std::numbers::pi)).epsilon(0.1));
  CHECK(fit.constants.at("gamma") <= 0.5);

  const BoundFit e = verify_upper_euclidean(col, f.field);
  CHECK(e.pass);
  const BoundFit lo = verify_lower(col, f.field);
  CHECK(lo.constants.at("c3") > 0.0);
}

TEST_CASE("Euclidean-form bounds need theta = Lambda") {
  EnvironmentSpec s;
  s.box_side = 16;
  s.cells_per_side = 16;
  s.exponents = {5, 5, 2};
  const EnvironmentField f = generate_environment(s).with_speed(SpeedMode::unit);
  const DiscreteGenerator gen = assemble_generator(f);
  const KernelColumn col = heat_kernel_column(gen, 0, std::vector<double>{1, 2});
  CHECK_THROWS_AS(verify_upper_euclidean(col, f), DomainError);
  CHECK_THROWS_AS(verify_lower(col, f), DomainError);
  CHECK_THROWS_AS(verify_long_range(col, f), DomainError);
}

TEST_CASE("long-range constant blows up as t / r^2 decreases") {
  const Flat f = flat(64, 1.0);
  LongRangeOptions o;
  o.scales = {2, 4, 8};
  o.radii = {1, 2};
  o.relative_times = {0.05, 0.1, 0.25, 0.5, 1.0};
  o.resolve_floor = 1e-14;
  const KernelColumn col = heat_kernel_column(f.gen, f.center, long_range_times(o));
  const LongRangeFit r = verify_long_range(col, f.field, o);
  // At fixed (n, x) the log-ratio falls as the relative time grows.
  for (std::size_t i = 0; i + 1 < r.samples.size(); ++i) {
    const auto& a = r.samples[i];
    const auto& b = r.samples[i + 1];
    if (a.n == b.n && a.x_norm == b.x_norm && b.t > a.t) CHECK(b.log_ratio < a.log_ratio);
  }
  // At fixed t / (n|x|)^2 the n^d prefactor dominates, so the smallest scale sets c23.
  REQUIRE(r.per_scale_constant.size() == 3);
  CHECK(r.per_scale_constant.back() < r.per_scale_constant.front());
  CHECK(r.fit.pass);

  LongRangeOptions wide = o;
  wide.relative_times = {0.25, 0.5, 1.0};
  const LongRangeFit w = verify_long_range(col, f.field, wide);
  CHECK(r.fit.constants.at("c23") > 10.0 * w.fit.constants.at("c23"));
}

TEST_CASE("Moser and Sobolev exponents") {
  CHECK(sobolev_rho(2, 5) == doctest::Approx(5.0));
  CHECK(sobolev_rho(3, 2) == doctest::Approx(1.2));
  CHECK(moser_kappa(2, {5, 5, 2}) == doctest::Approx(0.5 * 1.25 * 1.4 / 0.4));
  CHECK_THROWS_AS(moser_kappa(2, {2, 2, 2}), ValidationError);
}

TEST_CASE("Harnack constant and the near-diagonal floor") {
  const Flat f = flat(32, 1.0);
  const Point c = f.field.grid.position(f.center);
  CHECK(harnack_constant(f.field, c, 2.0, {}) == doctest::Approx(4.0 * std::numbers::pi * std::exp(1.0)));
  const EnvironmentField f3 = EnvironmentField::constant(Grid(3, 8, 1.0), 1.0);
  CHECK(harnack_constant(f3, {4, 4, 4}, 2.0, {}) == doctest::Approx(std::pow(4.0 * std::numbers::pi, 1.5) * std::exp(1.0)));
  CHECK_THROWS_AS(harnack_constant(f.field, c, 17.0, {}), DomainError);

  const KernelColumn col = heat_kernel_column(f.gen, f.center, std::vector<double>{1, 4, 100});
  const FloorCheck fc = near_diagonal_floor(col, 1, f.field);
  CHECK(fc.pass);
  CHECK(fc.margin > 1.0);
  CHECK_THROWS_AS(near_diagonal_floor(col, 3, f.field), DomainError);
  CHECK_THROWS_AS(near_diagonal_floor(col, 2, f.field), DomainError);
}
