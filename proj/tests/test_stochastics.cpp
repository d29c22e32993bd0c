#include <doctest.h>

#include <cmath>

#include "heatlab/errors.hpp"
#include "heatlab/stochastics.hpp"

using namespace heatlab;

namespace {

DiscreteVariable rademacher() { return {{-1.0, 1.0}, {0.5, 0.5}}; }

}  // namespace

TEST_CASE("chain geometry") {
  const ChainGeometry c = chain_geometry({10, 0, 0}, 10, 2);
  CHECK(c.k == 12);
  CHECK(c.s == doctest::Approx(100.0 / 12));
  CHECK(c.ball_radius == doctest::Approx(10.0 / 48));
  REQUIRE(c.points.size() == 13);
  CHECK(c.points.front()[0] == 0.0);
  CHECK(c.points.back()[0] == doctest::Approx(10.0));
  CHECK(c.points[6][0] == doctest::Approx(5.0));
  CHECK_THROWS_AS(chain_geometry({10, 0, 0}, 41, 2), DomainError);
  CHECK_THROWS_AS(chain_geometry({10, 0, 0}, 0, 2), DomainError);
  CHECK(chain_geometry({3, 4, 0}, 7, 2).k == 9);  // ceil(60 / 7)

  // Scaling x and r together leaves k unchanged and scales s quadratically.
  const ChainGeometry big = chain_geometry({30, 0, 0}, 30, 2);
  CHECK(big.k == c.k);
  CHECK(big.s == doctest::Approx(9.0 * c.s));
}

TEST_CASE("admissible sequences stay in their balls") {
  const ChainGeometry c = chain_geometry({20, 20, 0}, 16, 2);
  const Point origin{32, 32, 0};
  Rng rng = make_rng(3, {1});
  for (int rep = 0; rep < 20; ++rep) {
    const auto y = random_admissible_sequence(c, origin, rng);
    REQUIRE(y.size() == c.points.size());
    CHECK(y.front()[0] == origin[0]);
    CHECK(y.back()[1] == doctest::Approx(origin[1] + 20));
    for (std::size_t j = 0; j < y.size(); ++j)
      CHECK(std::hypot(y[j][0] - origin[0] - c.points[j][0], y[j][1] - origin[1] - c.points[j][1]) <=
            c.ball_radius + 1e-12);
  }
}

TEST_CASE("chained average on constant and random fields") {
  const Grid g(2, 64, 1.0);
  const ChainGeometry c = chain_geometry({20, 0, 0}, 16, 2);
  const Point origin{20, 32, 0};
  Rng rng = make_rng(5, {2});
  auto y = random_admissible_sequence(c, origin, rng);

  const auto flat = chained_average_bound(EnvironmentField::constant(g, 1.0), c, y, origin, {5, 5, 2});
  CHECK(flat.terms.size() == static_cast<std::size_t>(c.k));
  CHECK(flat.mean == doctest::Approx(1.0));
  CHECK(flat.holder_lhs == doctest::Approx(flat.holder_rhs));

  EnvironmentSpec s;
  s.box_side = 64;
  s.cells_per_side = 64;
  s.exponents = {5, 5, 2};
  const EnvironmentField f = generate_environment(s);
  const auto rep = chained_average_bound(f, c, y, origin, {5, 5, 2});
  CHECK(rep.mean >= 1.0);
  CHECK(rep.holder_lhs <= rep.holder_rhs * (1 + 1e-12));

  y[1][0] += 1.0;
  CHECK_THROWS_AS(chained_average_bound(f, c, y, origin, {5, 5, 2}), DomainError);
  y.pop_back();
  CHECK_THROWS_AS(chained_average_bound(f, c, y, origin, {5, 5, 2}), DomainError);
}

TEST_CASE("Rosenthal check on Rademacher sums") {
  // |S| for three signs is 3 w.p. 1/4 and 1 w.p. 3/4.
  const std::vector<DiscreteVariable> three{rademacher(), rademacher(), rademacher()};
  const RosenthalReport r = rosenthal_check(three, 4.0);
  CHECK(r.lhs == doctest::Approx(0.25 * 81 + 0.75));
  CHECK(r.sum_abs_moments == doctest::Approx(3.0));
  CHECK(r.variance_power == doctest::Approx(9.0));

  const std::vector<DiscreteVariable> two{rademacher(), rademacher()};
  CHECK(rosenthal_check(two, 4.0).ratio == doctest::Approx(2.0));
  CHECK(rosenthal_check(two, 3.0).ratio == doctest::Approx(std::sqrt(2.0)));

  const std::vector<DiscreteVariable> skewed{{{0.0, 1.0}, {0.5, 0.5}}};
  CHECK_THROWS_AS(rosenthal_check(skewed, 4.0), ValidationError);
  CHECK_THROWS_AS(rosenthal_check(two, 2.0), ValidationError);
}

TEST_CASE("random centered variables and the ensemble") {
  Rng rng = make_rng(9, {0});
  for (int i = 0; i < 50; ++i) {
    const DiscreteVariable v = random_centered_variable(rng, 2 + i % 3);
    CHECK(std::abs(v.mean()) <= 1e-12);
    double total = 0.0;
    for (double p : v.probs) total += p;
    CHECK(total == doctest::Approx(1.0));
  }
  const RosenthalEnsemble e = rosenthal_ensemble(60, 4.0, 2);
  CHECK(e.pass);
  CHECK(e.max_ratio >= 1.0);
  CHECK(e.max_ratio <= e.bound);
}

TEST_CASE("region cubes") {
  CHECK(region_cubes(2, 4, 4) == std::vector<std::size_t>{0, 1, 4, 5});
  CHECK(region_cubes(2, 4, 3) == std::vector<std::size_t>{0, 1, 2});
  CHECK(region_cubes(3, 2, 8).size() == 8);
  CHECK_THROWS_AS(region_cubes(2, 4, 17), DomainError);
}

TEST_CASE("small moment experiment") {
  EnvironmentSpec s;
  s.box_side = 16;
  s.cells_per_side = 16;
  s.exponents = {2, 2, 1};
  s.regime = MomentRegime::none;
  s.upper_tail = s.lower_tail = 16;
  MomentExperimentOptions o;
  o.K = {1, 4, 16};
  o.samples = 60;
  o.bootstrap = 100;
  const MomentExperimentReport r = moment_bound_experiment(s, o);
  REQUIRE(r.rows.size() == 3);
  for (const MomentRow& row : r.rows) {
    CHECK(row.moment > 0.0);
    CHECK(row.ci_lo <= row.ratio);
    CHECK(row.ratio <= row.ci_hi);
  }
  CHECK(r.max_over_min >= 1.0);
  o.xi = 1.0;
  CHECK_THROWS_AS(moment_bound_experiment(s, o), ValidationError);
}
