#include <doctest.h>

#include <cmath>

#include "heatlab/errors.hpp"
#include "heatlab/metric.hpp"
#include "heatlab/random.hpp"
#include "oracles.hpp"

using namespace heatlab;

namespace {

EnvironmentSpec spec(std::uint64_t seed, int n, double L, double R) {
  EnvironmentSpec s;
  s.box_side = L;
  s.cells_per_side = n;
  s.dependence_range = R;
  s.exponents = {5, 5, 2};
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("stencil sizes") {
  for (int n : {4, 8, 16, 32, 48}) CHECK(static_cast<int>(stencil(2, n).size()) == n);
  for (int n : {6, 18, 26}) CHECK(static_cast<int>(stencil(3, n).size()) == n);
  CHECK_THROWS(stencil(2, 12));
  CHECK_THROWS(stencil(3, 8));
}

TEST_CASE("Dijkstra agrees with Bellman-Ford") {
  const std::vector<std::array<int, 3>> four{{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}};
  std::vector<std::array<int, 3>> sixteen = four;
  for (int i : {-1, 1})
    for (int j : {-1, 1}) {
      sixteen.push_back({i, j, 0});
      sixteen.push_back({i, 2 * j, 0});
      sixteen.push_back({2 * i, j, 0});
    }
  for (std::uint64_t seed : {1, 2, 3}) {
    EnvironmentField f = generate_environment(spec(seed, 12, 12, 3));
    if (seed == 3) f = f.with_speed(SpeedMode::unit);
    const MetricField m4 = intrinsic_distance_map(f, 17, 4);
    const MetricField m16 = intrinsic_distance_map(f, 17, 16);
    CHECK((m4.distance - oracle::bellman_ford(f, 17, four)).cwiseAbs().maxCoeff() <= 1e-12 * m4.distance.maxCoeff());
    CHECK((m16.distance - oracle::bellman_ford(f, 17, sixteen)).cwiseAbs().maxCoeff() <= 1e-12 * m16.distance.maxCoeff());
  }
}

TEST_CASE("constant tensors: exact along axes, scaled by sqrt(theta/a)") {
  const Grid g(2, 32, 0.5);
  const MetricField m = intrinsic_distance_map(EnvironmentField::constant(g, 4.0, 1.0), 0, 16);
  for (int k = 1; k < 16; ++k) {
    CHECK(m.distance[static_cast<Eigen::Index>(g.index({k, 0, 0}))] == doctest::Approx(0.5 * k * 0.5).epsilon(1e-14));
    CHECK(m.distance[static_cast<Eigen::Index>(g.index({0, k, 0}))] == doctest::Approx(0.5 * k * 0.5).epsilon(1e-14));
  }
  // Stencil directions are exact too.
  CHECK(m.distance[static_cast<Eigen::Index>(g.index({4, 8, 0}))] == doctest::Approx(0.25 * std::sqrt(80.0)));
}

TEST_CASE("16-neighbour error against the Euclidean norm is bounded by the 16-gon") {
  // Worst direction bisects (1, 0) and (2, 1); the polygonal norm overshoots by
  // 1 / cos(theta / 2) - 1 with tan(theta) = 1/2, i.e. about 2.7%.
  const Grid g(2, 64, 1.0);
  const EnvironmentField f = EnvironmentField::constant(g, 1.0);
  const MetricField m = intrinsic_distance_map(f, 0, 16);
  double worst = 0.0;
  for (std::size_t y = 1; y < g.size(); ++y)
    worst = std::max(worst, m.distance[static_cast<Eigen::Index>(y)] / g.distance(0, y) - 1.0);
  const double half = 0.5 * std::atan(0.5);
  CHECK(worst <= 1.0 / std::cos(half) - 1.0 + 1e-12);
  CHECK(worst > 0.02);
  const MetricField m48 = intrinsic_distance_map(f, 0, 48);
  double worst48 = 0.0;
  for (std::size_t y = 1; y < g.size(); ++y)
    worst48 = std::max(worst48, m48.distance[static_cast<Eigen::Index>(y)] / g.distance(0, y) - 1.0);
  CHECK(worst48 < worst);
}

TEST_CASE("metric audit: triangle inequality, symmetry, sandwich") {
  for (std::uint64_t seed : {1, 2}) {
    const EnvironmentField f = generate_environment(spec(seed, 32, 32, 4));
    for (int nb : {4, 16}) {
      const MetricAudit a = audit_metric(f, nb, 6, 500, 500, seed);
      CHECK(a.triangle_violations == 0);
      CHECK(a.lower_violations == 0);
      CHECK(a.upper_violations == 0);
      CHECK(a.worst_asymmetry <= 1e-12);
    }
  }
}

TEST_CASE("Euclidean comparison requires theta = Lambda") {
  const EnvironmentField f = generate_environment(spec(4, 16, 16, 4));
  const MetricField m = intrinsic_distance_map(f, 0, 8);
  const RatioReport r = euclidean_comparison(m, f);
  CHECK(r.min_ratio >= 1.0 - 1e-12);  // theta/a_i >= 1 when theta = Lambda
  CHECK(r.pairs == f.grid.size() - 1);
  CHECK_THROWS_AS(euclidean_comparison(m, f.with_speed(SpeedMode::unit)), DomainError);
}

TEST_CASE("strict locality: mollified fields self-converge") {
  const double radii[] = {0.5, 1, 2, 4};
  for (std::uint64_t seed : {1, 2, 3}) {
    std::vector<MetricField> levels;
    for (int k = 0; k < 4; ++k) {
      const EnvironmentField f = generate_environment(spec(seed, 32 << k, 32, 8));
      levels.push_back(intrinsic_distance_map(f, f.grid.index({16 << k, 16 << k, 0}), 16));
    }
    const LocalityReport r = strict_locality_probe(levels, radii);
    CHECK(r.converging);
    CHECK(r.small_balls_shrink);
    CHECK(r.differences.back() < r.differences.front());
  }
}

TEST_CASE("strict locality probe on constant fields and bad input") {
  const double radii[] = {0.25, 1};
  std::vector<MetricField> levels;
  for (int k = 0; k < 3; ++k) {
    const EnvironmentField f = EnvironmentField::constant(Grid(2, 16 << k, 1.0 / (1 << k)), 2.0);
    levels.push_back(intrinsic_distance_map(f, 0, 16));
  }
  // Coarse cell centers are fine cell centers, and straight stencil paths scale exactly.
  const LocalityReport r = strict_locality_probe(levels, radii);
  CHECK(r.converging);
  CHECK(r.differences.front() <= 1e-12);
  CHECK(r.ball_sup.front() < r.ball_sup.back());

  CHECK_THROWS_AS(strict_locality_probe(std::span(levels).first(2), radii), DomainError);
  std::swap(levels[1], levels[2]);
  CHECK_THROWS_AS(strict_locality_probe(levels, radii), DimensionError);
}
