#include <doctest.h>

#include <cmath>

#include "heatlab/env.hpp"
#include "heatlab/errors.hpp"
#include "heatlab/random.hpp"
#include "oracles.hpp"

using namespace heatlab;

namespace {

EnvironmentSpec small_spec(std::uint64_t seed = 1) {
  EnvironmentSpec s;
  s.box_side = 32;
  s.cells_per_side = 32;
  s.dependence_range = 4;
  s.exponents = {5, 5, 2};
  s.seed = seed;
  return s;
}

double correlation(const Vec& a, const Vec& b) {
  const double ma = a.mean(), mb = b.mean();
  const Vec da = a.array() - ma, db = b.array() - mb;
  return da.dot(db) / std::sqrt(da.squaredNorm() * db.squaredNorm());
}

}  // namespace

TEST_CASE("grid indexing round-trips and wraps") {
  const Grid g(3, 5, 0.5);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(g.index(g.coords(i)) == i);
  CHECK(g.index({-1, 0, 0}) == g.index({4, 0, 0}));
  CHECK(g.shift(0, 2, -1) == g.index({0, 0, 4}));
  CHECK(g.distance(g.index({0, 0, 0}), g.index({4, 0, 0})) == doctest::Approx(0.5));
  CHECK(g.distance(g.index({0, 0, 0}), g.index({4, 0, 0}), false) == doctest::Approx(2.0));
  CHECK_THROWS_AS(Grid(4, 8, 1.0), ValidationError);
  CHECK_THROWS_AS(Grid(2, 8, 0.0), ValidationError);
}

TEST_CASE("grid balls match a brute-force scan") {
  const Grid g(2, 20, 0.5);
  Rng rng = make_rng(3, {1});
  for (int k = 0; k < 20; ++k) {
    const Point c{uniform_open(rng) * 10, uniform_open(rng) * 10, 0};
    const double r = 0.3 + uniform_open(rng) * 4.5;
    std::size_t brute = 0;
    for (std::size_t x = 0; x < g.size(); ++x)
      if (g.distance(c, g.position(x)) <= r * (1 + 1e-12)) ++brute;
    CHECK(g.ball(c, r).size() == brute);
  }
}

TEST_CASE("spec validation names the violated constraint") {
  EnvironmentSpec s = small_spec();
  s.dim = 1;
  CHECK_THROWS_AS(validate(s), ValidationError);
  s = small_spec();
  s.dependence_range = 1.0;
  CHECK_THROWS_AS(validate(s), ValidationError);
  s = small_spec();
  s.exponents = {1, 1, 2};
  CHECK_THROWS_AS(validate(s), ValidationError);  // M2 needs p, q > 1

  // 1.1 margin on tail indices.
  s = small_spec();
  s.upper_tail = 5.4;  // < 1.1 * p
  CHECK_THROWS_AS(validate(s), MomentMarginError);
  s.upper_tail = 5.0;
  try {
    validate(s);
    FAIL("expected a margin error");
  } catch (const MomentMarginError& e) {
    CHECK(std::string(e.what()).find("infinite") != std::string::npos);
  }
  s.upper_tail = 5.5;
  CHECK_NOTHROW(validate(s));
}

TEST_CASE("generated fields satisfy the structural invariants") {
  for (MarginalModel model : {MarginalModel::checkerboard, MarginalModel::blob}) {
    EnvironmentSpec s = small_spec(7);
    s.model = model;
    const EnvironmentField f = generate_environment(s);
    CHECK_NOTHROW(f.check_invariants());
    for (Eigen::Index i = 0; i < f.theta.size(); ++i) {
      CHECK(f.theta[i] == f.Lambda[i]);
      CHECK(f.lambda[i] == std::min(f.diag_a[0][i], f.diag_a[1][i]));
    }
    const EnvironmentField u = f.with_speed(SpeedMode::unit);
    CHECK(u.theta.isOnes());
    CHECK(u.diag_a[0] == f.diag_a[0]);
  }
}

TEST_CASE("generation is deterministic and independent of the worker count") {
  EnvironmentSpec s = small_spec(11);
  s.dim = 3;
  s.cells_per_side = 16;
  s.box_side = 16;
  s.exponents = {4, 4, 2};
  const EnvironmentField a = generate_environment(s, 1);
  const EnvironmentField b = generate_environment(s, 3);
  for (int e = 0; e < 3; ++e) CHECK(a.diag_a[e] == b.diag_a[e]);
  s.seed = 12;
  CHECK(generate_environment(s, 1).diag_a[0] != a.diag_a[0]);
}

TEST_CASE("closed-form moments agree with direct simulation of the marginal") {
  // max over d axes of log P - log Q with P ~ Pareto(alpha), Q ~ Pareto(beta).
  const double alpha = 8, beta = 6;
  const int d = 2;
  Rng rng = make_rng(5, {2});
  const int n = 400000;
  double m_pos = 0, m_neg = 0;
  for (int i = 0; i < n; ++i) {
    double z = -1e300;
    for (int a = 0; a < d; ++a)
      z = std::max(z, -std::log(uniform_open(rng)) / alpha + std::log(uniform_open(rng)) / beta);
    m_pos += std::exp(2.0 * z);
    m_neg += std::exp(-1.0 * z);
  }
  CHECK(max_log_ratio_mgf(2.0, alpha, beta, d) == doctest::Approx(m_pos / n).epsilon(0.01));
  CHECK(max_log_ratio_mgf(-1.0, alpha, beta, d) == doctest::Approx(m_neg / n).epsilon(0.01));
  CHECK(max_log_ratio_mgf(0.0, alpha, beta, d) == doctest::Approx(1.0));
}

TEST_CASE("checkerboard marginals have the analytic moments") {
  EnvironmentSpec s;
  s.box_side = 256;
  s.cells_per_side = 256;
  s.dependence_range = 2;
  s.upper_tail = 12;
  s.lower_tail = 12;
  s.exponents = {2, 2, 1};
  s.regime = MomentRegime::none;
  s.seed = 4;
  const EnvironmentField f = generate_environment(s);
  const double Lambda2 = f.Lambda.array().square().mean();
  const double inv_lambda = f.lambda.array().inverse().mean();
  CHECK(Lambda2 == doctest::Approx(expected_Lambda_power(s, 2.0)).epsilon(0.05));
  CHECK(inv_lambda == doctest::Approx(expected_lambda_power(s, -1.0)).epsilon(0.05));
}

TEST_CASE("dependence is finite range") {
  EnvironmentSpec s = small_spec(3);
  s.box_side = 256;
  s.cells_per_side = 256;
  s.dependence_range = 4;
  const EnvironmentField f = generate_environment(s);
  const Grid& g = f.grid;
  auto shifted = [&](int dx) {
    Vec v(f.diag_a[0].size());
    for (std::size_t x = 0; x < g.size(); ++x) v[static_cast<Eigen::Index>(x)] = f.diag_a[0][g.shift(x, 0, dx)];
    return v;
  };
  const Vec logs = f.diag_a[0].array().log();
  CHECK(correlation(logs, shifted(1).array().log().matrix()) > 0.5);
  CHECK(std::abs(correlation(logs, shifted(5).array().log().matrix())) < 0.03);
  CHECK(std::abs(correlation(logs, shifted(9).array().log().matrix())) < 0.03);
  // Different axes and factors are independent.
  CHECK(std::abs(correlation(logs, f.diag_a[1].array().log().matrix())) < 0.03);
}

TEST_CASE("ball averages match the oracle and a_script reduces on constants") {
  const EnvironmentField f = generate_environment(small_spec(2));
  Rng rng = make_rng(9, {4});
  for (int k = 0; k < 10; ++k) {
    const Point c{uniform_open(rng) * 32, uniform_open(rng) * 32, 0};
    const double r = 1 + 10 * uniform_open(rng);
    CHECK(ball_average(f.grid, f.Lambda, c, r) == doctest::Approx(oracle::ball_average(f.grid, f.Lambda, c, r)));
    const Vec sq = f.Lambda.array().square();
    CHECK(ball_norm(f.grid, f.Lambda, 2.0, c, r) ==
          doctest::Approx(std::sqrt(oracle::ball_average(f.grid, sq, c, r))));
  }
  CHECK_THROWS_AS(ball_average(f.grid, f.Lambda, {0, 0, 0}, 17.0), DomainError);

  const Grid g(2, 16, 1.0);
  CHECK(a_script(EnvironmentField::constant(g, 4.0), {8, 8, 0}, 4.0) == doctest::Approx(4.0));
  CHECK(a_script(EnvironmentField::constant(g, 0.25), {8, 8, 0}, 4.0) == doctest::Approx(4.0));
  // theta = 2 enters twice: as ||theta||_r and as the weight in ||Lambda/theta v 1||_{p,theta}.
  CHECK(a_script(EnvironmentField::constant(g, 1.0, 2.0), {2, 2, 2}, {8, 8, 0}, 4.0) ==
        doctest::Approx(2.0 * std::sqrt(2.0)));
}

TEST_CASE("ball-average curves report a burn-in radius") {
  const Grid g(2, 32, 1.0);
  const double radii[] = {1, 2, 4, 8};
  const Point centers[] = {{16, 16, 0}};
  const MomentReport rep = environment_stats(EnvironmentField::constant(g, 3.0), centers, radii);
  CHECK(rep.curves.front().burn_in == 1.0);
  CHECK(rep.Lambda_mean == doctest::Approx(3.0));
}

TEST_CASE("enum names round-trip") {
  for (auto m : {MarginalModel::checkerboard, MarginalModel::blob}) CHECK(parse_marginal_model(to_string(m)) == m);
  for (auto m : {SpeedMode::unit, SpeedMode::lambda, SpeedMode::independent}) CHECK(parse_speed_mode(to_string(m)) == m);
  for (auto m : {MomentRegime::none, MomentRegime::m1, MomentRegime::m2}) CHECK(parse_moment_regime(to_string(m)) == m);
  CHECK_THROWS_AS(parse_speed_mode("fast"), ValidationError);
}
