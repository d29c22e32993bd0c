#include <doctest.h>

#include "heatlab/errors.hpp"
#include "heatlab/operator.hpp"
#include "heatlab/random.hpp"
#include "oracles.hpp"

using namespace heatlab;

namespace {

EnvironmentField random_field(std::uint64_t seed, int n = 8, int dim = 2) {
  EnvironmentSpec s;
  s.dim = dim;
  s.box_side = n;
  s.cells_per_side = n;
  s.dependence_range = 2;
  s.exponents = {5, 5, 2};
  s.seed = seed;
  return generate_environment(s);
}

Vec random_vec(std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed, {77});
  Vec v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = standard_normal(rng);
  return v;
}

}  // namespace

TEST_CASE("assembly matches a naive dense construction") {
  for (std::uint64_t seed : {1, 2, 3}) {
    for (int dim : {2, 3}) {
      const EnvironmentField f = random_field(seed, 8, dim);
      for (Boundary b : {Boundary::periodic, Boundary::dirichlet}) {
        const DiscreteGenerator gen = assemble_generator(f, {b, EdgeMean::harmonic});
        const oracle::Mat K = oracle::conductance_matrix(f, b == Boundary::periodic);
        CHECK((oracle::Mat(gen.K) - K).cwiseAbs().maxCoeff() <= 1e-12 * K.cwiseAbs().maxCoeff());
      }
    }
  }
}

TEST_CASE("periodic rows sum to zero and K is symmetric") {
  const DiscreteGenerator gen = assemble_generator(random_field(4, 16));
  const oracle::Mat K(gen.K);
  CHECK((K - K.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(K.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-12 * K.cwiseAbs().maxCoeff());
  for (Eigen::Index x = 0; x < K.rows(); ++x)
    for (Eigen::Index y = 0; y < K.cols(); ++y)
      if (x != y) CHECK(K(x, y) >= 0.0);
  const Vec one = Vec::Ones(static_cast<Eigen::Index>(gen.size()));
  CHECK(gen.apply(one).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("Dirichlet mode leaks through boundary edges only") {
  const EnvironmentField f = random_field(5, 8);
  const DiscreteGenerator gen = assemble_generator(f, {Boundary::dirichlet, EdgeMean::harmonic});
  CHECK(gen.boundary_edges.size() == 4 * 8);
  const oracle::Mat K(gen.K);
  const Vec rows = K.rowwise().sum();
  for (const BoundaryEdge& b : gen.boundary_edges) CHECK(rows[static_cast<Eigen::Index>(b.cell)] < 0.0);
  // -K is positive definite.
  Eigen::LLT<oracle::Mat> llt(-K);
  CHECK(llt.info() == Eigen::Success);
}

TEST_CASE("energy identity and weighted self-adjointness") {
  const EnvironmentField f = random_field(6, 12);
  for (Boundary b : {Boundary::periodic, Boundary::dirichlet}) {
    const DiscreteGenerator gen = assemble_generator(f, {b, EdgeMean::harmonic});
    const Vec u = random_vec(gen.size(), 1), v = random_vec(gen.size(), 2);
    const double vol = gen.grid.cell_volume();
    CHECK(dirichlet_energy(gen, u) == doctest::Approx(-u.dot(gen.K * u) * vol).epsilon(1e-12));
    CHECK(weighted_inner_product(gen.apply(u), v, gen) ==
          doctest::Approx(weighted_inner_product(u, gen.apply(v), gen)).epsilon(1e-12));
  }
}

TEST_CASE("exit rates and arithmetic means") {
  const Grid g(2, 8, 0.5);
  const DiscreteGenerator gen = assemble_generator(EnvironmentField::constant(g, 2.0, 4.0));
  // Four neighbours, conductance 2 / h^2 = 8, theta 4.
  CHECK(gen.exit_rate(0) == doctest::Approx(8.0));
  const EnvironmentField f = random_field(7, 8);
  const DiscreteGenerator ar = assemble_generator(f, {Boundary::periodic, EdgeMean::arithmetic});
  const DiscreteGenerator hm = assemble_generator(f);
  CHECK(ar.edges.size() == hm.edges.size());
  for (std::size_t i = 0; i < hm.edges.size(); ++i) CHECK(ar.edges[i].conductance >= hm.edges[i].conductance * (1 - 1e-15));
}

TEST_CASE("h(psi)^2 for a linear potential on a constant field") {
  const Grid g(2, 16, 1.0);
  const DiscreteGenerator gen = assemble_generator(EnvironmentField::constant(g, 3.0, 2.0), {Boundary::dirichlet});
  Vec psi(static_cast<Eigen::Index>(g.size()));
  for (std::size_t x = 0; x < g.size(); ++x) psi[static_cast<Eigen::Index>(x)] = 0.25 * g.position(x)[0];
  CHECK(h_squared(gen, psi) == doctest::Approx(3.0 * 0.0625 / 2.0));
}

TEST_CASE("shape mismatches are reported") {
  const DiscreteGenerator gen = assemble_generator(random_field(8, 8));
  CHECK_THROWS_AS(gen.apply(Vec::Ones(5)), DimensionError);
  CHECK_THROWS_AS(dirichlet_energy(gen, Vec::Ones(5)), DimensionError);
  CHECK_THROWS_AS(parse_boundary("open"), ValidationError);
}
