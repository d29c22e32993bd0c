#include <doctest.h>

#include <cmath>

#include "heatlab/errors.hpp"
#include "heatlab/heat.hpp"
#include "heatlab/random.hpp"
#include "oracles.hpp"

using namespace heatlab;

namespace {

EnvironmentField random_field(std::uint64_t seed, int n = 8) {
  EnvironmentSpec s;
  s.box_side = n;
  s.cells_per_side = n;
  s.dependence_range = 2;
  s.exponents = {5, 5, 2};
  s.seed = seed;
  return generate_environment(s);
}

}  // namespace

TEST_CASE("dense semigroup matches a scaling-and-squaring exponential") {
  for (std::uint64_t seed : {1, 2}) {
    const EnvironmentField f = random_field(seed);
    const DenseSemigroup dense(assemble_generator(f));
    for (double t : {0.1, 1.0, 3.0}) {
      const oracle::Mat P = oracle::kernel(f, t);
      CHECK((dense.kernel(t) - P).cwiseAbs().maxCoeff() <= 1e-10 * P.cwiseAbs().maxCoeff());
    }
  }
}

TEST_CASE("Crank-Nicolson columns match the dense oracle for both error estimators") {
  const EnvironmentField f = random_field(3);
  const DiscreteGenerator gen = assemble_generator(f);
  const oracle::Mat P = oracle::kernel(f, 2.0);
  for (ErrorEstimate est : {ErrorEstimate::taylor, ErrorEstimate::step_doubling}) {
    EvolveOptions eo;
    eo.tolerance = 1e-10;
    eo.estimate = est;
    const double times[] = {0.5, 2.0};
    const KernelColumn col = heat_kernel_column(gen, 10, times, eo);
    CHECK((col.at(2.0) - P.row(10).transpose()).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("kernels conserve mass, stay positive and are symmetric") {
  const EnvironmentField f = random_field(4, 16);
  for (SpeedMode mode : {SpeedMode::lambda, SpeedMode::unit}) {
    const DiscreteGenerator gen = assemble_generator(f.with_speed(mode));
    const double times[] = {0.25, 1, 4, 16};
    const KernelColumn a = heat_kernel_column(gen, 0, times);
    const KernelColumn b = heat_kernel_column(gen, 77, times);
    for (std::size_t k = 0; k < a.values.size(); ++k) {
      CHECK(std::abs(kernel_mass(gen, a.values[k]) - 1.0) <= 1e-9);
      CHECK(a.values[k].minCoeff() >= -1e-12);
      CHECK(std::abs(a.values[k][77] - b.values[k][0]) <= 1e-7 * a.values[k].maxCoeff());
    }
    CHECK(a.stats.max_step <= positivity_step_cap(gen) * (1 + 1e-12));
  }
}

TEST_CASE("Dirichlet kernels lose mass monotonically") {
  const EnvironmentField f = random_field(5, 16);
  const DiscreteGenerator gen = assemble_generator(f, {Boundary::dirichlet, EdgeMean::harmonic});
  const double times[] = {1, 2, 4, 8};
  const KernelColumn col = heat_kernel_column(gen, 136, times);
  double prev = 1.0;
  for (const Vec& p : col.values) {
    const double m = kernel_mass(gen, p);
    CHECK(m < prev);
    prev = m;
  }
}

TEST_CASE("Chapman-Kolmogorov") {
  const DiscreteGenerator gen = assemble_generator(random_field(6));
  EvolveOptions eo;
  eo.tolerance = 1e-10;
  const double times[] = {0.5, 1.5, 3};
  const KernelColumn col = heat_kernel_column(gen, 5, times, eo);
  CHECK(chapman_kolmogorov_check(col, gen, 0, 2, eo) <= 1e-8);
  CHECK(chapman_kolmogorov_check(col, gen, 1, 1, eo) == 0.0);
}

TEST_CASE("perturbed Cauchy bound: psi = 0 is the L2 contraction") {
  const DiscreteGenerator gen = assemble_generator(random_field(7));
  Rng rng = make_rng(1, {5});
  Vec f(static_cast<Eigen::Index>(gen.size()));
  for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = standard_normal(rng);
  const CauchySlack s = perturbed_l2_check(gen, Vec::Zero(f.size()), f, 1.0);
  CHECK(s.h2 == 0.0);
  CHECK(s.rhs == doctest::Approx(weighted_inner_product(f, f, gen)));
  CHECK(s.slack >= 0.0);
  CHECK_THROWS_AS(perturbed_l2_check(gen, Vec::Constant(f.size(), 400.0), f, 1.0), DomainError);
}

TEST_CASE("perturbed Cauchy bound: the e^{h^2 t} form fails for a tilted start, e^{2Ht} holds") {
  // v_0 = e^psi f constant: the gradient term vanishes initially and the
  // weighted norm grows at rate 2 h^2, faster than e^{h^2 t} allows.
  const Grid g(2, 64, 1.0);
  const DiscreteGenerator gen = assemble_generator(EnvironmentField::constant(g, 1.0), {Boundary::periodic});
  Vec psi(static_cast<Eigen::Index>(g.size())), f(psi.size());
  const double beta = 0.3, L = g.side();
  for (std::size_t x = 0; x < g.size(); ++x) {
    const double s = std::sin(2 * 3.14159265358979 * g.position(x)[0] / L);
    psi[static_cast<Eigen::Index>(x)] = beta * L / (2 * 3.14159265358979) * s;
  }
  f = (-psi.array()).exp();
  const CauchySlack s = perturbed_l2_check(gen, psi, f, 0.5);
  CHECK(s.slack < 0.0);
  CHECK(s.sharp_slack >= 0.0);
}

TEST_CASE("walkers: determinism, moments and agreement with the kernel") {
  const Grid g(2, 64, 1.0);
  const DiscreteGenerator flat = assemble_generator(EnvironmentField::constant(g, 2.0));
  const WalkerResult w = simulate_walkers(flat, 2080, 3.0, 200000, 9, 1);
  // Each axis jumps at total rate 2a = 4: variance 4 t.
  CHECK(w.variance[0] == doctest::Approx(12.0).epsilon(0.02));
  CHECK(w.variance[1] == doctest::Approx(12.0).epsilon(0.02));
  CHECK(std::abs(w.mean[0]) < 0.05);

  const DiscreteGenerator gen = assemble_generator(random_field(8));
  const WalkerResult a = simulate_walkers(gen, 3, 2.0, 100000, 4, 1);
  const WalkerResult b = simulate_walkers(gen, 3, 2.0, 100000, 4, 3);
  CHECK(a.counts == b.counts);
  const double times[] = {2.0};
  EvolveOptions eo;
  eo.tolerance = 1e-10;
  const WalkerComparison c = compare_walkers(a, gen, heat_kernel_column(gen, 3, times, eo).values[0]);
  CHECK(c.tv <= 3.0 * c.bound);
}

TEST_CASE("walker snapshots follow the same paths") {
  const Grid g(2, 64, 1.0);
  const DiscreteGenerator flat = assemble_generator(EnvironmentField::constant(g, 1.0));
  const double times[] = {1.0, 4.0};
  const auto snaps = walker_moments(flat, 2080, times, 100000, 3, 1);
  REQUIRE(snaps.size() == 2);
  CHECK(snaps[1].covariance[0][0] - snaps[0].covariance[0][0] == doctest::Approx(6.0).epsilon(0.05));
  CHECK(std::abs(snaps[1].covariance[0][1]) < 0.1);
}
