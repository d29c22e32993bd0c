#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "heatlab/env.hpp"
#include "heatlab/random.hpp"

namespace heatlab {

/// Chain of k + 1 points x_j = (j/k) x from 0 to x, balls B(x_j, r/48) and
/// time step s = r |x| / k.
struct ChainGeometry {
  int dim = 2;
  Point x{};
  double r = 0.0;
  double length = 0.0;  // |x|
  int k = 0;
  std::vector<Point> points;
  double ball_radius = 0.0;
  double s = 0.0;
};

// k is the smallest integer >= 12|x|/r; requires 0 < r <= 4|x|.
ChainGeometry chain_geometry(const Point& x, double r, int dim);

// y_0 = origin, y_k = origin + x, y_j uniform in B(origin + x_j, r/48) otherwise.
std::vector<Point> random_admissible_sequence(const ChainGeometry& chain, const Point& origin, Rng& rng);

struct ChainedAverageReport {
  int k = 0;
  double s = 0.0;
  std::vector<double> terms;  // (1 v ||Lambda||_p)^kappa (1 v ||1/lambda||_q)^kappa per ball
  double sum = 0.0;
  double mean = 0.0;  // sum / k
  // Hoelder step at kappa = 1:
  // sum (1 v A_j)(1 v B_j) <= k^{1-1/p-1/q} (sum 1 v A_j^p)^{1/p} (sum 1 v B_j^q)^{1/q}.
  double holder_lhs = 0.0;
  double holder_rhs = 0.0;
};

// Sum over j < k of the ergodic terms on the balls B(y_j, sqrt(s)).
ChainedAverageReport chained_average_bound(const EnvironmentField& field, const ChainGeometry& chain,
                                           std::span<const Point> y, const Point& origin,
                                           const MomentExponents& exps, double kappa = 1.0);

/// Finitely supported random variable.
struct DiscreteVariable {
  std::vector<double> values;
  std::vector<double> probs;

  double mean() const;
  double abs_moment(double k) const;
};

// Random variable with `support` atoms, shifted to mean zero.
DiscreteVariable random_centered_variable(Rng& rng, int support);

struct RosenthalReport {
  double lhs = 0.0;             // E|sum Y_i|^k, exact
  double sum_abs_moments = 0.0;  // sum E|Y_i|^k
  double variance_power = 0.0;   // (sum E Y_i^2)^{k/2}
  double ratio = 0.0;
};

// Exhaustive enumeration of the product space; n <= 6 variables with at
// most 4 atoms each, k > 2.
RosenthalReport rosenthal_check(std::span<const DiscreteVariable> vars, double k);

struct RosenthalEnsemble {
  double k = 0.0;
  std::size_t ensembles = 0;
  double max_ratio = 0.0;
  double bound = 0.0;  // reported constant 2^k
  bool pass = false;
};

RosenthalEnsemble rosenthal_ensemble(std::size_t count, double k, std::uint64_t seed);

enum class MomentField { Lambda, lambda_inv };

struct MomentExperimentOptions {
  double xi = 1.5;
  std::vector<std::size_t> K{16, 64, 256, 1024};
  std::size_t samples = 2000;
  std::size_t bootstrap = 1000;
  double confidence = 0.95;
  MomentField field = MomentField::Lambda;
  double exponent = 0.0;  // 0: spec p (Lambda) or q (1/lambda)
  double max_over_min = 3.0;
  int workers = 0;
};

struct MomentRow {
  std::size_t K = 0;
  double moment = 0.0;  // E|int_R (f - E f)|^{2 xi}
  double ratio = 0.0;   // moment / K^xi
  double ci_lo = 0.0, ci_hi = 0.0;  // bootstrap interval for ratio
  double half_a = 0.0, half_b = 0.0;  // disjoint seed blocks
  double diff_ci_lo = 0.0, diff_ci_hi = 0.0;
};

struct MomentExperimentReport {
  double xi = 0.0;
  double exponent = 0.0;
  double mean = 0.0;  // analytic E f used for centering
  std::size_t samples = 0;
  std::vector<MomentRow> rows;
  double max_over_min = 0.0;
  double max_over_min_ci_lo = 0.0, max_over_min_ci_hi = 0.0;
  bool halves_agree = false;
  bool pass = false;
};

// Cubes of side R_dep tile the box; the region for K is the m^d sub-box when
// K = m^d, otherwise the first K cubes in row-major order.
std::vector<std::size_t> region_cubes(int dim, int cubes_per_side, std::size_t K);

MomentExperimentReport moment_bound_experiment(const EnvironmentSpec& spec, const MomentExperimentOptions& options = {});

std::string to_string(MomentField f);
MomentField parse_moment_field(const std::string& s);

}  // namespace heatlab
