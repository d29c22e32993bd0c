#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "heatlab/operator.hpp"

namespace heatlab {

enum class ErrorEstimate {
  // Leading Crank-Nicolson defect dt^3/12 * |L^3 u|; matvecs only.
  taylor,
  // Compare one step of dt against two of dt/2; three solves per step.
  step_doubling,
};

struct EvolveOptions {
  double tolerance = 1e-8;  // local error per step, relative to sup norm
  ErrorEstimate estimate = ErrorEstimate::taylor;
  // Upper bound on the step; 0 means the positivity limit 2 / max|L(x,x)|.
  double max_step = 0.0;
  // Use the dense eigendecomposition when the grid has at most this many
  // cells (0 disables).
  std::size_t dense_limit = 0;
};

struct EvolveStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  double min_step = 0.0;
  double max_step = 0.0;
  double step_cap = 0.0;
  std::string method;
};

/// p(t, x0, .) as a density with respect to theta h^d.
struct KernelColumn {
  std::size_t source = 0;
  std::vector<double> times;
  std::vector<Vec> values;
  EvolveStats stats;
  double tolerance = 0.0;

  const Vec& at(double t) const;
};

// Exact semigroup of a small generator from the eigendecomposition of the
// symmetrized matrix theta^{-1/2} K theta^{-1/2}.
class DenseSemigroup {
 public:
  explicit DenseSemigroup(const DiscreteGenerator& gen);
  Vec apply(const Vec& f, double t) const;  // e^{tL} f
  Vec column(std::size_t x0, double t) const;  // p(t, x0, .)
  Eigen::MatrixXd kernel(double t) const;      // p(t, x, y)
  const Vec& eigenvalues() const { return eigenvalues_; }

 private:
  Vec sqrt_theta_;
  Vec eigenvalues_;
  Eigen::MatrixXd vectors_;
  double cell_volume_;
};

// Positivity-preserving Crank-Nicolson step limit 2 / max_x |L(x,x)|.
double positivity_step_cap(const DiscreteGenerator& gen);

// e^{tL} f at each of the increasing times.
std::vector<Vec> evolve(const DiscreteGenerator& gen, const Vec& f, std::span<const double> times,
                        const EvolveOptions& options = {}, EvolveStats* stats = nullptr);

Vec delta_density(const DiscreteGenerator& gen, std::size_t x0);

KernelColumn heat_kernel_column(const DiscreteGenerator& gen, std::size_t x0,
                                std::span<const double> times, const EvolveOptions& options = {});

// Mass sum p theta h^d of a density.
double kernel_mass(const DiscreteGenerator& gen, const Vec& p);

// max_y |p(t_j, x0, y) - sum_u p(t_i, x0, u) p(t_j - t_i, u, y) theta(u) h^d|.
// The convolution is evaluated by propagating column i for t_j - t_i.
double chapman_kolmogorov_check(const KernelColumn& col, const DiscreteGenerator& gen, std::size_t i,
                                std::size_t j, const EvolveOptions& options = {});

struct CauchySlack {
  double lhs = 0.0;        // ||e^psi u_t||^2_{2,theta}
  double initial = 0.0;    // ||e^psi f||^2_{2,theta}
  double h2 = 0.0;         // h(psi)^2
  double rhs = 0.0;        // e^{h^2 t} * initial
  double slack = 0.0;      // rhs - lhs
  // Discrete growth rate H = max_x theta(x)^{-1} sum_y c(x,y)(cosh(psi_y - psi_x) - 1);
  // the discrete semigroup satisfies lhs <= e^{2Ht} * initial.
  double sharp_rate = 0.0;
  double sharp_rhs = 0.0;
  double sharp_slack = 0.0;
};

CauchySlack perturbed_l2_check(const DiscreteGenerator& gen, const Vec& psi, const Vec& f, double t,
                               const EvolveOptions& options = {});

struct WalkerResult {
  std::size_t source = 0;
  double time = 0.0;
  std::uint64_t paths = 0;
  std::uint64_t killed = 0;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> counts;  // final cell occupancy
  Point mean{};                       // mean unwrapped displacement
  Point variance{};                   // per-axis variance of displacement
  std::array<std::array<double, 3>, 3> covariance{};
  double jumps_per_path = 0.0;
};

WalkerResult simulate_walkers(const DiscreteGenerator& gen, std::size_t x0, double t,
                              std::uint64_t n_paths, std::uint64_t seed, int workers = 0);

// Displacement moments of surviving walkers at one time.
struct WalkerSnapshot {
  double time = 0.0;
  std::uint64_t alive = 0;
  Point mean{};
  std::array<std::array<double, 3>, 3> covariance{};
};

// Moments of the same paths observed at each of the increasing times.
std::vector<WalkerSnapshot> walker_moments(const DiscreteGenerator& gen, std::size_t x0, std::span<const double> times,
                                           std::uint64_t n_paths, std::uint64_t seed, int workers = 0);

struct WalkerComparison {
  double tv = 0.0;     // total variation distance to the kernel
  double bound = 0.0;  // 1/2 sum_y sqrt(q_y (1 - q_y) / n)
};

WalkerComparison compare_walkers(const WalkerResult& walkers, const DiscreteGenerator& gen,
                                 const Vec& density);

}  // namespace heatlab
