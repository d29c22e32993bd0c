#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "heatlab/heat.hpp"

namespace heatlab {

using Covariance = Eigen::Matrix3d;  // top-left dim x dim block is used

// k_t(x, y) = (2 pi t)^{-d/2} det(Sigma)^{-1/2} exp(-(y-x).Sigma^{-1}(y-x) / 2t).
double gaussian_kernel(double t, const Point& x, const Point& y, const Covariance& sigma, int dim);

// int_0^inf k_t(x, y) dt = Gamma(d/2 - 1) / (2 pi^{d/2} sqrt(det Sigma) Q^{(d-2)/2}),
// Q = (y-x).Sigma^{-1}(y-x); d >= 3.
double brownian_green(const Point& x, const Point& y, const Covariance& sigma, int dim);

struct GreenOptions {
  double tolerance = 1e-9;  // relative residual of the linear system
  int max_iterations = 50000;
  // Exterior values at ghost-cell centers (positions outside the box);
  // nullptr means zero Dirichlet data.
  std::function<double(const Point&)> boundary;
};

/// g(x0, .) = int_0^inf p(t, x0, .) dt on a Dirichlet box.
struct GreenField {
  Grid grid;
  std::size_t source = 0;
  Vec values;
  double residual = 0.0;  // relative
  int iterations = 0;
};

// Solves -L g = delta_{x0} / (theta(x0) h^d) with conjugate gradients on the
// symmetric system -K g = delta / h^d (+ boundary data).
GreenField green_function(const DiscreteGenerator& gen, std::size_t x0, const GreenOptions& options = {});

// Trilinear (bilinear in 2D) interpolation of cell-centered values at a
// physical point inside the box.
double interpolate(const Grid& grid, const Vec& values, const Point& x);

struct SigmaEstimate {
  std::vector<double> times;
  std::vector<Covariance> per_time;
  Covariance sigma = Covariance::Zero();  // estimate at the largest time
  double trend = 0.0;  // slope of trace(Sigma(t)) / trace(sigma) against log t
  bool stable = false;
  std::string warning;
};

// Sigma(t) = (1/t) sum_y (y - x0)(y - x0)^T p(t, x0, y) theta(y) h^d.
SigmaEstimate sigma_estimate(const KernelColumn& col, const DiscreteGenerator& gen, double t_min = 0.0,
                             double t_max = std::numeric_limits<double>::infinity(), double max_trend = 0.02);

// Secant estimate (Cov(t2) - Cov(t1)) / (t2 - t1) from walkers followed
// through both times.
SigmaEstimate sigma_from_walkers(const DiscreteGenerator& gen, std::size_t x0, double t1, double t2,
                                 std::uint64_t paths, std::uint64_t seed, int workers = 0);

struct ScalingOptions {
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  double r1 = 0.375, r2 = 0.75;
  std::vector<double> scales{4, 8, 16};
  int points = 64;
  // Sigma from walkers on the periodic field.
  std::uint64_t walker_paths = 100000;
  double walker_t1 = 50.0, walker_t2 = 200.0;
  // Negative control: compare against wrong_a * g_BM (<= 0 disables).
  double wrong_a = 1.0;
  GreenOptions green{};
  int workers = 0;
};

struct ScalingRun {
  std::uint64_t seed = 0;
  double a = 0.0;
  Covariance sigma = Covariance::Zero();
  std::vector<double> errors;        // e_n
  std::vector<double> wrong_errors;  // e_n with the wrong a
  double residual = 0.0;
  int iterations = 0;
  bool decreasing = false;
};

struct ScalingReport {
  std::vector<double> scales;
  std::vector<ScalingRun> runs;
  Covariance sigma = Covariance::Zero();  // ensemble mean of the walker estimates
  bool pass = false;                      // every run decreasing, e_last < e_first / 2
  bool control_plateaus = false;          // wrong-a errors do not halve
};

// Quasi-uniform points in the annulus r1 <= |x| <= r2 (Fibonacci directions,
// volume-uniform radii).
std::vector<Point> annulus_points(int count, double r1, double r2, int dim);

// e_n = max over annulus points of |n^{d-2} g(x0, x0 + n x) - a g_BM(x)|.
std::vector<double> scaling_errors(const GreenField& green, const std::vector<Point>& points,
                                   const std::vector<double>& scales, double a, const Covariance& sigma);

// Runs the experiment for every seed of `spec` (d = 3, theta = Lambda); the
// source is the box center and the Dirichlet data is a g_BM.
ScalingReport scaling_limit_experiment(const EnvironmentSpec& spec, const ScalingOptions& options = {});

}  // namespace heatlab
