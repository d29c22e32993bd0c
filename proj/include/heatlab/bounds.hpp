#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "heatlab/heat.hpp"
#include "heatlab/metric.hpp"

namespace heatlab {

struct Provenance {
  std::uint64_t seed = 0;
  int dim = 0;
  int cells_per_side = 0;
  double spacing = 0.0;
  std::size_t source = 0;
  std::string speed;
};

Provenance provenance_of(const EnvironmentField& field, std::size_t source);

// One point of a per-time curve: the extremal log-ratio at time t.
struct CurvePoint {
  double t = 0.0;
  double value = 0.0;
  std::size_t samples = 0;
};

struct BoundFit {
  std::string theorem;
  std::map<std::string, double> constants;
  double t_min = 0.0, t_max = 0.0;
  double r_min = 0.0, r_max = 0.0;
  double worst_log_ratio = 0.0;
  double burn_in = 0.0;
  double trend_slope = 0.0;
  bool pass = false;
  std::vector<CurvePoint> curve;
  std::vector<std::string> notes;
  Provenance provenance;
};

struct SampleRange {
  double max_distance = 0.0;   // 0: a quarter of the box side
  double resolve_floor = 1e-10;  // keep p >= floor * max_y p(t, x0, y)
  double t_min = 0.0;
  double t_max = std::numeric_limits<double>::infinity();
};

struct KernelSample {
  std::size_t time_index;
  double t;
  double p;
  double distance;  // Euclidean, periodic
  double metric;    // d_theta (NaN when no metric map was supplied)
};

std::vector<KernelSample> collect_samples(const KernelColumn& col, const Grid& grid, const MetricField* metric,
                                          const SampleRange& range);

// Smallest stored time t_k such that the worst log-ratio over all later
// times, max_{j >= k} (min for lower bounds), changes by less than 5% of its
// magnitude between every pair of consecutive (dyadic) times from t_k on;
// +inf if never.
double dyadic_burn_in(std::span<const CurvePoint> curve, bool upper = true);

// Least-squares slope of value against log t.
double trend_slope(std::span<const CurvePoint> curve);

struct UpperOptions {
  double gamma_max = 20.0;
  double gamma_step = 0.05;
  double max_slope = 0.05;
  double min_octaves = 3.0;
  // Use this gamma instead of fitting (shared across an ensemble).
  double fixed_gamma = -1.0;
};

// p <= c1 t^{-d/2} (1 + d/sqrt t)^gamma exp(-d_theta^2 / (8t)).
BoundFit verify_upper_intrinsic(const KernelColumn& col, const MetricField& metric, const EnvironmentField& field,
                                const SampleRange& range = {}, const UpperOptions& options = {});

struct EuclideanOptions {
  double slack = 1.05;  // c21(c22) <= slack * c21(0)
  double min_c22 = 0.01;
  double max_slope = 0.05;
  double min_octaves = 3.0;
};

// p <= c21 t^{-d/2} exp(-c22 |x - y|^2 / t), theta = Lambda.
BoundFit verify_upper_euclidean(const KernelColumn& col, const EnvironmentField& field, const SampleRange& range = {},
                                const EuclideanOptions& options = {});

struct LowerOptions {
  double c4_cap = 10.0;
  double fraction = 0.95;  // c3(c4) >= fraction * c3(c4_cap)
  double stability = 1.10;
};

// p >= c3 t^{-d/2} exp(-c4 |x - y|^2 / t) for t >= N (1 v |x - y|), theta = Lambda.
BoundFit verify_lower(const KernelColumn& col, const EnvironmentField& field, const SampleRange& range = {},
                      const LowerOptions& options = {});

struct HarnackParams {
  double c11 = -1.0;  // negative: (4 pi)^{d/2}
  double c12 = 1.0;
  double kappa = 1.0;
  double p = 2.0;
  double q = 2.0;
};

// c11 exp(c12 ((1 v ||Lambda||_{p,B}) (1 v ||1/lambda||_{q,B}))^kappa).
double harnack_constant(const EnvironmentField& field, const Point& center, double radius, const HarnackParams& params);

struct FloorCheck {
  double t = 0.0;
  double harnack = 0.0;
  double floor = 0.0;     // t^{-d/2} / C_PH
  double min_kernel = 0.0;  // over B(x0, sqrt(t)/2)
  double margin = 0.0;    // min_kernel / floor
  bool pass = false;
};

FloorCheck near_diagonal_floor(const KernelColumn& col, std::size_t time_index, const EnvironmentField& field,
                               const HarnackParams& params = {});

struct LongRangeSample {
  double n;
  double x_norm;
  double t;
  double p;
  double log_ratio;  // log(p / (n^d exp(-n^2 |x|^2 / (2t))))
};

struct LongRangeOptions {
  std::vector<double> scales{4, 8, 16};
  std::vector<double> radii{0.5, 1.0, 2.0};      // |x|
  std::vector<double> relative_times{0.01, 0.02, 0.05, 0.1, 0.25, 0.5, 1, 2, 4};  // t / (n |x|)^2
  int directions = 8;
  double resolve_floor = 1e-10;
};

// Times at which a single column must be stored to serve the long-range check.
std::vector<double> long_range_times(const LongRangeOptions& options);

struct LongRangeFit {
  BoundFit fit;
  std::vector<LongRangeSample> samples;
  std::vector<double> per_scale_constant;  // sup ratio for each n
};

// p(t, 0, n x) <= c23 n^d exp(-n^2 |x|^2 / (2t)); c23 fitted at the smallest
// scale must bound every larger scale.
LongRangeFit verify_long_range(const KernelColumn& col, const EnvironmentField& field,
                               const LongRangeOptions& options = {});

// Moser exponent kappa = (p*/2) alpha / (alpha - 1), alpha = 1 + 1/p* - r*/rho.
double moser_kappa(int dim, const MomentExponents& exps);
double sobolev_rho(int dim, double q);

struct SobolevReport {
  double rho = 0.0;
  std::vector<double> ratios;
  double sup_ratio = 0.0;
};

// Trial functions built from a few random physical-space Fourier modes, so
// the same function can be sampled at several resolutions.
std::vector<Vec> sobolev_trial_functions(const Grid& grid, std::size_t count, std::uint64_t seed, double wavelength);

// ||eta^2 u^2||_{rho/r*,B,theta} / (|B|^{2/d} ||1/lambda||_{q,B} ||theta||_{r,B}^{r*/rho} E(eta u)/|B|)
// with eta = (1 - |x - c|^2 / R^2)_+^2.
SobolevReport sobolev_probe(const EnvironmentField& field, const Point& center, double radius,
                            const MomentExponents& exps, std::span<const Vec> trials);

struct CylinderParams {
  double delta = 1.0;
  double sigma = 1.0;
  double sigma_prime = 0.5;
  double epsilon = 0.2;
  double n = 4.0;
  int time_samples = 16;
};

struct MaximalReport {
  double max_v = 0.0;
  double norm = 0.0;  // ||v||_{2p*,2,Q_{delta,sigma}(n),theta}
  double h2 = 0.0;
  double a_script = 0.0;
  double kappa = 0.0;
  double factor = 0.0;  // ((1 + delta n^2 h^2) A / (eps (sigma - sigma')^2))^{kappa/p*}
  double ratio = 0.0;
};

// v = e^psi u_t with u_t = e^{tL} f, sampled on the cylinders around x0.
MaximalReport maximal_inequality_probe(const DiscreteGenerator& gen, const Vec& psi, const Vec& f, std::size_t x0,
                                       const CylinderParams& cyl, const MomentExponents& exps, double kappa = -1.0,
                                       const EvolveOptions& options = {});

}  // namespace heatlab
