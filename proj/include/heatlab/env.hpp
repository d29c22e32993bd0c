#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "heatlab/grid.hpp"

namespace heatlab {

using Vec = Eigen::VectorXd;

inline constexpr double kNoTail = std::numeric_limits<double>::infinity();

enum class MarginalModel { checkerboard, blob };
enum class SpeedMode { unit, lambda, independent };
enum class MomentRegime { none, m1, m2 };

struct MomentExponents {
  double p = 2.0;
  double q = 2.0;
  double r = 2.0;
};

/// Parameters of a stationary random environment on the torus [0, L)^d.
///
/// Each diagonal entry is a_e = P_e / Q_e with P_e ~ Pareto(upper_tail) and
/// Q_e ~ Pareto(lower_tail), so E[Lambda^s] < inf iff upper_tail > s and
/// E[lambda^{-s}] < inf iff lower_tail > s. A tail index of kNoTail pins the
/// corresponding factor to 1.
struct EnvironmentSpec {
  int dim = 2;
  double box_side = 64.0;
  int cells_per_side = 64;
  double dependence_range = 4.0;
  MarginalModel model = MarginalModel::checkerboard;
  double upper_tail = 8.0;
  double lower_tail = 8.0;
  SpeedMode speed = SpeedMode::lambda;
  double speed_tail = 8.0;
  MomentExponents exponents{};
  MomentRegime regime = MomentRegime::m2;
  std::uint64_t seed = 1;
  // Negative control: skip the mollifier (piecewise-constant blocks for the
  // checkerboard model, per-cell noise for blobs).
  bool mollify = true;

  double spacing() const { return box_side / cells_per_side; }
};

// Throws ValidationError naming the violated constraint, or
// MomentMarginError when tail indices leave less than 10% margin.
void validate(const EnvironmentSpec& spec);

struct EnvironmentField {
  EnvironmentSpec spec;
  Grid grid;
  std::vector<Vec> diag_a;  // one array per axis
  Vec lambda;               // min_e a_e
  Vec Lambda;               // max_e a_e
  Vec theta;
  std::uint64_t seed = 0;

  // Builds a field from explicit arrays; lambda/Lambda derived, all
  // invariants checked.
  static EnvironmentField from_arrays(const Grid& grid, std::vector<Vec> diag_a, Vec theta);
  static EnvironmentField constant(const Grid& grid, double a, double theta = 1.0);

  // Same coefficient field, different speed measure (unit or lambda).
  EnvironmentField with_speed(SpeedMode mode) const;
  void check_invariants() const;
};

EnvironmentField generate_environment(const EnvironmentSpec& spec, int workers = 0);

// Closed-form expectations of the marginals implied by an EnvironmentSpec's Pareto
// construction (exact for the checkerboard model, upper bounds for blobs).
double expected_Lambda_power(const EnvironmentSpec& spec, double s);
double expected_lambda_power(const EnvironmentSpec& spec, double s);
double expected_theta_power(const EnvironmentSpec& spec, double s);
// E[exp(s * max(Z_1..Z_d))] for iid Z = log P - log Q with Pareto indices
// (alpha, beta); finite for -d*beta < s < alpha.
double max_log_ratio_mgf(double s, double alpha, double beta, int d);

// (1/|B|) sum_{B} f * weight, midpoint rule over cells with centers in B.
double ball_average(const Grid& grid, const Vec& f, const Point& center, double radius);
// ((1/|B|) sum_{B} |f|^p nu)^{1/p}; nu = nullptr means unit weight.
double ball_norm(const Grid& grid, const Vec& f, double p, const Point& center, double radius,
                 const Vec* nu = nullptr);

struct BallCurve {
  Point center{};
  std::vector<double> radii;
  std::vector<double> Lambda_p;       // ball average of Lambda^p
  std::vector<double> lambda_inv_q;   // ball average of lambda^{-q}
  double burn_in = 0.0;               // N1_hat; +inf if never stable
};

struct MomentReport {
  double Lambda_p = 0;
  double lambda_inv_q = 0;
  double theta_r = 0;
  double Lambda_p_theta_1mp = 0;
  double theta_inv = 0;
  double Lambda_mean = 0;
  std::vector<BallCurve> curves;
};

MomentReport environment_stats(const EnvironmentField& field, std::span<const Point> centers,
                               std::span<const double> radii);
MomentReport environment_stats(const EnvironmentField& field, const MomentExponents& exps,
                               std::span<const Point> centers, std::span<const double> radii);

// ||1 v Lambda/theta||_{p,B,theta} * ||1 v 1/lambda||_{q,B} * ||1 v theta||_{r,B}
double a_script(const EnvironmentField& field, const Point& center, double n);
double a_script(const EnvironmentField& field, const MomentExponents& exps, const Point& center,
                double n);

std::string to_string(MarginalModel m);
std::string to_string(SpeedMode m);
std::string to_string(MomentRegime m);
MarginalModel parse_marginal_model(const std::string& s);
SpeedMode parse_speed_mode(const std::string& s);
MomentRegime parse_moment_regime(const std::string& s);

}  // namespace heatlab
