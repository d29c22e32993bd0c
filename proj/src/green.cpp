#include "heatlab/green.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "heatlab/errors.hpp"
#include "heatlab/random.hpp"

namespace heatlab {

namespace {

Eigen::MatrixXd block(const Covariance& sigma, int dim) { return sigma.topLeftCorner(dim, dim); }

Eigen::LLT<Eigen::MatrixXd> factor(const Covariance& sigma, int dim) {
  if (dim < 1 || dim > 3) throw DimensionError("covariance dimension must be 1, 2 or 3");
  const Eigen::MatrixXd s = block(sigma, dim);
  if (!s.isApprox(s.transpose(), 1e-12)) throw MatrixError("Sigma is not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) throw MatrixError("Sigma is not positive definite");
  return llt;
}

// (y - x).Sigma^{-1}(y - x) and sqrt(det Sigma).
std::pair<double, double> quadratic(const Point& x, const Point& y, const Covariance& sigma, int dim) {
  const auto llt = factor(sigma, dim);
  Eigen::VectorXd v(dim);
  for (int a = 0; a < dim; ++a) v[a] = y[a] - x[a];
  const Eigen::VectorXd w = llt.matrixL().solve(v);
  const double sqrt_det = llt.matrixL().toDenseMatrix().diagonal().prod();
  return {w.squaredNorm(), sqrt_det};
}

}  // namespace

double gaussian_kernel(double t, const Point& x, const Point& y, const Covariance& sigma, int dim) {
  if (!(t > 0.0)) throw DomainError("gaussian_kernel: need t > 0");
  const auto [q, sqrt_det] = quadratic(x, y, sigma, dim);
  return std::pow(2.0 * std::numbers::pi * t, -0.5 * dim) / sqrt_det * std::exp(-q / (2.0 * t));
}

double brownian_green(const Point& x, const Point& y, const Covariance& sigma, int dim) {
  if (dim < 3) throw DimensionError("brownian_green: Brownian motion is recurrent for d < 3");
  const auto [q, sqrt_det] = quadratic(x, y, sigma, dim);
  if (!(q > 0.0)) return std::numeric_limits<double>::infinity();
  return std::tgamma(0.5 * dim - 1.0) / (2.0 * std::pow(std::numbers::pi, 0.5 * dim) * sqrt_det * std::pow(q, 0.5 * (dim - 2)));
}

GreenField green_function(const DiscreteGenerator& gen, std::size_t x0, const GreenOptions& options) {
  const Grid& grid = gen.grid;
  if (grid.dim() < 3)
    throw DimensionError("green_function: the process is recurrent in d = " + std::to_string(grid.dim()) +
                         "; the Green's function needs d >= 3");
  if (gen.options.boundary != Boundary::dirichlet) throw DomainError("green_function: needs a Dirichlet box generator");
  if (x0 >= grid.size()) throw DomainError("green_function: source cell outside the grid");

  const double vol = grid.cell_volume();
  Vec rhs = Vec::Zero(static_cast<Eigen::Index>(grid.size()));
  rhs[static_cast<Eigen::Index>(x0)] = 1.0 / vol;
  if (options.boundary) {
    for (const BoundaryEdge& b : gen.boundary_edges) {
      Point ghost = grid.position(b.cell);
      ghost[b.axis] += b.step * grid.spacing();
      rhs[static_cast<Eigen::Index>(b.cell)] += b.conductance * options.boundary(ghost);
    }
  }
  const SparseMatrix A = -gen.K;
  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
  cg.setTolerance(options.tolerance);
  cg.setMaxIterations(options.max_iterations);
  cg.compute(A);
  GreenField g;
  g.grid = grid;
  g.source = x0;
  g.values = cg.solve(rhs);
  g.iterations = static_cast<int>(cg.iterations());
  g.residual = (A * g.values - rhs).norm() / rhs.norm();
  if (cg.info() != Eigen::Success || !(g.residual <= 10.0 * options.tolerance)) {
    std::ostringstream os;
    os << "green_function: conjugate gradients did not converge (relative residual " << g.residual << " after "
       << g.iterations << " iterations)";
    throw SolverError(os.str());
  }
  return g;
}

double interpolate(const Grid& grid, const Vec& values, const Point& x) {
  const int d = grid.dim();
  const int n = grid.cells_per_side();
  std::array<int, 3> lo{0, 0, 0};
  std::array<double, 3> frac{0, 0, 0};
  for (int a = 0; a < d; ++a) {
    const double u = x[a] / grid.spacing();
    if (u < 0.0 || u > n - 1) throw DomainError("interpolate: point outside the grid");
    lo[a] = std::min(n - 2, static_cast<int>(std::floor(u)));
    frac[a] = u - lo[a];
  }
  double acc = 0.0;
  for (int corner = 0; corner < (1 << d); ++corner) {
    double w = 1.0;
    CellCoords c{0, 0, 0};
    for (int a = 0; a < d; ++a) {
      const int bit = (corner >> a) & 1;
      c[a] = lo[a] + bit;
      w *= bit ? frac[a] : 1.0 - frac[a];
    }
    if (w != 0.0) acc += w * values[static_cast<Eigen::Index>(grid.index(c))];
  }
  return acc;
}

namespace {

double trace(const Covariance& s, int d) { return s.topLeftCorner(d, d).trace(); }

void finish_trend(SigmaEstimate& est, int d, double max_trend) {
  const std::size_t m = est.times.size();
  if (m == 0) throw DomainError("sigma_estimate: no times in range");
  est.sigma = est.per_time.back();
  if (m >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double ref = trace(est.sigma, d);
    for (std::size_t k = 0; k < m; ++k) {
      const double x = std::log(est.times[k]), y = trace(est.per_time[k], d) / ref;
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double den = m * sxx - sx * sx;
    est.trend = den > 0 ? (m * sxy - sx * sy) / den : 0.0;
  }
  est.stable = std::abs(est.trend) <= max_trend;
  if (!est.stable) {
    std::ostringstream os;
    os << "Sigma estimate has not stabilized: relative trend " << est.trend << " per unit log t";
    est.warning = os.str();
  }
}

}  // namespace

SigmaEstimate sigma_estimate(const KernelColumn& col, const DiscreteGenerator& gen, double t_min, double t_max,
                             double max_trend) {
  const Grid& grid = gen.grid;
  const int d = grid.dim();
  const bool periodic = gen.options.boundary == Boundary::periodic;
  SigmaEstimate est;
  for (std::size_t k = 0; k < col.times.size(); ++k) {
    const double t = col.times[k];
    if (t < t_min || t > t_max || !(t > 0.0)) continue;
    Covariance s = Covariance::Zero();
    const Vec& p = col.values[k];
    for (std::size_t y = 0; y < grid.size(); ++y) {
      const auto i = static_cast<Eigen::Index>(y);
      const double w = p[i] * gen.theta[i] * grid.cell_volume();
      const Point dx = grid.displacement(col.source, y, periodic);
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) s(a, b) += w * dx[a] * dx[b];
    }
    est.times.push_back(t);
    est.per_time.push_back(s / t);
  }
  finish_trend(est, d, max_trend);
  return est;
}

SigmaEstimate sigma_from_walkers(const DiscreteGenerator& gen, std::size_t x0, double t1, double t2,
                                 std::uint64_t paths, std::uint64_t seed, int workers) {
  if (!(t1 > 0.0 && t2 > t1)) throw DomainError("sigma_from_walkers: need 0 < t1 < t2");
  const int d = gen.grid.dim();
  const double times[] = {t1, t2};
  const auto snaps = walker_moments(gen, x0, times, paths, seed, workers);
  SigmaEstimate est;
  for (const WalkerSnapshot& s : snaps) {
    Covariance c = Covariance::Zero();
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) c(a, b) = s.covariance[a][b] / s.time;
    est.times.push_back(s.time);
    est.per_time.push_back(c);
  }
  Covariance secant = Covariance::Zero();
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) secant(a, b) = (snaps[1].covariance[a][b] - snaps[0].covariance[a][b]) / (t2 - t1);
  est.sigma = secant;
  est.stable = true;
  est.trend = 0.0;
  return est;
}

std::vector<Point> annulus_points(int count, double r1, double r2, int dim) {
  std::vector<Point> out;
  const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int i = 0; i < count; ++i) {
    Point dir{0, 0, 0};
    if (dim == 3) {
      const double z = 1.0 - 2.0 * (i + 0.5) / count;
      const double phi = 2.0 * std::numbers::pi * golden * i;
      dir = {std::sqrt(1 - z * z) * std::cos(phi), std::sqrt(1 - z * z) * std::sin(phi), z};
    } else {
      const double phi = 2.0 * std::numbers::pi * (i + 0.5) / count;
      dir = {std::cos(phi), std::sin(phi), 0};
    }
    // Radii from a second low-discrepancy sequence, uniform in volume.
    const double u = std::fmod(0.5 + i * std::sqrt(2.0), 1.0);
    const double r = std::pow(std::pow(r1, dim) + u * (std::pow(r2, dim) - std::pow(r1, dim)), 1.0 / dim);
    for (int a = 0; a < dim; ++a) dir[a] *= r;
    out.push_back(dir);
  }
  return out;
}

std::vector<double> scaling_errors(const GreenField& green, const std::vector<Point>& points,
                                   const std::vector<double>& scales, double a, const Covariance& sigma) {
  const Grid& grid = green.grid;
  const int d = grid.dim();
  const Point x0 = grid.position(green.source);
  const Point origin{0, 0, 0};
  std::vector<double> errors;
  for (double n : scales) {
    double worst = 0.0;
    for (const Point& x : points) {
      Point y = x0;
      for (int a2 = 0; a2 < d; ++a2) y[a2] += n * x[a2];
      const double gn = std::pow(n, d - 2) * interpolate(grid, green.values, y);
      worst = std::max(worst, std::abs(gn - a * brownian_green(origin, x, sigma, d)));
    }
    errors.push_back(worst);
  }
  return errors;
}

ScalingReport scaling_limit_experiment(const EnvironmentSpec& spec, const ScalingOptions& options) {
  if (spec.dim != 3) throw DimensionError("scaling_limit_experiment: needs d = 3");
  if (spec.speed != SpeedMode::lambda) throw DomainError("scaling_limit_experiment: needs theta = Lambda");
  if (options.scales.empty() || options.seeds.empty()) throw DomainError("scaling_limit_experiment: nothing to run");
  const double max_scale = *std::max_element(options.scales.begin(), options.scales.end());
  if (max_scale * options.r2 > spec.box_side / 8.0 + 1e-12)
    throw DomainError("geometry error: n r2 exceeds L/8");
  if (!(0.0 < options.r1 && options.r1 < options.r2)) throw DomainError("scaling_limit_experiment: need 0 < r1 < r2");

  ScalingReport rep;
  rep.scales = options.scales;
  const auto points = annulus_points(options.points, options.r1, options.r2, 3);
  std::vector<EnvironmentField> fields;
  for (std::uint64_t seed : options.seeds) {
    EnvironmentSpec s = spec;
    s.seed = seed;
    fields.push_back(generate_environment(s, options.workers));
  }
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const DiscreteGenerator periodic = assemble_generator(fields[i]);
    const std::size_t x0 = fields[i].grid.index({spec.cells_per_side / 2, spec.cells_per_side / 2, spec.cells_per_side / 2});
    const auto est = sigma_from_walkers(periodic, x0, options.walker_t1, options.walker_t2, options.walker_paths,
                                        stream_seed(options.seeds[i], {0x516ULL}), options.workers);
    rep.sigma += est.sigma / static_cast<double>(fields.size());
  }
  // Symmetrize against rounding before use.
  rep.sigma = 0.5 * (rep.sigma + rep.sigma.transpose()).eval();

  rep.pass = true;
  bool control = options.wrong_a > 0.0;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const EnvironmentField& f = fields[i];
    ScalingRun run;
    run.seed = options.seeds[i];
    run.a = 1.0 / f.Lambda.mean();
    run.sigma = rep.sigma;
    const std::size_t x0 = f.grid.index({spec.cells_per_side / 2, spec.cells_per_side / 2, spec.cells_per_side / 2});
    const Point c = f.grid.position(x0);
    const Point zero{0, 0, 0};
    auto solve = [&](double a) {
      const DiscreteGenerator box = assemble_generator(f, {Boundary::dirichlet, EdgeMean::harmonic});
      GreenOptions go = options.green;
      go.boundary = [&, a](const Point& ghost) {
        Point x{ghost[0] - c[0], ghost[1] - c[1], ghost[2] - c[2]};
        return a * brownian_green(zero, x, rep.sigma, 3);
      };
      return green_function(box, x0, go);
    };
    const GreenField g = solve(run.a);
    run.residual = g.residual;
    run.iterations = g.iterations;
    run.errors = scaling_errors(g, points, options.scales, run.a, rep.sigma);
    run.decreasing = true;
    for (std::size_t k = 1; k < run.errors.size(); ++k) run.decreasing = run.decreasing && run.errors[k] < run.errors[k - 1];
    rep.pass = rep.pass && run.decreasing && run.errors.back() < 0.5 * run.errors.front();
    if (options.wrong_a > 0.0) {
      const GreenField gw = solve(options.wrong_a);
      run.wrong_errors = scaling_errors(gw, points, options.scales, options.wrong_a, rep.sigma);
      control = control && run.wrong_errors.back() >= 0.5 * run.wrong_errors.front();
    }
    rep.runs.push_back(std::move(run));
  }
  rep.control_plateaus = control;
  return rep;
}

}  // namespace heatlab
