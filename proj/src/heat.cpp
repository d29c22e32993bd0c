#include "heatlab/heat.hpp"

#include <Eigen/SparseCholesky>
#ifdef HEATLAB_HAVE_CHOLMOD
#include <Eigen/CholmodSupport>
#endif
#include <algorithm>
#include <cmath>
#include <map>
#if defined(__SSE2__)
#include <xmmintrin.h>
#endif
#include <memory>
#include <mutex>

#include "heatlab/errors.hpp"
#include "heatlab/parallel.hpp"
#include "heatlab/random.hpp"

namespace heatlab {

namespace {

constexpr int kMaxHalvings = 48;

// Far-field kernel values decay through the subnormal range during the
// first steps; flushing them to zero avoids a large slowdown.
class FlushDenormals {
 public:
#if defined(__SSE2__)
  FlushDenormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040); }
  ~FlushDenormals() { _mm_setcsr(saved_); }

 private:
  unsigned saved_;
#endif
};

class CrankNicolson {
 public:
  CrankNicolson(const DiscreteGenerator& gen) : K_(gen.K), theta_(gen.theta) {}

  Vec step(const Vec& u, double dt, bool keep) {
    const Vec rhs = theta_.cwiseProduct(u) + 0.5 * dt * (K_ * u);
    auto& solver = factor(dt, keep);
    Vec out = solver.solve(rhs);
    if (solver.info() != Eigen::Success || !out.allFinite()) {
      const double residual = (theta_.cwiseProduct(out) - 0.5 * dt * (K_ * out) - rhs).norm();
      throw SolverError("Crank-Nicolson solve failed at dt=" + std::to_string(dt) +
                        ", residual " + std::to_string(residual));
    }
    return out;
  }

  void drop_scratch() { scratch_.clear(); }

 private:
#ifdef HEATLAB_HAVE_CHOLMOD
  using Solver = Eigen::CholmodSimplicialLDLT<Eigen::SparseMatrix<double>>;
#else
  using Solver = Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>;
#endif

  Solver& factor(double dt, bool keep) {
    auto& cache = keep ? levels_ : scratch_;
    auto it = cache.find(dt);
    if (it != cache.end()) return *it->second;
    Eigen::SparseMatrix<double> A = -0.5 * dt * K_;
    for (Eigen::Index i = 0; i < A.rows(); ++i) A.coeffRef(i, i) += theta_[i];
    auto s = std::make_unique<Solver>(A);
    if (s->info() != Eigen::Success)
      throw SolverError("factorization of the Crank-Nicolson matrix failed at dt=" + std::to_string(dt));
    return *cache.emplace(dt, std::move(s)).first->second;
  }

  Eigen::SparseMatrix<double> K_;
  Vec theta_;
  std::map<double, std::unique_ptr<Solver>> levels_;
  std::map<double, std::unique_ptr<Solver>> scratch_;
};

}  // namespace

const Vec& KernelColumn::at(double t) const {
  for (std::size_t i = 0; i < times.size(); ++i)
    if (times[i] == t) return values[i];
  throw DomainError("kernel column has no stored time " + std::to_string(t));
}

DenseSemigroup::DenseSemigroup(const DiscreteGenerator& gen)
    : sqrt_theta_(gen.theta.cwiseSqrt()), cell_volume_(gen.grid.cell_volume()) {
  const Vec inv = sqrt_theta_.cwiseInverse();
  Eigen::MatrixXd S = Eigen::MatrixXd(gen.K);
  S = inv.asDiagonal() * S * inv.asDiagonal();
  S = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  if (es.info() != Eigen::Success) throw SolverError("dense eigendecomposition failed");
  eigenvalues_ = es.eigenvalues();
  vectors_ = es.eigenvectors();
}

Vec DenseSemigroup::apply(const Vec& f, double t) const {
  Vec c = vectors_.transpose() * sqrt_theta_.cwiseProduct(f);
  c = c.cwiseProduct((t * eigenvalues_).array().exp().matrix());
  return (vectors_ * c).cwiseQuotient(sqrt_theta_);
}

Vec DenseSemigroup::column(std::size_t x0, double t) const {
  Vec delta = Vec::Zero(sqrt_theta_.size());
  const auto i = static_cast<Eigen::Index>(x0);
  delta[i] = 1.0 / (sqrt_theta_[i] * sqrt_theta_[i] * cell_volume_);
  return apply(delta, t);
}

Eigen::MatrixXd DenseSemigroup::kernel(double t) const {
  const Vec inv = sqrt_theta_.cwiseInverse();
  Eigen::MatrixXd W = vectors_ * (0.5 * t * eigenvalues_).array().exp().matrix().asDiagonal();
  Eigen::MatrixXd P = W * W.transpose();
  return inv.asDiagonal() * P * inv.asDiagonal() / cell_volume_;
}

double positivity_step_cap(const DiscreteGenerator& gen) {
  double worst = 0.0;
  for (std::size_t x = 0; x < gen.size(); ++x) worst = std::max(worst, gen.exit_rate(x));
  return worst > 0.0 ? 2.0 / worst : 1.0;
}

std::vector<Vec> evolve(const DiscreteGenerator& gen, const Vec& f, std::span<const double> times,
                        const EvolveOptions& options, EvolveStats* stats) {
  if (static_cast<std::size_t>(f.size()) != gen.size())
    throw DimensionError("evolve: initial condition has wrong length");
  for (std::size_t i = 0; i < times.size(); ++i)
    if (!(times[i] >= 0.0) || (i > 0 && times[i] <= times[i - 1]))
      throw DomainError("evolve: times must be nonnegative and increasing");

  EvolveStats local;
  EvolveStats& st = stats ? *stats : local;
  st = EvolveStats{};
  std::vector<Vec> out;
  out.reserve(times.size());

  if (options.dense_limit > 0 && gen.size() <= options.dense_limit) {
    st.method = "dense";
    DenseSemigroup dense(gen);
    for (double t : times) out.push_back(dense.apply(f, t));
    return out;
  }

  st.method = "crank-nicolson";
  double cap = positivity_step_cap(gen);
  if (options.max_step > 0.0) cap = std::min(cap, options.max_step);
  st.step_cap = cap;
  st.min_step = cap;
  FlushDenormals flush;
  CrankNicolson cn(gen);
  Vec u = f;
  double now = 0.0;
  int level = 0;
  for (double target : times) {
    while (now < target) {
      double taylor_rate = 0.0;
      if (options.estimate == ErrorEstimate::taylor) {
        // The defect scales like dt^3, so the level can be chosen directly.
        const Vec l3u = gen.apply(gen.apply(gen.apply(u)));
        taylor_rate = l3u.cwiseAbs().maxCoeff() / (12.0 * std::max(u.cwiseAbs().maxCoeff(), 1e-300));
        level = 0;
        while (level < kMaxHalvings && std::pow(std::ldexp(cap, -level), 3) * taylor_rate > options.tolerance)
          ++level;
      }
      double dt = std::ldexp(cap, -level);
      bool quantized = true;
      if (now + dt >= target) {
        quantized = now + dt == target;
        dt = target - now;
      }
      double err = 0.0;
      Vec next;
      if (options.estimate == ErrorEstimate::step_doubling) {
        const Vec big = cn.step(u, dt, quantized);
        next = cn.step(cn.step(u, 0.5 * dt, quantized), 0.5 * dt, quantized);
        err = (big - next).cwiseAbs().maxCoeff() / std::max(next.cwiseAbs().maxCoeff(), 1e-300);
      } else {
        err = dt * dt * dt * taylor_rate;
      }
      if (err > options.tolerance) {
        if (level >= kMaxHalvings)
          throw SolverError("step size underflow: local error " + std::to_string(err) +
                            " at dt=" + std::to_string(dt));
        ++st.rejected;
        ++level;
        continue;
      }
      if (options.estimate == ErrorEstimate::taylor) next = cn.step(u, dt, quantized);
      u = std::move(next);
      now = quantized ? now + dt : target;
      ++st.accepted;
      st.min_step = std::min(st.min_step, dt);
      st.max_step = std::max(st.max_step, dt);
      if (options.estimate == ErrorEstimate::step_doubling && err < options.tolerance / 10.0 && level > 0)
        --level;
    }
    cn.drop_scratch();
    out.push_back(u);
  }
  return out;
}

Vec delta_density(const DiscreteGenerator& gen, std::size_t x0) {
  if (x0 >= gen.size()) throw DomainError("source cell outside the grid");
  Vec delta = Vec::Zero(static_cast<Eigen::Index>(gen.size()));
  const auto i = static_cast<Eigen::Index>(x0);
  delta[i] = 1.0 / (gen.theta[i] * gen.grid.cell_volume());
  return delta;
}

KernelColumn heat_kernel_column(const DiscreteGenerator& gen, std::size_t x0,
                                std::span<const double> times, const EvolveOptions& options) {
  for (double t : times)
    if (!(t > 0.0)) throw DomainError("kernel times must be positive");
  KernelColumn col;
  col.source = x0;
  col.times.assign(times.begin(), times.end());
  col.tolerance = options.tolerance;
  col.values = evolve(gen, delta_density(gen, x0), times, options, &col.stats);
  for (std::size_t k = 0; k < col.values.size(); ++k) {
    const double low = col.values[k].minCoeff();
    if (low < -1e-12)
      throw SolverError("positivity violated: min p = " + std::to_string(low) + " at t = " +
                        std::to_string(col.times[k]));
  }
  return col;
}

double kernel_mass(const DiscreteGenerator& gen, const Vec& p) {
  return p.dot(gen.theta) * gen.grid.cell_volume();
}

double chapman_kolmogorov_check(const KernelColumn& col, const DiscreteGenerator& gen, std::size_t i,
                                std::size_t j, const EvolveOptions& options) {
  if (i >= col.times.size() || j >= col.times.size() || col.times[j] < col.times[i])
    throw DomainError("chapman_kolmogorov_check: need stored times t_i <= t_j");
  if (static_cast<std::size_t>(col.values[i].size()) != gen.size())
    throw DimensionError("chapman_kolmogorov_check: column and generator grids differ");
  const double dt = col.times[j] - col.times[i];
  if (dt == 0.0) return (col.values[j] - col.values[i]).cwiseAbs().maxCoeff();
  const double span[] = {dt};
  const Vec propagated = evolve(gen, col.values[i], span, options).front();
  return (propagated - col.values[j]).cwiseAbs().maxCoeff();
}

CauchySlack perturbed_l2_check(const DiscreteGenerator& gen, const Vec& psi, const Vec& f, double t,
                               const EvolveOptions& options) {
  if (psi.size() != f.size() || static_cast<std::size_t>(psi.size()) != gen.size())
    throw DimensionError("perturbed_l2_check: shape mismatch");
  if (!psi.allFinite() || !f.allFinite()) throw DomainError("perturbed_l2_check: non-finite input");
  if (psi.cwiseAbs().maxCoeff() > 300.0)
    throw DomainError("perturbed_l2_check: e^psi would overflow; center and rescale psi");
  const Vec weight = psi.array().exp().matrix();
  const double span[] = {t};
  const Vec u = evolve(gen, f, span, options).front();

  CauchySlack r;
  r.lhs = weighted_inner_product(weight.cwiseProduct(u), weight.cwiseProduct(u), gen);
  r.initial = weighted_inner_product(weight.cwiseProduct(f), weight.cwiseProduct(f), gen);
  r.h2 = h_squared(gen, psi);
  r.rhs = std::exp(r.h2 * t) * r.initial;
  r.slack = r.rhs - r.lhs;

  Vec rate = Vec::Zero(psi.size());
  for (const Edge& e : gen.edges) {
    const auto x = static_cast<Eigen::Index>(e.x), y = static_cast<Eigen::Index>(e.y);
    const double w = e.conductance * (std::cosh(psi[y] - psi[x]) - 1.0);
    rate[x] += w;
    rate[y] += w;
  }
  r.sharp_rate = rate.cwiseQuotient(gen.theta).maxCoeff();
  r.sharp_rhs = std::exp(2.0 * r.sharp_rate * t) * r.initial;
  r.sharp_slack = r.sharp_rhs - r.lhs;
  return r;
}

namespace {

struct Jump {
  std::size_t target;  // SIZE_MAX: killed at the Dirichlet boundary
  int axis;
  int step;
  double cumulative;  // cumulative rate within the row
};

}  // namespace

namespace {

// Integer displacement moments at one snapshot time; merges are exact.
struct Moments {
  std::array<std::int64_t, 3> sum{0, 0, 0};
  std::array<std::array<std::int64_t, 3>, 3> cross{};
  std::uint64_t alive = 0;

  void add(const std::array<std::int64_t, 3>& disp, int d) {
    ++alive;
    for (int a = 0; a < d; ++a) {
      sum[a] += disp[a];
      for (int b = 0; b < d; ++b) cross[a][b] += disp[a] * disp[b];
    }
  }
  void merge(const Moments& o) {
    alive += o.alive;
    for (int a = 0; a < 3; ++a) {
      sum[a] += o.sum[a];
      for (int b = 0; b < 3; ++b) cross[a][b] += o.cross[a][b];
    }
  }
};

struct WalkerRun {
  std::vector<std::uint64_t> counts;  // occupancy at the last time
  std::vector<Moments> moments;       // one per time
  std::uint64_t killed = 0;
  std::uint64_t jumps = 0;
};

WalkerRun run_walkers(const DiscreteGenerator& gen, std::size_t x0, std::span<const double> times,
                      std::uint64_t n_paths, std::uint64_t seed, int workers, bool want_counts) {
  if (n_paths < 1) throw DomainError("simulate_walkers: need at least one path");
  if (x0 >= gen.size()) throw DomainError("source cell outside the grid");
  if (times.empty()) throw DomainError("simulate_walkers: no times");
  for (std::size_t k = 0; k < times.size(); ++k)
    if (!(times[k] >= 0.0) || (k > 0 && times[k] <= times[k - 1]))
      throw DomainError("simulate_walkers: times must be increasing and nonnegative");
  const std::size_t n = gen.size();
  const int d = gen.grid.dim();

  std::vector<std::vector<Jump>> rows(n);
  for (const Edge& e : gen.edges) {
    rows[e.x].push_back({e.y, e.axis, +1, e.conductance});
    rows[e.y].push_back({e.x, e.axis, -1, e.conductance});
  }
  for (const BoundaryEdge& b : gen.boundary_edges)
    rows[b.cell].push_back({SIZE_MAX, b.axis, b.step, b.conductance});
  std::vector<double> total(n);
  for (std::size_t x = 0; x < n; ++x) {
    double acc = 0.0;
    const double th = gen.theta[static_cast<Eigen::Index>(x)];
    for (Jump& j : rows[x]) {
      acc += j.cumulative / th;
      j.cumulative = acc;
    }
    total[x] = acc;
  }

  std::mutex merge_mutex;
  WalkerRun all;
  if (want_counts) all.counts.assign(n, 0);
  all.moments.resize(times.size());

  parallel_for(
      n_paths,
      [&](std::size_t begin, std::size_t end) {
        WalkerRun part;
        if (want_counts) part.counts.assign(n, 0);
        part.moments.resize(times.size());
        for (std::size_t path = begin; path < end; ++path) {
          Rng rng = make_rng(seed, {0x3A1CE5ULL, path});
          std::size_t x = x0;
          std::array<std::int64_t, 3> disp{0, 0, 0};
          double clock = 0.0;
          std::size_t next = 0;  // first snapshot not yet recorded
          bool alive = true;
          while (alive && next < times.size()) {
            const double rate = total[x];
            const double wait = rate > 0.0 ? -std::log(uniform_open(rng)) / rate
                                           : std::numeric_limits<double>::infinity();
            while (next < times.size() && clock + wait > times[next]) part.moments[next++].add(disp, d);
            if (next == times.size()) break;
            clock += wait;
            const double pick = uniform_open(rng) * rate;
            const auto& row = rows[x];
            auto it = std::lower_bound(row.begin(), row.end(), pick,
                                       [](const Jump& j, double v) { return j.cumulative < v; });
            if (it == row.end()) it = row.end() - 1;
            ++part.jumps;
            disp[it->axis] += it->step;
            if (it->target == SIZE_MAX) {
              alive = false;
              break;
            }
            x = it->target;
          }
          if (!alive) {
            ++part.killed;
            continue;
          }
          if (want_counts) ++part.counts[x];
        }
        std::lock_guard<std::mutex> lock(merge_mutex);
        if (want_counts)
          for (std::size_t c = 0; c < n; ++c) all.counts[c] += part.counts[c];
        for (std::size_t k = 0; k < times.size(); ++k) all.moments[k].merge(part.moments[k]);
        all.killed += part.killed;
        all.jumps += part.jumps;
      },
      workers);
  return all;
}

void finish(const Moments& m, double h, int d, Point& mean, std::array<std::array<double, 3>, 3>& cov) {
  if (m.alive == 0) return;
  const double n = static_cast<double>(m.alive);
  for (int a = 0; a < d; ++a) mean[a] = static_cast<double>(m.sum[a]) / n;
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) cov[a][b] = (static_cast<double>(m.cross[a][b]) / n - mean[a] * mean[b]) * h * h;
  for (int a = 0; a < d; ++a) mean[a] *= h;
}

}  // namespace

WalkerResult simulate_walkers(const DiscreteGenerator& gen, std::size_t x0, double t,
                              std::uint64_t n_paths, std::uint64_t seed, int workers) {
  const double times[] = {t};
  WalkerRun run = run_walkers(gen, x0, times, n_paths, seed, workers, true);
  WalkerResult r;
  r.source = x0;
  r.time = t;
  r.paths = n_paths;
  r.killed = run.killed;
  r.seed = seed;
  r.counts = std::move(run.counts);
  r.jumps_per_path = static_cast<double>(run.jumps) / static_cast<double>(n_paths);
  finish(run.moments[0], gen.grid.spacing(), gen.grid.dim(), r.mean, r.covariance);
  for (int a = 0; a < 3; ++a) r.variance[a] = r.covariance[a][a];
  return r;
}

std::vector<WalkerSnapshot> walker_moments(const DiscreteGenerator& gen, std::size_t x0, std::span<const double> times,
                                           std::uint64_t n_paths, std::uint64_t seed, int workers) {
  WalkerRun run = run_walkers(gen, x0, times, n_paths, seed, workers, false);
  std::vector<WalkerSnapshot> out(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    out[k].time = times[k];
    out[k].alive = run.moments[k].alive;
    finish(run.moments[k], gen.grid.spacing(), gen.grid.dim(), out[k].mean, out[k].covariance);
  }
  return out;
}

WalkerComparison compare_walkers(const WalkerResult& walkers, const DiscreteGenerator& gen,
                                 const Vec& density) {
  if (walkers.counts.size() != gen.size() || static_cast<std::size_t>(density.size()) != gen.size())
    throw DimensionError("compare_walkers: grid mismatch");
  const double n = static_cast<double>(walkers.paths);
  const double vol = gen.grid.cell_volume();
  WalkerComparison c;
  for (std::size_t y = 0; y < gen.size(); ++y) {
    const auto i = static_cast<Eigen::Index>(y);
    const double q = std::clamp(density[i] * gen.theta[i] * vol, 0.0, 1.0);
    c.tv += std::abs(static_cast<double>(walkers.counts[y]) / n - q);
    c.bound += std::sqrt(q * (1.0 - q) / n);
  }
  c.tv *= 0.5;
  c.bound *= 0.5;
  return c;
}

}  // namespace heatlab
