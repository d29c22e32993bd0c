#include "heatlab/metric.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <cmath>
#include <numeric>
#include <queue>
#include <string>

#include "heatlab/errors.hpp"
#include "heatlab/random.hpp"

namespace heatlab {

namespace {

int reach_for(int dim, int neighborhood) {
  if (dim == 2) {
    switch (neighborhood) {
      case 4: return 0;
      case 8: return 1;
      case 16: return 2;
      case 32: return 3;
      case 48: return 4;
    }
  } else if (dim == 3) {
    if (neighborhood == 6 || neighborhood == 18 || neighborhood == 26) return 1;
  }
  throw ValidationError("unsupported neighborhood " + std::to_string(neighborhood) + " in dimension " +
                        std::to_string(dim));
}

struct Step {
  CellCoords delta;
  double length;  // |delta| in cells
  Point unit;
};

std::vector<Step> steps_for(int dim, int neighborhood) {
  std::vector<Step> out;
  for (const CellCoords& c : stencil(dim, neighborhood)) {
    double len = 0.0;
    for (int a = 0; a < dim; ++a) len += double(c[a]) * c[a];
    len = std::sqrt(len);
    Point u{0, 0, 0};
    for (int a = 0; a < dim; ++a) u[a] = c[a] / len;
    out.push_back({c, len, u});
  }
  return out;
}

Vec dijkstra(const Grid& grid, std::size_t x0, const std::vector<Step>& steps,
             const std::function<double(std::size_t, std::size_t, const Step&)>& weight) {
  const std::size_t n = grid.size();
  if (x0 >= n) throw DomainError("source cell outside the grid");
  Vec dist = Vec::Constant(static_cast<Eigen::Index>(n), std::numeric_limits<double>::infinity());
  std::vector<char> done(n, 0);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist[static_cast<Eigen::Index>(x0)] = 0.0;
  queue.push({0.0, x0});
  while (!queue.empty()) {
    auto [dx, x] = queue.top();
    queue.pop();
    if (done[x]) continue;
    done[x] = 1;
    const CellCoords cx = grid.coords(x);
    for (const Step& s : steps) {
      CellCoords cy = cx;
      for (int a = 0; a < grid.dim(); ++a) cy[a] += s.delta[a];
      const std::size_t y = grid.index(cy);
      if (done[y]) continue;
      const double nd = dx + weight(x, y, s);
      if (nd < dist[static_cast<Eigen::Index>(y)]) {
        dist[static_cast<Eigen::Index>(y)] = nd;
        queue.push({nd, y});
      }
    }
  }
  return dist;
}

}  // namespace

std::vector<CellCoords> stencil(int dim, int neighborhood) {
  const int reach = reach_for(dim, neighborhood);
  std::vector<CellCoords> out;
  if (dim == 2) {
    if (reach == 0) return {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}};
    for (int i = -reach; i <= reach; ++i)
      for (int j = -reach; j <= reach; ++j)
        if ((i || j) && std::gcd(i, j) == 1) out.push_back({i, j, 0});
    return out;
  }
  for (int i = -1; i <= 1; ++i)
    for (int j = -1; j <= 1; ++j)
      for (int k = -1; k <= 1; ++k) {
        const int nonzero = (i != 0) + (j != 0) + (k != 0);
        if (nonzero == 0) continue;
        if ((neighborhood == 6 && nonzero > 1) || (neighborhood == 18 && nonzero > 2)) continue;
        out.push_back({i, j, k});
      }
  return out;
}

MetricField intrinsic_distance_map(const EnvironmentField& field, std::size_t x0, int neighborhood) {
  const Grid& grid = field.grid;
  const int d = grid.dim();
  const auto steps = steps_for(d, neighborhood);
  // Per-cell, per-direction speed factors g.
  std::vector<double> g(grid.size() * steps.size());
  for (std::size_t x = 0; x < grid.size(); ++x) {
    const auto i = static_cast<Eigen::Index>(x);
    for (std::size_t k = 0; k < steps.size(); ++k) {
      double s = 0.0;
      for (int a = 0; a < d; ++a) s += steps[k].unit[a] * steps[k].unit[a] * field.theta[i] / field.diag_a[a][i];
      g[x * steps.size() + k] = std::sqrt(s);
    }
  }
  const double h = grid.spacing();
  const std::size_t m = steps.size();
  MetricField out;
  out.grid = grid;
  out.source = x0;
  out.neighborhood = neighborhood;
  out.distance = dijkstra(grid, x0, steps, [&](std::size_t x, std::size_t y, const Step& s) {
    const std::size_t k = static_cast<std::size_t>(&s - steps.data());
    const double w = s.length * h * 0.5 * (g[x * m + k] + g[y * m + k]);
    if (!std::isfinite(w) || !(w > 0.0))
      throw DomainError("non-finite edge weight between cells " + std::to_string(x) + " and " +
                        std::to_string(y));
    return w;
  });
  return out;
}

MetricField stencil_distance_map(const Grid& grid, std::size_t x0, int neighborhood) {
  const auto steps = steps_for(grid.dim(), neighborhood);
  const double h = grid.spacing();
  MetricField out;
  out.grid = grid;
  out.source = x0;
  out.neighborhood = neighborhood;
  out.distance = dijkstra(grid, x0, steps, [h](std::size_t, std::size_t, const Step& s) { return s.length * h; });
  return out;
}

RatioReport euclidean_comparison(const MetricField& metric, const EnvironmentField& field) {
  if (field.theta != field.Lambda)
    throw DomainError("euclidean_comparison needs the speed measure theta = Lambda");
  RatioReport r;
  r.min_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t y = 0; y < metric.grid.size(); ++y) {
    if (y == metric.source) continue;
    const double ratio = metric.distance[static_cast<Eigen::Index>(y)] / metric.grid.distance(metric.source, y);
    r.min_ratio = std::min(r.min_ratio, ratio);
    r.max_ratio = std::max(r.max_ratio, ratio);
    ++r.pairs;
  }
  return r;
}

MetricAudit audit_metric(const EnvironmentField& field, int neighborhood, std::size_t sources,
                         std::size_t triples, std::size_t pairs, std::uint64_t seed) {
  const Grid& grid = field.grid;
  if (sources < 2) throw DomainError("audit_metric needs at least two sources");
  Rng rng = make_rng(seed, {0xA0D17ULL});
  auto pick = [&]() { return static_cast<std::size_t>(uniform_open(rng) * grid.size()) % grid.size(); };
  std::vector<MetricField> maps;
  std::vector<MetricField> stencil_maps;
  for (std::size_t s = 0; s < sources; ++s) {
    const std::size_t x = pick();
    maps.push_back(intrinsic_distance_map(field, x, neighborhood));
    stencil_maps.push_back(stencil_distance_map(grid, x, neighborhood));
  }

  MetricAudit a;
  a.lower_constant = std::sqrt(field.theta.cwiseQuotient(field.Lambda).minCoeff());
  a.upper_constant = std::sqrt(field.theta.cwiseQuotient(field.lambda).maxCoeff());

  for (std::size_t i = 0; i < maps.size(); ++i)
    for (std::size_t j = i + 1; j < maps.size(); ++j) {
      const double dij = maps[i].distance[static_cast<Eigen::Index>(maps[j].source)];
      const double dji = maps[j].distance[static_cast<Eigen::Index>(maps[i].source)];
      const double scale = std::max({dij, dji, 1e-300});
      a.worst_asymmetry = std::max(a.worst_asymmetry, std::abs(dij - dji) / scale);
      ++a.symmetry_pairs;
    }

  for (std::size_t k = 0; k < triples; ++k) {
    const std::size_t i = static_cast<std::size_t>(uniform_open(rng) * sources) % sources;
    std::size_t j = static_cast<std::size_t>(uniform_open(rng) * (sources - 1)) % (sources - 1);
    if (j >= i) ++j;
    const auto y = static_cast<Eigen::Index>(pick());
    const double lhs = maps[i].distance[y];
    const double rhs = maps[i].distance[static_cast<Eigen::Index>(maps[j].source)] + maps[j].distance[y];
    const double excess = lhs - rhs;
    a.worst_triangle_excess = std::max(a.worst_triangle_excess, excess);
    if (excess > 1e-12 * std::max(lhs, 1.0)) ++a.triangle_violations;
    ++a.triples;
  }

  for (std::size_t k = 0; k < pairs; ++k) {
    const std::size_t i = static_cast<std::size_t>(uniform_open(rng) * sources) % sources;
    const std::size_t y = pick();
    if (y == maps[i].source) continue;
    const auto iy = static_cast<Eigen::Index>(y);
    const double dist = maps[i].distance[iy];
    const double eucl = grid.distance(maps[i].source, y);
    const double graph = stencil_maps[i].distance[iy];
    if (a.lower_constant * eucl > dist * (1.0 + 1e-12)) ++a.lower_violations;
    if (dist > a.upper_constant * graph * (1.0 + 1e-12)) ++a.upper_violations;
    ++a.sandwich_pairs;
  }
  return a;
}

LocalityReport strict_locality_probe(std::span<const MetricField> levels, std::span<const double> radii,
                                     double min_order) {
  if (levels.size() < 3) throw DomainError("strict_locality_probe needs at least three refinement levels");
  LocalityReport r;
  const Grid& coarse = levels.front().grid;
  for (std::size_t k = 0; k < levels.size(); ++k) {
    const Grid& g = levels[k].grid;
    if (g.dim() != coarse.dim() || std::abs(g.side() - coarse.side()) > 1e-9 * coarse.side() ||
        g.cells_per_side() != coarse.cells_per_side() << k)
      throw DimensionError("refinement levels must halve the spacing on the same box");
    r.spacings.push_back(g.spacing());
  }
  auto value_at = [&](const MetricField& m, const CellCoords& coarse_cell, int factor) {
    CellCoords c = coarse_cell;
    for (int a = 0; a < coarse.dim(); ++a) c[a] *= factor;
    return m.distance[static_cast<Eigen::Index>(m.grid.index(c))];
  };
  for (std::size_t k = 0; k + 1 < levels.size(); ++k) {
    double worst = 0.0;
    for (std::size_t c = 0; c < coarse.size(); ++c) {
      const CellCoords cc = coarse.coords(c);
      worst = std::max(worst, std::abs(value_at(levels[k], cc, 1 << k) - value_at(levels[k + 1], cc, 1 << (k + 1))));
    }
    r.differences.push_back(worst);
  }
  r.converging = true;
  const double floor = 1e-12 * levels.back().distance.maxCoeff();
  for (std::size_t k = 0; k + 1 < r.differences.size(); ++k) {
    const double a = r.differences[k], b = r.differences[k + 1];
    r.orders.push_back(b > 0 ? std::log2(a / b) : std::numeric_limits<double>::infinity());
    // Differences at rounding level mean the maps already agree.
    if (b > floor && !(r.orders.back() >= min_order)) r.converging = false;
  }
  const MetricField& fine = levels.back();
  for (double eps : radii) {
    double sup = 0.0;
    for (std::size_t c : fine.grid.ball(fine.grid.position(fine.source), eps))
      sup = std::max(sup, fine.distance[static_cast<Eigen::Index>(c)]);
    r.radii.push_back(eps);
    r.ball_sup.push_back(sup);
  }
  r.small_balls_shrink = true;
  for (std::size_t k = 1; k < r.ball_sup.size(); ++k)
    if (r.radii[k] > r.radii[k - 1] && r.ball_sup[k] < r.ball_sup[k - 1]) r.small_balls_shrink = false;
  if (!r.ball_sup.empty()) {
    const auto smallest = std::min_element(r.radii.begin(), r.radii.end()) - r.radii.begin();
    const auto largest = std::max_element(r.radii.begin(), r.radii.end()) - r.radii.begin();
    if (r.radii[largest] > r.radii[smallest] && !(r.ball_sup[smallest] < r.ball_sup[largest]))
      r.small_balls_shrink = false;
  }
  return r;
}

}  // namespace heatlab
