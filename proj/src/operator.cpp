#include "heatlab/operator.hpp"

#include <cmath>
#include <map>
#include <string>

#include "heatlab/errors.hpp"
#include "heatlab/parallel.hpp"

namespace heatlab {

namespace {

double edge_mean(double a, double b, EdgeMean mean) {
  if (mean == EdgeMean::arithmetic) return 0.5 * (a + b);
  return 2.0 * a * b / (a + b);
}

void check_size(const Vec& u, std::size_t n, const char* what) {
  if (static_cast<std::size_t>(u.size()) != n)
    throw DimensionError(std::string(what) + ": grid function has " + std::to_string(u.size()) +
                         " entries, expected " + std::to_string(n));
}

}  // namespace

Vec DiscreteGenerator::apply(const Vec& u) const {
  check_size(u, size(), "apply");
  return (K * u).cwiseQuotient(theta);
}

double DiscreteGenerator::exit_rate(std::size_t x) const {
  return -K.coeff(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(x)) / theta[static_cast<Eigen::Index>(x)];
}

SparseMatrix DiscreteGenerator::matrix() const {
  SparseMatrix L = theta.cwiseInverse().asDiagonal() * K;
  return L;
}

DiscreteGenerator assemble_generator(const EnvironmentField& field, const AssemblyOptions& options) {
  const Grid& grid = field.grid;
  const int d = grid.dim();
  const double h2 = grid.spacing() * grid.spacing();
  const std::size_t n = grid.size();
  const bool periodic = options.boundary == Boundary::periodic;

  DiscreteGenerator gen;
  gen.grid = grid;
  gen.options = options;
  gen.theta = field.theta;
  gen.field = std::make_shared<const EnvironmentField>(field);

  auto fail = [](std::size_t x, std::size_t y, double c) {
    throw AssemblyError("conductance " + std::to_string(c) + " between cells " + std::to_string(x) +
                        " and " + std::to_string(y) + " is zero or non-finite");
  };

  // Forward edges, one per (cell, axis), computed in parallel.
  std::vector<Edge> forward(n * d);
  std::vector<char> present(n * d, 0);
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t x = begin; x < end; ++x) {
      const CellCoords cx = grid.coords(x);
      for (int e = 0; e < d; ++e) {
        CellCoords cy = cx;
        ++cy[e];
        if (!periodic && !grid.in_box(cy)) continue;
        const std::size_t y = grid.shift(x, e, 1);
        const auto ex = static_cast<Eigen::Index>(x), ey = static_cast<Eigen::Index>(y);
        const double c = edge_mean(field.diag_a[e][ex], field.diag_a[e][ey], options.mean) / h2;
        if (!(c > 0.0) || !std::isfinite(c)) fail(x, y, c);
        forward[x * d + e] = Edge{x, y, e, c};
        present[x * d + e] = 1;
      }
    }
  });
  for (std::size_t i = 0; i < forward.size(); ++i)
    if (present[i]) gen.edges.push_back(forward[i]);

  if (!periodic) {
    for (std::size_t x = 0; x < n; ++x) {
      const CellCoords cx = grid.coords(x);
      for (int e = 0; e < d; ++e)
        for (int step : {-1, 1}) {
          CellCoords cy = cx;
          cy[e] += step;
          if (grid.in_box(cy)) continue;
          const double c = field.diag_a[e][static_cast<Eigen::Index>(x)] / h2;
          if (!(c > 0.0) || !std::isfinite(c)) fail(x, x, c);
          gen.boundary_edges.push_back(BoundaryEdge{x, e, step, c});
        }
    }
  }

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(4 * gen.edges.size() + n);
  Vec diag = Vec::Zero(static_cast<Eigen::Index>(n));
  for (const Edge& ed : gen.edges) {
    const auto x = static_cast<int>(ed.x), y = static_cast<int>(ed.y);
    if (x == y) continue;  // self-loop on a one-cell axis carries no flux
    triplets.emplace_back(x, y, ed.conductance);
    triplets.emplace_back(y, x, ed.conductance);
    diag[x] -= ed.conductance;
    diag[y] -= ed.conductance;
  }
  for (const BoundaryEdge& b : gen.boundary_edges) diag[static_cast<Eigen::Index>(b.cell)] -= b.conductance;
  for (std::size_t x = 0; x < n; ++x)
    triplets.emplace_back(static_cast<int>(x), static_cast<int>(x), diag[static_cast<Eigen::Index>(x)]);
  gen.K.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  gen.K.setFromTriplets(triplets.begin(), triplets.end());
  gen.K.makeCompressed();
  return gen;
}

double dirichlet_energy(const DiscreteGenerator& gen, const Vec& u) {
  check_size(u, gen.size(), "dirichlet_energy");
  double s = 0.0;
  for (const Edge& e : gen.edges) {
    const double du = u[static_cast<Eigen::Index>(e.x)] - u[static_cast<Eigen::Index>(e.y)];
    s += e.conductance * du * du;
  }
  for (const BoundaryEdge& b : gen.boundary_edges) {
    const double v = u[static_cast<Eigen::Index>(b.cell)];
    s += b.conductance * v * v;
  }
  return s * gen.grid.cell_volume();
}

double h_squared(const DiscreteGenerator& gen, const Vec& psi) {
  check_size(psi, gen.size(), "h_squared");
  const Grid& grid = gen.grid;
  const double h = grid.spacing();
  Vec acc = Vec::Zero(psi.size());
  for (const Edge& e : gen.edges) {
    const auto x = static_cast<Eigen::Index>(e.x);
    const double diff = (psi[static_cast<Eigen::Index>(e.y)] - psi[x]) / h;
    acc[x] += gen.field->diag_a[e.axis][x] * diff * diff;
  }
  return acc.cwiseQuotient(gen.theta).maxCoeff();
}

double weighted_inner_product(const Vec& u, const Vec& v, const Vec& theta, double cell_volume) {
  if (u.size() != v.size() || u.size() != theta.size())
    throw DimensionError("weighted_inner_product: shape mismatch");
  return (u.array() * v.array() * theta.array()).sum() * cell_volume;
}

double weighted_inner_product(const Vec& u, const Vec& v, const DiscreteGenerator& gen) {
  return weighted_inner_product(u, v, gen.theta, gen.grid.cell_volume());
}

std::string to_string(Boundary b) { return b == Boundary::periodic ? "periodic" : "dirichlet"; }
std::string to_string(EdgeMean m) { return m == EdgeMean::harmonic ? "harmonic" : "arithmetic"; }
Boundary parse_boundary(const std::string& s) {
  if (s == "periodic") return Boundary::periodic;
  if (s == "dirichlet") return Boundary::dirichlet;
  throw ValidationError("unknown boundary '" + s + "'");
}
EdgeMean parse_edge_mean(const std::string& s) {
  if (s == "harmonic") return EdgeMean::harmonic;
  if (s == "arithmetic") return EdgeMean::arithmetic;
  throw ValidationError("unknown edge mean '" + s + "'");
}

}  // namespace heatlab
