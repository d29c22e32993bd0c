#pragma once

#include <Eigen/Sparse>
#include <cstddef>
#include <memory>
#include <vector>

#include "heatlab/env.hpp"

namespace heatlab {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

enum class Boundary { periodic, dirichlet };
enum class EdgeMean { harmonic, arithmetic };

struct AssemblyOptions {
  Boundary boundary = Boundary::periodic;
  EdgeMean mean = EdgeMean::harmonic;
};

// Edge between cell `x` and its forward neighbor `y` along `axis`.
struct Edge {
  std::size_t x;
  std::size_t y;
  int axis;
  double conductance;
};

// Edge from an interior cell to the zero-Dirichlet exterior (box mode only).
struct BoundaryEdge {
  std::size_t cell;
  int axis;
  int step;  // -1 or +1
  double conductance;
};

/// Finite-volume discretization of (1/theta) div(a grad).
///
/// K is the symmetric conductance matrix (off-diagonals c(x,y) >= 0, rows
/// summing to zero on the torus); the generator is L = diag(theta)^{-1} K.
struct DiscreteGenerator {
  Grid grid;
  AssemblyOptions options;
  SparseMatrix K;
  Vec theta;
  std::vector<Edge> edges;
  std::vector<BoundaryEdge> boundary_edges;
  std::shared_ptr<const EnvironmentField> field;

  std::size_t size() const { return grid.size(); }
  Vec apply(const Vec& u) const;  // L u
  // Total jump rate out of x, i.e. -L(x, x).
  double exit_rate(std::size_t x) const;
  // Generator as an explicit sparse matrix.
  SparseMatrix matrix() const;
};

DiscreteGenerator assemble_generator(const EnvironmentField& field, const AssemblyOptions& options = {});

// sum over edges c (u(x)-u(y))^2 h^d, plus boundary edges c u(x)^2 h^d.
double dirichlet_energy(const DiscreteGenerator& gen, const Vec& u);

// max_x sum_e a_e(x) (forward difference of psi along e)^2 / theta(x); box
// mode skips differences that would leave the domain.
double h_squared(const DiscreteGenerator& gen, const Vec& psi);

// (u, v)_theta = sum u v theta h^d.
double weighted_inner_product(const Vec& u, const Vec& v, const Vec& theta, double cell_volume);
double weighted_inner_product(const Vec& u, const Vec& v, const DiscreteGenerator& gen);

std::string to_string(Boundary b);
std::string to_string(EdgeMean m);
Boundary parse_boundary(const std::string& s);
EdgeMean parse_edge_mean(const std::string& s);

}  // namespace heatlab
