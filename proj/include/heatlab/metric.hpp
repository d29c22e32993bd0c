#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "heatlab/env.hpp"

namespace heatlab {

/// Intrinsic distances d_theta(x0, .) from shortest paths on the periodic
/// grid graph; an edge x -> x + delta has length
/// |delta| h (g(x) + g(x + delta)) / 2 with g = sqrt(sum_i e_i^2 theta / a_i).
struct MetricField {
  Grid grid;
  std::size_t source = 0;
  Vec distance;
  int neighborhood = 0;
  int refinement = 0;
};

// Primitive lattice steps: 2D supports 4, 8, 16, 32, 48; 3D supports 6, 18, 26.
std::vector<CellCoords> stencil(int dim, int neighborhood);

MetricField intrinsic_distance_map(const EnvironmentField& field, std::size_t x0, int neighborhood);

// Same graph with unit weights scaled by h: the stencil's approximation of
// the Euclidean distance.
MetricField stencil_distance_map(const Grid& grid, std::size_t x0, int neighborhood);

struct RatioReport {
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  std::size_t pairs = 0;
};

// d_Lambda(x0, y) / |y - x0| over all cells y != x0; needs theta == Lambda.
RatioReport euclidean_comparison(const MetricField& metric, const EnvironmentField& field);

struct MetricAudit {
  std::size_t triples = 0;
  std::size_t triangle_violations = 0;
  double worst_triangle_excess = 0.0;
  std::size_t symmetry_pairs = 0;
  double worst_asymmetry = 0.0;  // relative
  std::size_t sandwich_pairs = 0;
  std::size_t lower_violations = 0;  // sqrt(min theta/Lambda) |x - y| <= d_theta
  std::size_t upper_violations = 0;  // d_theta <= sqrt(max theta/lambda) d_stencil
  double lower_constant = 0.0;
  double upper_constant = 0.0;
};

// Computes maps from `sources` random cells and audits `triples` random
// triangle inequalities and `pairs` random sandwich pairs.
MetricAudit audit_metric(const EnvironmentField& field, int neighborhood, std::size_t sources,
                         std::size_t triples, std::size_t pairs, std::uint64_t seed);

struct LocalityReport {
  std::vector<double> spacings;
  std::vector<double> differences;  // max |d^(k) - d^(k+1)| on the coarsest grid points
  std::vector<double> orders;       // log2 of successive difference ratios
  bool converging = false;
  std::vector<double> radii;
  std::vector<double> ball_sup;     // sup of d_theta over B(x0, eps), finest level
  bool small_balls_shrink = false;
};

// `levels` are maps of the same physical source on grids refined by factors
// of two (coarsest first). Converging means every successive difference
// shrinks with observed order >= min_order.
LocalityReport strict_locality_probe(std::span<const MetricField> levels, std::span<const double> radii,
                                     double min_order = 0.5);

}  // namespace heatlab
