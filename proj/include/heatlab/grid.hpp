#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace heatlab {

using Point = std::array<double, 3>;
using CellCoords = std::array<int, 3>;

/// Uniform cubic grid of `n^dim` cells with spacing `h`. Cell `i` sits at
/// position `coords(i) * h`; flat indices are row-major (axis 0 slowest).
class Grid {
 public:
  Grid() = default;
  Grid(int dim, int cells_per_side, double spacing);

  int dim() const { return dim_; }
  int cells_per_side() const { return n_; }
  double spacing() const { return h_; }
  double side() const { return n_ * h_; }
  std::size_t size() const { return size_; }
  double cell_volume() const;

  CellCoords coords(std::size_t index) const;
  std::size_t index(const CellCoords& c) const;
  // Index of the cell `step` cells along `axis`, wrapping periodically.
  std::size_t shift(std::size_t index, int axis, int step) const;
  // False if the unwrapped neighbor would leave [0, n)^dim.
  bool in_box(const CellCoords& c) const;

  Point position(std::size_t index) const;
  // Minimal-image displacement y - x on the torus (periodic) or the plain
  // difference (box).
  Point displacement(const Point& x, const Point& y, bool periodic = true) const;
  Point displacement(std::size_t x, std::size_t y, bool periodic = true) const;
  double distance(const Point& x, const Point& y, bool periodic = true) const;
  double distance(std::size_t x, std::size_t y, bool periodic = true) const;

  // Cells whose centers lie in the closed ball B(center, radius), periodic.
  std::vector<std::size_t> ball(const Point& center, double radius) const;

  bool operator==(const Grid& other) const = default;

 private:
  int dim_ = 0;
  int n_ = 0;
  double h_ = 0.0;
  std::size_t size_ = 0;
};

double norm(const Point& p, int dim);

}  // namespace heatlab
