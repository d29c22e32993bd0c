#include "heatlab/grid.hpp"

#include <cmath>

#include "heatlab/errors.hpp"

namespace heatlab {

Grid::Grid(int dim, int cells_per_side, double spacing)
    : dim_(dim), n_(cells_per_side), h_(spacing) {
  if (dim < 1 || dim > 3) throw ValidationError("grid dimension must be 1, 2 or 3");
  if (cells_per_side < 2) throw ValidationError("grid needs at least 2 cells per side");
  if (!(spacing > 0.0) || !std::isfinite(spacing)) throw ValidationError("grid spacing must be positive");
  size_ = 1;
  for (int a = 0; a < dim; ++a) size_ *= static_cast<std::size_t>(n_);
}

double Grid::cell_volume() const { return std::pow(h_, dim_); }

CellCoords Grid::coords(std::size_t index) const {
  CellCoords c{0, 0, 0};
  for (int a = dim_ - 1; a >= 0; --a) {
    c[a] = static_cast<int>(index % n_);
    index /= n_;
  }
  return c;
}

std::size_t Grid::index(const CellCoords& c) const {
  std::size_t idx = 0;
  for (int a = 0; a < dim_; ++a) {
    int v = c[a] % n_;
    if (v < 0) v += n_;
    idx = idx * n_ + static_cast<std::size_t>(v);
  }
  return idx;
}

std::size_t Grid::shift(std::size_t idx, int axis, int step) const {
  CellCoords c = coords(idx);
  c[axis] += step;
  return index(c);
}

bool Grid::in_box(const CellCoords& c) const {
  for (int a = 0; a < dim_; ++a)
    if (c[a] < 0 || c[a] >= n_) return false;
  return true;
}

Point Grid::position(std::size_t idx) const {
  CellCoords c = coords(idx);
  Point p{0.0, 0.0, 0.0};
  for (int a = 0; a < dim_; ++a) p[a] = c[a] * h_;
  return p;
}

Point Grid::displacement(const Point& x, const Point& y, bool periodic) const {
  Point d{0.0, 0.0, 0.0};
  const double len = side();
  for (int a = 0; a < dim_; ++a) {
    double v = y[a] - x[a];
    if (periodic) v -= len * std::round(v / len);
    d[a] = v;
  }
  return d;
}

Point Grid::displacement(std::size_t x, std::size_t y, bool periodic) const {
  return displacement(position(x), position(y), periodic);
}

double Grid::distance(const Point& x, const Point& y, bool periodic) const {
  return norm(displacement(x, y, periodic), dim_);
}

double Grid::distance(std::size_t x, std::size_t y, bool periodic) const {
  return norm(displacement(x, y, periodic), dim_);
}

std::vector<std::size_t> Grid::ball(const Point& center, double radius) const {
  std::vector<std::size_t> cells;
  CellCoords lo{0, 0, 0}, hi{0, 0, 0};
  for (int a = 0; a < dim_; ++a) {
    lo[a] = static_cast<int>(std::floor((center[a] - radius) / h_));
    hi[a] = static_cast<int>(std::ceil((center[a] + radius) / h_));
    // Never visit a residue class twice.
    if (hi[a] - lo[a] + 1 > n_) hi[a] = lo[a] + n_ - 1;
  }
  const double r2 = radius * radius * (1.0 + 1e-12);
  CellCoords c{0, 0, 0};
  for (c[0] = lo[0]; c[0] <= hi[0]; ++c[0]) {
    for (c[1] = (dim_ > 1 ? lo[1] : 0); c[1] <= (dim_ > 1 ? hi[1] : 0); ++c[1]) {
      for (c[2] = (dim_ > 2 ? lo[2] : 0); c[2] <= (dim_ > 2 ? hi[2] : 0); ++c[2]) {
        Point p{c[0] * h_, c[1] * h_, c[2] * h_};
        Point d = displacement(center, p, true);
        double s = 0.0;
        for (int a = 0; a < dim_; ++a) s += d[a] * d[a];
        if (s <= r2) cells.push_back(index(c));
      }
    }
  }
  return cells;
}

double norm(const Point& p, int dim) {
  double s = 0.0;
  for (int a = 0; a < dim; ++a) s += p[a] * p[a];
  return std::sqrt(s);
}

}  // namespace heatlab
