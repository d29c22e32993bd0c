#pragma once

// Independent reference computations for the unit tests. Nothing here calls
// the library routine it is compared against.

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "heatlab/env.hpp"

namespace oracle {

using heatlab::EnvironmentField;
using heatlab::Grid;
using heatlab::Vec;
using Mat = Eigen::MatrixXd;

// Dense conductance matrix straight from the cell arrays: each cell visits
// both neighbors along every axis.
inline Mat conductance_matrix(const EnvironmentField& f, bool periodic = true) {
  const Grid& g = f.grid;
  const int n = static_cast<int>(g.size()), N = g.cells_per_side(), d = g.dim();
  const double h2 = g.spacing() * g.spacing();
  Mat K = Mat::Zero(n, n);
  for (int x = 0; x < n; ++x) {
    auto c = g.coords(static_cast<std::size_t>(x));
    for (int e = 0; e < d; ++e)
      for (int s : {-1, 1}) {
        auto cy = c;
        cy[e] += s;
        const double ax = f.diag_a[e][x];
        if (cy[e] < 0 || cy[e] >= N) {
          if (!periodic) {
            K(x, x) -= ax / h2;
            continue;
          }
          cy[e] = (cy[e] + N) % N;
        }
        const int y = static_cast<int>(g.index(cy));
        const double ay = f.diag_a[e][y];
        const double cond = 2.0 / (1.0 / ax + 1.0 / ay) / h2;
        K(x, y) += cond;
        K(x, x) -= cond;
      }
  }
  return K;
}

// exp(A) by scaling and squaring of a truncated Taylor series.
inline Mat expm(const Mat& A) {
  const double norm = A.cwiseAbs().rowwise().sum().maxCoeff();
  int s = norm > 0.5 ? static_cast<int>(std::ceil(std::log2(norm / 0.5))) : 0;
  const Mat B = A / std::ldexp(1.0, s);
  Mat term = Mat::Identity(A.rows(), A.cols()), sum = term;
  for (int k = 1; k < 30; ++k) {
    term = term * B / k;
    sum += term;
  }
  for (int i = 0; i < s; ++i) sum = sum * sum;
  return sum;
}

// Kernel p(t, x, y) = (e^{tL})(x, y) / (theta(y) h^d).
inline Mat kernel(const EnvironmentField& f, double t) {
  const Mat K = conductance_matrix(f);
  const Mat L = f.theta.cwiseInverse().asDiagonal() * K;
  Mat P = expm(t * L);
  const double vol = f.grid.cell_volume();
  for (int y = 0; y < P.cols(); ++y) P.col(y) /= f.theta[y] * vol;
  return P;
}

// Bellman-Ford over the periodic lattice with the given steps; the edge
// x -> x + s has length |s| h (g(x) + g(x + s)) / 2.
inline Vec bellman_ford(const EnvironmentField& f, std::size_t x0, const std::vector<std::array<int, 3>>& steps) {
  const Grid& g = f.grid;
  const int d = g.dim();
  const std::size_t n = g.size();
  Vec dist = Vec::Constant(static_cast<Eigen::Index>(n), std::numeric_limits<double>::infinity());
  dist[static_cast<Eigen::Index>(x0)] = 0.0;
  auto gfun = [&](std::size_t x, const std::array<int, 3>& s, double len) {
    double q = 0.0;
    for (int a = 0; a < d; ++a) q += (s[a] / len) * (s[a] / len) * f.theta[x] / f.diag_a[a][x];
    return std::sqrt(q);
  };
  for (std::size_t iter = 0; iter < n; ++iter) {
    bool changed = false;
    for (std::size_t x = 0; x < n; ++x) {
      if (!std::isfinite(dist[x])) continue;
      for (const auto& s : steps) {
        auto c = g.coords(x);
        double len2 = 0.0;
        for (int a = 0; a < d; ++a) {
          c[a] += s[a];
          len2 += s[a] * s[a];
        }
        const double len = std::sqrt(len2);
        const std::size_t y = g.index(c);
        const double w = len * g.spacing() * 0.5 * (gfun(x, s, len) + gfun(y, s, len));
        if (dist[x] + w < dist[y] - 1e-15) {
          dist[y] = dist[x] + w;
          changed = true;
        }
      }
    }
    if (!changed) break;
  }
  return dist;
}

// Average of f over cells whose centers lie within `r` of `c` (periodic),
// by scanning every cell.
inline double ball_average(const Grid& g, const Vec& f, const heatlab::Point& c, double r) {
  double s = 0.0;
  int count = 0;
  for (std::size_t x = 0; x < g.size(); ++x) {
    const auto p = g.position(x);
    double d2 = 0.0;
    for (int a = 0; a < g.dim(); ++a) {
      double v = p[a] - c[a];
      v -= g.side() * std::round(v / g.side());
      d2 += v * v;
    }
    if (d2 <= r * r * (1 + 1e-12)) {
      s += f[static_cast<Eigen::Index>(x)];
      ++count;
    }
  }
  return s / count;
}

// Green's function of the Dirichlet box by a dense solve of -K g = delta / h^d.
inline Vec dense_green(const EnvironmentField& f, std::size_t x0) {
  const Mat K = conductance_matrix(f, false);
  Vec b = Vec::Zero(K.rows());
  b[static_cast<Eigen::Index>(x0)] = 1.0 / f.grid.cell_volume();
  return (-K).ldlt().solve(b);
}

// Composite Simpson rule on [a, b] with n (even) panels.
template <class F>
double simpson(F&& fn, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = fn(a) + fn(b);
  for (int i = 1; i < n; ++i) s += fn(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

}  // namespace oracle
