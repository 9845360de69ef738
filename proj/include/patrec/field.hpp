#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace patrec {

// Dense row-major 2-D array of doubles. Row i carries y_i, column j carries
// x_j; on the square [-1,1]^2 the node coordinates are x_j = -1 + 2j/m.
// Phantom rasters and simulator fields use this regardless of the training
// precision.
struct Field {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Field() = default;
  Field(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}

  double& at(int i, int j) { return v[static_cast<std::size_t>(i) * cols + j]; }
  double at(int i, int j) const { return v[static_cast<std::size_t>(i) * cols + j]; }

  std::size_t size() const { return v.size(); }
  bool same_shape(const Field& o) const { return rows == o.rows && cols == o.cols; }

  double max_abs() const {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
  }
  bool all_finite() const {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  }
};

inline void require_shape(const Field& f, int rows, int cols, const char* what) {
  if (f.rows != rows || f.cols != cols)
    throw std::invalid_argument(std::string(what) + ": unexpected field shape");
}

} // namespace patrec
