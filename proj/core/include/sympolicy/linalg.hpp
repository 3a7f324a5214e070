#pragma once

// Minimal dense row-major matrix used at module boundaries (gains,
// observation models, NDE weights). Heavy linear algebra stays behind the
// optimizer implementations.

#include <cstddef>
#include <vector>

#include "sympolicy/errors.hpp"

namespace sympolicy {

struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

  static Mat identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
  static Mat diag(const std::vector<double>& d) {
    Mat m(static_cast<int>(d.size()), static_cast<int>(d.size()));
    for (std::size_t i = 0; i < d.size(); ++i) m(static_cast<int>(i), static_cast<int>(i)) = d[i];
    return m;
  }

  double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
  const double& operator()(int i, int j) const {
    return a[static_cast<std::size_t>(i) * cols + j];
  }

  // y = M x
  void matvec(const double* x, double* y) const {
    for (int i = 0; i < rows; ++i) {
      double s = 0.0;
      for (int j = 0; j < cols; ++j) s += (*this)(i, j) * x[j];
      y[i] = s;
    }
  }
};

}  // namespace sympolicy
