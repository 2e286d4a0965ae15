#pragma once

// Independent reference computations used only by tests. Nothing here calls
// into the library paths being checked.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

namespace oracle {

/// Cyclic Jacobi eigen-decomposition of a small symmetric matrix (row-major,
/// dim x dim). Returns eigenvalues descending and matching unit eigenvectors
/// as rows.
inline std::pair<std::vector<double>, std::vector<std::vector<double>>> jacobi_eigen(std::vector<double> a,
                                                                                      std::size_t dim) {
  std::vector<double> v(dim * dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) v[i * dim + i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < dim; ++p)
      for (std::size_t q = p + 1; q < dim; ++q) off += a[p * dim + q] * a[p * dim + q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < dim; ++p) {
      for (std::size_t q = p + 1; q < dim; ++q) {
        const double apq = a[p * dim + q];
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a[q * dim + q] - a[p * dim + p]) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < dim; ++k) {
          const double akp = a[k * dim + p], akq = a[k * dim + q];
          a[k * dim + p] = c * akp - s * akq;
          a[k * dim + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < dim; ++k) {
          const double apk = a[p * dim + k], aqk = a[q * dim + k];
          a[p * dim + k] = c * apk - s * aqk;
          a[q * dim + k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < dim; ++k) {
          const double vkp = v[k * dim + p], vkq = v[k * dim + q];
          v[k * dim + p] = c * vkp - s * vkq;
          v[k * dim + q] = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(dim);
  for (std::size_t i = 0; i < dim; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a[x * dim + x] > a[y * dim + y]; });
  std::vector<double> values;
  std::vector<std::vector<double>> vectors;
  for (auto i : order) {
    values.push_back(a[i * dim + i]);
    std::vector<double> column(dim);
    for (std::size_t k = 0; k < dim; ++k) column[k] = v[k * dim + i];
    vectors.push_back(column);
  }
  return {values, vectors};
}

/// Sample covariance (n - 1) of row-major data.
inline std::vector<double> covariance(const std::vector<double>& x, std::size_t n, std::size_t dim) {
  std::vector<double> mean(dim, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < dim; ++j) mean[j] += x[r * dim + j] / static_cast<double>(n);
  std::vector<double> cov(dim * dim, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j)
        cov[i * dim + j] += (x[r * dim + i] - mean[i]) * (x[r * dim + j] - mean[j]) / static_cast<double>(n - 1);
  return cov;
}

inline double central_difference(const std::function<double(double)>& f, double x, double step) {
  return (f(x + step) - f(x - step)) / (2.0 * step);
}

inline double second_difference(const std::function<double(double)>& f, double x, double step) {
  return (f(x + step) - 2.0 * f(x) + f(x - step)) / (step * step);
}

/// Plain confusion-count F1 of the positive class (0 when undefined).
inline double positive_f1(const std::vector<int>& truth, const std::vector<int>& predicted) {
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (predicted[i] == 1 && truth[i] == 1) ++tp;
    if (predicted[i] == 1 && truth[i] == 0) ++fp;
    if (predicted[i] == 0 && truth[i] == 1) ++fn;
  }
  return tp == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
}

/// Mean silhouette over 2-D points with binary cluster ids.
inline double silhouette(const std::vector<std::pair<double, double>>& points, const std::vector<int>& cluster) {
  const std::size_t n = points.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double same = 0.0, other = 0.0;
    std::size_t same_count = 0, other_count = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = std::hypot(points[i].first - points[j].first, points[i].second - points[j].second);
      if (cluster[i] == cluster[j]) {
        same += d;
        ++same_count;
      } else {
        other += d;
        ++other_count;
      }
    }
    const double a = same_count ? same / static_cast<double>(same_count) : 0.0;
    const double b = other_count ? other / static_cast<double>(other_count) : 0.0;
    total += std::max(a, b) > 0 ? (b - a) / std::max(a, b) : 0.0;
  }
  return total / static_cast<double>(n);
}

}  // namespace oracle
