#pragma once

// Principal component analysis on the sample covariance (n - 1 normalization).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "abuse/embeddings.hpp"
#include "abuse/error.hpp"
#include "abuse/features.hpp"

namespace abuse {

struct PcaModel {
  std::vector<double> mean;                // dim
  std::vector<double> components;          // k x dim, row-major; rows are unit axes
  std::vector<double> explained_variance;  // k, non-increasing

  std::size_t dim() const noexcept { return mean.size(); }
  std::size_t k() const noexcept { return explained_variance.size(); }
  double component(std::size_t axis, std::size_t j) const { return components[axis * dim() + j]; }

  friend bool operator==(const PcaModel&, const PcaModel&) = default;
};

/// Top-k principal axes. Each axis is sign-normalized so that its
/// largest-magnitude entry (first one on ties) is positive. Constant data is
/// not an error; it just reports zero variance.
inline PcaModel fit_pca(const EmbeddingMatrix& data, std::size_t k) {
  const std::size_t n = data.rows();
  const std::size_t dim = data.dim();
  if (n < 2) fail(ErrorKind::BadK, "PCA needs at least 2 rows");
  if (k == 0 || k > std::min(n, dim)) {
    fail(ErrorKind::BadK, "k=" + std::to_string(k) + " outside [1, min(rows, dim)=" +
                              std::to_string(std::min(n, dim)) + "]");
  }
  using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const Matrix> x(data.values().data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  const Eigen::MatrixXd covariance = (centered.transpose() * centered) / static_cast<double>(n - 1);

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(covariance);
  if (solver.info() != Eigen::Success) fail(ErrorKind::BadK, "eigen decomposition did not converge");
  // Eigen returns ascending eigenvalues.
  PcaModel model;
  model.mean.assign(mean.data(), mean.data() + dim);
  model.components.resize(k * dim);
  model.explained_variance.resize(k);
  for (std::size_t axis = 0; axis < k; ++axis) {
    const auto source = static_cast<Eigen::Index>(dim - 1 - axis);
    Eigen::VectorXd v = solver.eigenvectors().col(source);
    v.normalize();
    Eigen::Index largest = 0;
    for (Eigen::Index j = 1; j < v.size(); ++j) {
      if (std::abs(v(j)) > std::abs(v(largest))) largest = j;
    }
    if (v(largest) < 0) v = -v;
    for (std::size_t j = 0; j < dim; ++j) model.components[axis * dim + j] = v(static_cast<Eigen::Index>(j));
    model.explained_variance[axis] = std::max(0.0, solver.eigenvalues()(source));
  }
  return model;
}

inline std::vector<double> project(const PcaModel& model, std::span<const double> x) {
  std::vector<double> out(model.k(), 0.0);
  for (std::size_t axis = 0; axis < model.k(); ++axis) {
    double dot = 0.0;
    for (std::size_t j = 0; j < model.dim(); ++j) dot += (x[j] - model.mean[j]) * model.component(axis, j);
    out[axis] = dot;
  }
  return out;
}

inline FeatureMatrix apply_pca(const PcaModel& model, const EmbeddingMatrix& data) {
  if (data.dim() != model.dim()) {
    fail(ErrorKind::DimMismatch, "embedding dim " + std::to_string(data.dim()) + " != PCA dim " +
                                     std::to_string(model.dim()));
  }
  FeatureMatrix out(data.rows(), BlockKind::Pca, model.k());
  for (std::size_t r = 0; r < data.rows(); ++r) {
    const auto z = project(model, data.row(r));
    for (std::size_t axis = 0; axis < z.size(); ++axis) out.set(r, axis, z[axis]);
  }
  return out;
}

/// Maps k-dimensional scores back into the embedding space.
inline std::vector<double> back_project(const PcaModel& model, std::span<const double> scores) {
  std::vector<double> out(model.mean);
  for (std::size_t axis = 0; axis < model.k(); ++axis) {
    for (std::size_t j = 0; j < model.dim(); ++j) out[j] += scores[axis] * model.component(axis, j);
  }
  return out;
}

/// Sum of squared reconstruction residuals divided by (n - 1); equals the sum
/// of discarded covariance eigenvalues on the fit data.
inline double reconstruction_error(const PcaModel& model, const EmbeddingMatrix& data) {
  double total = 0.0;
  for (std::size_t r = 0; r < data.rows(); ++r) {
    const auto x = data.row(r);
    const auto back = back_project(model, project(model, x));
    for (std::size_t j = 0; j < x.size(); ++j) total += (x[j] - back[j]) * (x[j] - back[j]);
  }
  return data.rows() > 1 ? total / static_cast<double>(data.rows() - 1) : 0.0;
}

}  // namespace abuse
