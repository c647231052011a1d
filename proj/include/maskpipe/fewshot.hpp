#pragma once

// Simple-CNAPS style classification head: every class is summarised by its
// mean and a regularized covariance, and queries go to the class with the
// smallest squared Mahalanobis distance.

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "maskpipe/errors.hpp"

namespace maskpipe::fewshot {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Support embeddings of one class, one sample per row.
template <typename Scalar>
struct SupportSet {
  int class_id = 0;
  Matrix<Scalar> samples;
};

enum class CovarianceMode {
  /// Q_k = l_k S_k + (1 - l_k) S_all + eps I with l_k = n_k / (n_k + 1).
  Blended,
  /// Q_k = S_k + eps I.
  RidgeOnly,
};

enum class DistanceMode { Mahalanobis, Euclidean };

template <typename Scalar>
struct ClassStatistics {
  int class_id = 0;
  std::size_t count = 0;
  Vector<Scalar> mean;
  Matrix<Scalar> covariance;
  Eigen::LLT<Matrix<Scalar>> cholesky;
};

/// Population (1/n) covariance of the rows of `x` about `center`.
template <typename Scalar>
Matrix<Scalar> scatter(const Matrix<Scalar>& x, const Vector<Scalar>& center) {
  const Matrix<Scalar> centered = x.rowwise() - center.transpose();
  return (centered.transpose() * centered) / static_cast<Scalar>(x.rows());
}

/// Factorises `q`, rejecting matrices that are not numerically positive definite.
template <typename Scalar>
Eigen::LLT<Matrix<Scalar>> factorize(const Matrix<Scalar>& q, int class_id) {
  Eigen::LLT<Matrix<Scalar>> llt(q);
  bool ok = llt.info() == Eigen::Success;
  if (ok && q.rows() > 0) {
    const auto diag = llt.matrixLLT().diagonal();
    const Scalar lo = diag.minCoeff();
    const Scalar hi = diag.maxCoeff();
    const Scalar tol = static_cast<Scalar>(100 * q.rows()) * std::numeric_limits<Scalar>::epsilon();
    ok = lo > 0 && lo * lo > tol * hi * hi;
  }
  if (!ok) {
    throw SingularCovarianceError("covariance of class " + std::to_string(class_id) +
                                  " is not positive definite; use a larger epsilon");
  }
  return llt;
}

/// Class means and regularized covariances. Throws MissingSupportError for a
/// class without samples, DimensionError when dimensions disagree and
/// SingularCovarianceError when a covariance cannot be factorised.
template <typename Scalar>
std::vector<ClassStatistics<Scalar>> class_statistics(std::span<const SupportSet<Scalar>> supports,
                                                      Scalar epsilon,
                                                      CovarianceMode mode = CovarianceMode::Blended) {
  if (supports.empty()) throw MissingSupportError("no support classes given");
  if (!(epsilon >= 0)) throw ConfigError("epsilon must be >= 0");
  const Eigen::Index dim = supports.front().samples.cols();
  Eigen::Index total = 0;
  for (const auto& s : supports) {
    if (s.samples.rows() == 0) {
      throw MissingSupportError("class " + std::to_string(s.class_id) + " has no support samples");
    }
    if (s.samples.cols() != dim) {
      throw DimensionError("support dimension mismatch in class " + std::to_string(s.class_id));
    }
    total += s.samples.rows();
  }

  Matrix<Scalar> task_cov;
  if (mode == CovarianceMode::Blended) {
    Matrix<Scalar> all(total, dim);
    Eigen::Index row = 0;
    for (const auto& s : supports) {
      all.middleRows(row, s.samples.rows()) = s.samples;
      row += s.samples.rows();
    }
    const Vector<Scalar> global_mean = all.colwise().mean().transpose();
    task_cov = scatter<Scalar>(all, global_mean);
  }

  std::vector<ClassStatistics<Scalar>> out;
  out.reserve(supports.size());
  for (const auto& s : supports) {
    ClassStatistics<Scalar> st;
    st.class_id = s.class_id;
    st.count = static_cast<std::size_t>(s.samples.rows());
    st.mean = s.samples.colwise().mean().transpose();
    const Matrix<Scalar> class_cov = scatter<Scalar>(s.samples, st.mean);
    const Matrix<Scalar> ridge = epsilon * Matrix<Scalar>::Identity(dim, dim);
    if (mode == CovarianceMode::Blended) {
      const Scalar n = static_cast<Scalar>(st.count);
      const Scalar lambda = n / (n + 1);
      st.covariance = lambda * class_cov + (1 - lambda) * task_cov + ridge;
    } else {
      st.covariance = class_cov + ridge;
    }
    // Symmetrise away rounding so the stored matrix is exactly symmetric.
    st.covariance = (0.5 * (st.covariance + st.covariance.transpose())).eval();
    st.cholesky = factorize<Scalar>(st.covariance, st.class_id);
    out.push_back(std::move(st));
  }
  return out;
}

/// (x - mean)^T Q^-1 (x - mean) through the stored Cholesky factor.
template <typename Scalar, typename Derived>
Scalar mahalanobis_sq(const Eigen::MatrixBase<Derived>& x, const ClassStatistics<Scalar>& s) {
  if (x.size() != s.mean.size()) throw DimensionError("query dimension does not match class mean");
  const Vector<Scalar> diff = x - s.mean;
  return s.cholesky.matrixL().solve(diff).squaredNorm();
}

template <typename Scalar>
struct Prediction {
  int class_id = 0;
  /// Softmax over negative squared distances, in statistics order.
  Vector<Scalar> scores;
  Vector<Scalar> distances;
};

/// Classifies each row of `queries`. Euclidean mode treats every covariance as
/// the identity. Ties go to the earlier class.
template <typename Scalar>
std::vector<Prediction<Scalar>> classify(const Matrix<Scalar>& queries,
                                         std::span<const ClassStatistics<Scalar>> stats,
                                         DistanceMode mode = DistanceMode::Mahalanobis) {
  if (stats.size() < 2) throw ConfigError("classification needs at least two classes");
  const Eigen::Index k = static_cast<Eigen::Index>(stats.size());
  std::vector<Prediction<Scalar>> out;
  out.reserve(static_cast<std::size_t>(queries.rows()));
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    Prediction<Scalar> p;
    p.distances.resize(k);
    for (Eigen::Index c = 0; c < k; ++c) {
      const auto& s = stats[static_cast<std::size_t>(c)];
      if (mode == DistanceMode::Euclidean) {
        if (queries.cols() != s.mean.size()) throw DimensionError("query dimension does not match class mean");
        p.distances[c] = (queries.row(q).transpose() - s.mean).squaredNorm();
      } else {
        p.distances[c] = mahalanobis_sq(queries.row(q).transpose(), s);
      }
    }
    Eigen::Index best = 0;
    p.distances.minCoeff(&best);
    p.class_id = stats[static_cast<std::size_t>(best)].class_id;
    const Vector<Scalar> logits = -p.distances;
    const Vector<Scalar> e = (logits.array() - logits.maxCoeff()).exp().matrix();
    p.scores = e / e.sum();
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace maskpipe::fewshot
