#pragma once

// Dense linear-algebra kernels: the length-normalize / center / re-normalize
// pipeline, deterministic SVD, PSD matrix roots, and blocked similarity
// products. Embedding matrices are single precision and row-major; every
// reduction, factorization and Gram matrix is computed in double.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "xlmap/error.hpp"

namespace xlmap {

using Index = Eigen::Index;

// Row-major single-precision matrix; one row per word.
using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
// Double-precision matrix for factorizations and d x d transforms.
using MatrixD = Eigen::MatrixXd;
using VectorD = Eigen::VectorXd;

// Default number of rows per similarity block.
inline constexpr Index kDefaultBlockRows = 4096;

// Half-open row interval [begin, end).
struct RowRange {
  Index begin = 0;
  Index end = 0;

  [[nodiscard]] Index size() const { return end - begin; }
};

// Thin SVD m = u * diag(s) * vt with s nonincreasing.
struct SvdResult {
  MatrixD u;   // m x k, orthonormal columns
  VectorD s;   // k, nonnegative
  MatrixD vt;  // k x n, orthonormal rows

  [[nodiscard]] MatrixD v() const { return vt.transpose(); }
};

// Both roots of a PSD Gram matrix from a single eigendecomposition.
struct GramRoots {
  MatrixD sqrt;      // G^(1/2)
  MatrixD inv_sqrt;  // G^(-1/2), eigenvalues floored before inversion
};

namespace detail {

inline double row_norm(const float* row, Index cols) {
  double acc = 0.0;
  for (Index j = 0; j < cols; ++j) acc += static_cast<double>(row[j]) * row[j];
  return std::sqrt(acc);
}

}  // namespace detail

// Divides every row by its Euclidean norm, in place. Rows whose norm is not
// greater than `min_norm` (or not finite) raise NumericalError.
inline void length_normalize(Matrix& m, double min_norm = 0.0) {
  for (Index i = 0; i < m.rows(); ++i) {
    float* row = m.row(i).data();
    const double norm = detail::row_norm(row, m.cols());
    if (!(norm > min_norm) || !std::isfinite(norm)) {
      throw NumericalError("cannot length-normalize row " + std::to_string(i) +
                           " (norm " + std::to_string(norm) + ")");
    }
    for (Index j = 0; j < m.cols(); ++j) {
      row[j] = static_cast<float>(row[j] / norm);
    }
  }
}

// Per-column means, accumulated in double.
inline VectorD column_means(const Matrix& m) {
  VectorD mean = VectorD::Zero(m.cols());
  for (Index i = 0; i < m.rows(); ++i) {
    const float* row = m.row(i).data();
    for (Index j = 0; j < m.cols(); ++j) mean[j] += row[j];
  }
  if (m.rows() > 0) mean /= static_cast<double>(m.rows());
  return mean;
}

// Subtracts the per-column mean from every row, in place.
inline void mean_center(Matrix& m) {
  const VectorD mean = column_means(m);
  for (Index i = 0; i < m.rows(); ++i) {
    float* row = m.row(i).data();
    for (Index j = 0; j < m.cols(); ++j) {
      row[j] = static_cast<float>(row[j] - mean[j]);
    }
  }
}

// Rows this short after centering are treated as the zero vector.
inline constexpr double kDegenerateNorm = 1e-7;

// Length-normalize, mean-center each column, length-normalize again.
// Every output row has unit norm; the input is left untouched.
inline Matrix normalize(const Matrix& emb) {
  if (emb.rows() == 0 || emb.cols() == 0) {
    throw DimensionError("normalize: empty matrix");
  }
  Matrix out = emb;
  length_normalize(out);
  mean_center(out);
  length_normalize(out, kDegenerateNorm);
  return out;
}

// Thin SVD in double precision. For each singular pair the entry of largest
// magnitude in u's column is made nonnegative (first index wins ties), so the
// factorization is reproducible for a fixed input.
template <typename Derived>
SvdResult svd(const Eigen::MatrixBase<Derived>& m) {
  const MatrixD a = m.template cast<double>();
  if (!a.allFinite()) throw NumericalError("svd: non-finite input");
  Eigen::BDCSVD<MatrixD> dec(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (dec.info() != Eigen::Success) {
    throw NumericalError("svd: factorization did not converge");
  }
  SvdResult r{dec.matrixU(), dec.singularValues(), dec.matrixV().transpose()};
  for (Index k = 0; k < r.u.cols(); ++k) {
    Index arg = 0;
    double best = -1.0;
    for (Index i = 0; i < r.u.rows(); ++i) {
      const double v = std::abs(r.u(i, k));
      if (v > best) {
        best = v;
        arg = i;
      }
    }
    if (r.u(arg, k) < 0.0) {
      r.u.col(k) = -r.u.col(k);
      r.vt.row(k) = -r.vt.row(k);
    }
  }
  return r;
}

// Rows [range.begin, range.end) of a * b^T.
inline Matrix similarity_block(const Matrix& a, const Matrix& b, RowRange range) {
  if (a.cols() != b.cols()) {
    throw DimensionError("similarity_block: column mismatch (" +
                         std::to_string(a.cols()) + " vs " +
                         std::to_string(b.cols()) + ")");
  }
  if (range.begin < 0 || range.end > a.rows() || range.size() <= 0) {
    throw DimensionError("similarity_block: empty or out-of-range row range");
  }
  Matrix out(range.size(), b.rows());
  out.noalias() = a.middleRows(range.begin, range.size()) * b.transpose();
  return out;
}

// Tolerance for the symmetry check on PSD inputs.
inline constexpr double kSymmetryTolerance = 1e-4;

namespace detail {

inline Eigen::SelfAdjointEigenSolver<MatrixD> symmetric_eig(const MatrixD& m,
                                                            const char* who) {
  if (m.rows() != m.cols()) {
    throw DimensionError(std::string(who) + ": matrix is not square");
  }
  if (m.size() > 0 && (m - m.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance) {
    throw NumericalError(std::string(who) + ": matrix is not symmetric");
  }
  const MatrixD sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixD> eig(sym);
  if (eig.info() != Eigen::Success) {
    throw NumericalError(std::string(who) + ": eigendecomposition failed");
  }
  return eig;
}

}  // namespace detail

// Principal square root of a symmetric PSD matrix; negative eigenvalues
// (numerical noise) are clamped to zero.
inline MatrixD matrix_sqrt_psd(const MatrixD& m) {
  const auto eig = detail::symmetric_eig(m, "matrix_sqrt_psd");
  const VectorD root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

// Relative eigenvalue floor applied before inverting a Gram matrix.
inline constexpr double kWhitenFloor = 1e-12;

// G^(1/2) and G^(-1/2) of a Gram matrix. Eigenvalues below
// kWhitenFloor * max eigenvalue are raised to that floor.
inline GramRoots gram_roots(const MatrixD& gram) {
  const auto eig = detail::symmetric_eig(gram, "gram_roots");
  const VectorD& lambda = eig.eigenvalues();
  const double top = lambda.size() > 0 ? lambda.maxCoeff() : 0.0;
  if (!(top > 0.0)) {
    throw NumericalError("gram_roots: all eigenvalues below the whitening floor");
  }
  const double floor = kWhitenFloor * top;
  const VectorD clamped = lambda.cwiseMax(floor);
  const MatrixD& q = eig.eigenvectors();
  return {q * clamped.cwiseSqrt().asDiagonal() * q.transpose(),
          q * clamped.cwiseSqrt().cwiseInverse().asDiagonal() * q.transpose()};
}

// (m^T m)^(-1/2), so that m * W has an identity Gram matrix.
inline MatrixD whiten_transform(const Matrix& m) {
  const MatrixD md = m.cast<double>();
  return gram_roots(md.transpose() * md).inv_sqrt;
}

// Sorts each row independently in descending order (stable).
template <typename Derived>
typename Derived::PlainObject sort_rows_desc(const Eigen::MatrixBase<Derived>& m) {
  typename Derived::PlainObject out = m;
  using Scalar = typename Derived::Scalar;
  std::vector<Scalar> buf(static_cast<std::size_t>(out.cols()));
  for (Index i = 0; i < out.rows(); ++i) {
    for (Index j = 0; j < out.cols(); ++j) buf[static_cast<std::size_t>(j)] = out(i, j);
    std::stable_sort(buf.begin(), buf.end(), std::greater<Scalar>());
    for (Index j = 0; j < out.cols(); ++j) out(i, j) = buf[static_cast<std::size_t>(j)];
  }
  return out;
}

// Applies a double-precision transform to single-precision rows.
inline Matrix apply_transform(const Matrix& x, const MatrixD& w) {
  if (x.cols() != w.rows()) {
    throw DimensionError("apply_transform: dimension mismatch");
  }
  Matrix out(x.rows(), w.cols());
  out.noalias() = x * w.cast<float>();
  return out;
}

}  // namespace xlmap
