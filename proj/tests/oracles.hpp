#pragma once

// Slow reference implementations used as test oracles. They share no code
// with the library beyond the container types: plain loops in double.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <utility>
#include <vector>

#include "xlmap/selflearn.hpp"
#include "xlmap/vecmath.hpp"

namespace xlmap::oracle {

inline MatrixD gaussian(Index rows, Index cols, std::mt19937_64& gen, double sigma = 1.0) {
  std::normal_distribution<double> normal(0.0, sigma);
  MatrixD m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = normal(gen);
  return m;
}

inline Matrix to_float(const MatrixD& m) { return m.cast<float>(); }

// Row normalize, center, row normalize; returns the centered intermediate too.
inline std::pair<MatrixD, MatrixD> normalize(const MatrixD& in) {
  MatrixD m = in;
  auto unit_rows = [](MatrixD& a) {
    for (Index i = 0; i < a.rows(); ++i) {
      double s = 0.0;
      for (Index j = 0; j < a.cols(); ++j) s += a(i, j) * a(i, j);
      s = std::sqrt(s);
      for (Index j = 0; j < a.cols(); ++j) a(i, j) /= s;
    }
  };
  unit_rows(m);
  for (Index j = 0; j < m.cols(); ++j) {
    double mean = 0.0;
    for (Index i = 0; i < m.rows(); ++i) mean += m(i, j);
    mean /= static_cast<double>(m.rows());
    for (Index i = 0; i < m.rows(); ++i) m(i, j) -= mean;
  }
  MatrixD centered = m;
  unit_rows(m);
  return {centered, m};
}

// a * b^T by triple loop.
inline MatrixD product_abt(const MatrixD& a, const MatrixD& b) {
  MatrixD out(a.rows(), b.rows());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (Index k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
      out(i, j) = s;
    }
  return out;
}

inline MatrixD product(const MatrixD& a, const MatrixD& b) {
  return product_abt(a, b.transpose());
}

// Random orthogonal matrix by modified Gram-Schmidt on Gaussian columns.
inline MatrixD orthogonal(Index d, std::mt19937_64& gen) {
  MatrixD q = gaussian(d, d, gen);
  for (Index j = 0; j < d; ++j) {
    for (Index p = 0; p < j; ++p) {
      double dot = 0.0;
      for (Index i = 0; i < d; ++i) dot += q(i, j) * q(i, p);
      for (Index i = 0; i < d; ++i) q(i, j) -= dot * q(i, p);
    }
    double n = 0.0;
    for (Index i = 0; i < d; ++i) n += q(i, j) * q(i, j);
    n = std::sqrt(n);
    for (Index i = 0; i < d; ++i) q(i, j) /= n;
  }
  return q;
}

inline double max_abs(const MatrixD& m) {
  double best = 0.0;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) best = std::max(best, std::abs(m(i, j)));
  return best;
}

inline double orthogonality_error(const MatrixD& w) {
  return max_abs(product(w.transpose(), w) - MatrixD::Identity(w.cols(), w.cols()));
}

inline double frobenius(const MatrixD& m) {
  double s = 0.0;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) s += m(i, j) * m(i, j);
  return std::sqrt(s);
}

// Sum over dictionary entries of (x_i wx) . (z_j wz).
inline double objective(const MatrixD& x, const MatrixD& z, const Dictionary& d,
                        const MatrixD& wx, const MatrixD& wz) {
  const MatrixD xm = product(x, wx);
  const MatrixD zm = product(z, wz);
  double s = 0.0;
  for (const auto& e : d.entries)
    for (Index k = 0; k < xm.cols(); ++k) s += xm(e.src, k) * zm(e.tgt, k);
  return s;
}

// Mean of the k largest values of each row, by full sort.
inline std::vector<double> knn_means(const MatrixD& sim, int k) {
  std::vector<double> out;
  for (Index i = 0; i < sim.rows(); ++i) {
    std::vector<double> row;
    for (Index j = 0; j < sim.cols(); ++j) row.push_back(sim(i, j));
    std::sort(row.begin(), row.end(), std::greater<double>());
    double s = 0.0;
    for (int t = 0; t < k; ++t) s += row[static_cast<std::size_t>(t)];
    out.push_back(s / k);
  }
  return out;
}

// Full dense corrected score matrix, argmax per row (lowest index on ties),
// forward entries followed by backward entries.
inline Dictionary induce(const MatrixD& xm, const MatrixD& zm, bool csls, int k,
                         bool bidirectional) {
  const MatrixD sim = product_abt(xm, zm);
  MatrixD score = sim;
  if (csls) {
    const std::vector<double> r_t = knn_means(sim, k);
    const std::vector<double> r_s = knn_means(sim.transpose(), k);
    for (Index i = 0; i < sim.rows(); ++i)
      for (Index j = 0; j < sim.cols(); ++j)
        score(i, j) = 2.0 * sim(i, j) - r_t[static_cast<std::size_t>(i)] -
                      r_s[static_cast<std::size_t>(j)];
  }
  Dictionary d;
  for (Index i = 0; i < score.rows(); ++i) {
    Index arg = 0;
    for (Index j = 1; j < score.cols(); ++j)
      if (score(i, j) > score(i, arg)) arg = j;
    d.entries.push_back({i, arg});
  }
  if (bidirectional) {
    for (Index j = 0; j < score.cols(); ++j) {
      Index arg = 0;
      for (Index i = 1; i < score.rows(); ++i)
        if (score(i, j) > score(arg, j)) arg = i;
      d.entries.push_back({arg, j});
    }
  }
  return d;
}

// Smallest gap between the best and second-best score in any row or column;
// instances with near ties are ambiguous for a float implementation.
inline double min_margin(const MatrixD& xm, const MatrixD& zm, bool csls, int k) {
  const MatrixD sim = product_abt(xm, zm);
  MatrixD score = sim;
  if (csls) {
    const std::vector<double> r_t = knn_means(sim, k);
    const std::vector<double> r_s = knn_means(sim.transpose(), k);
    for (Index i = 0; i < sim.rows(); ++i)
      for (Index j = 0; j < sim.cols(); ++j)
        score(i, j) = 2.0 * sim(i, j) - r_t[static_cast<std::size_t>(i)] -
                      r_s[static_cast<std::size_t>(j)];
  }
  auto gap = [](std::vector<double> v) {
    std::sort(v.begin(), v.end(), std::greater<double>());
    return v.size() > 1 ? v[0] - v[1] : 1.0;
  };
  double best = 1e300;
  for (Index i = 0; i < score.rows(); ++i) {
    std::vector<double> v;
    for (Index j = 0; j < score.cols(); ++j) v.push_back(score(i, j));
    best = std::min(best, gap(v));
  }
  for (Index j = 0; j < score.cols(); ++j) {
    std::vector<double> v;
    for (Index i = 0; i < score.rows(); ++i) v.push_back(score(i, j));
    best = std::min(best, gap(v));
  }
  return best;
}

}  // namespace xlmap::oracle
