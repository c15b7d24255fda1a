#pragma once

// Symmetric re-weighting, run once after self-learning converges:
// whiten both sides, solve the orthogonal problem in whitened space, scale
// each shared dimension by sqrt of its singular value on BOTH sides, then
// de-whiten.

#include <algorithm>

#include "xlmap/error.hpp"
#include "xlmap/selflearn.hpp"
#include "xlmap/vecmath.hpp"

namespace xlmap {

struct RefineOptions {
  // Exponent applied to the singular values on each side (1/2 = symmetric).
  double reweight_power = 0.5;
  bool dewhiten = true;
};

// Every factor of the chain wx = whiten_x * u * diag(s^power) * dewhiten_x
// (and likewise for z with v).
struct RefineFactors {
  MatrixD whiten_x;    // (X^T D X)^(-1/2)
  MatrixD whiten_z;    // (Z^T D Z)^(-1/2)
  MatrixD u;
  MatrixD v;
  VectorD s;           // singular values of the whitened cross-covariance
  VectorD scale;       // max(s, 0)^power
  MatrixD dewhiten_x;  // u^T (X^T D X)^(1/2) u, identity when disabled
  MatrixD dewhiten_z;  // v^T (Z^T D Z)^(1/2) v, identity when disabled
};

struct RefinedMapping {
  MappingPair mapping;  // generally not orthogonal
  RefineFactors factors;
};

// Gram matrix of the rows selected by one side of the dictionary, counting
// repeated entries with their multiplicity.
inline MatrixD dictionary_gram(const Matrix& m, const Dictionary& d, bool source_side) {
  if (d.empty()) throw EmptyDictionaryError("dictionary_gram: empty dictionary");
  const Index dim = m.cols();
  MatrixD g = MatrixD::Zero(dim, dim);
  constexpr std::size_t kBlock = 4096;
  for (std::size_t begin = 0; begin < d.size(); begin += kBlock) {
    const std::size_t end = std::min(d.size(), begin + kBlock);
    MatrixD rows(static_cast<Index>(end - begin), dim);
    for (std::size_t e = begin; e < end; ++e) {
      const Index r = source_side ? d.entries[e].src : d.entries[e].tgt;
      if (r < 0 || r >= m.rows()) throw DimensionError("dictionary_gram: index out of range");
      rows.row(static_cast<Index>(e - begin)) = m.row(r).cast<double>();
    }
    g.noalias() += rows.transpose() * rows;
  }
  return g;
}

inline MatrixD compose(const MatrixD& whiten, const MatrixD& rotation, const VectorD& scale,
                       const MatrixD& dewhiten) {
  return whiten * rotation * scale.asDiagonal() * dewhiten;
}

inline RefinedMapping symmetric_reweight(const Matrix& x, const Matrix& z, const Dictionary& d,
                                         const RefineOptions& opts = {}) {
  if (x.cols() != z.cols()) throw DimensionError("symmetric_reweight: dimension mismatch");
  const GramRoots gx = gram_roots(dictionary_gram(x, d, true));
  const GramRoots gz = gram_roots(dictionary_gram(z, d, false));

  // Xw^T D Zw with Xw = X Gx^(-1/2), Zw = Z Gz^(-1/2); the roots are symmetric.
  const MatrixD a = gx.inv_sqrt * cross_covariance(x, z, d) * gz.inv_sqrt;
  const SvdResult dec = svd(a);

  RefineFactors f;
  f.whiten_x = gx.inv_sqrt;
  f.whiten_z = gz.inv_sqrt;
  f.u = dec.u;
  f.v = dec.v();
  f.s = dec.s;
  f.scale = dec.s.cwiseMax(0.0).array().pow(opts.reweight_power).matrix();
  if (opts.dewhiten) {
    f.dewhiten_x = f.u.transpose() * gx.sqrt * f.u;
    f.dewhiten_z = f.v.transpose() * gz.sqrt * f.v;
  } else {
    f.dewhiten_x = MatrixD::Identity(x.cols(), x.cols());
    f.dewhiten_z = MatrixD::Identity(z.cols(), z.cols());
  }

  RefinedMapping out;
  out.mapping.wx = compose(f.whiten_x, f.u, f.scale, f.dewhiten_x);
  out.mapping.wz = compose(f.whiten_z, f.v, f.scale, f.dewhiten_z);
  if (!out.mapping.wx.allFinite() || !out.mapping.wz.allFinite()) {
    throw NumericalError("symmetric_reweight: non-finite mapping");
  }
  out.factors = std::move(f);
  return out;
}

}  // namespace xlmap
