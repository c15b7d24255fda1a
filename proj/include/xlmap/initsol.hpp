#pragma once

// Unsupervised initial dictionary. Each word is described by the sorted row
// of sqrt(E E^T) over the most frequent words; sorting discards which word
// each similarity belongs to, so under (near) isometry a word and its
// translation get (nearly) the same description in both languages.

#include <algorithm>

#include "xlmap/error.hpp"
#include "xlmap/selflearn.hpp"
#include "xlmap/vecmath.hpp"

namespace xlmap {

struct InitConfig {
  Index vocab_cutoff_init = 4000;
  bool use_csls = true;
  bool bidirectional = true;
  int csls_k = 10;

  void validate() const {
    if (vocab_cutoff_init < 2) throw DimensionError("vocab_cutoff_init must be >= 2");
    if (csls_k < 1) throw DimensionError("csls_k must be positive");
  }
};

// Normalized, row-sorted sqrt(M) for M = E E^T over the first `cutoff` rows
// of a normalized embedding matrix. Rows are sorted descending and keep the
// first `width` entries (all when width <= 0) before normalization.
//
// sqrt(M) is formed as U S U^T from the thin SVD E = U S V^T, which equals the
// eigendecomposition route because M = U S^2 U^T.
inline Matrix similarity_profile(const Matrix& emb, Index cutoff, Index width = 0) {
  if (cutoff < 2) throw DimensionError("similarity_profile: cutoff must be >= 2");
  if (cutoff > emb.rows()) {
    throw DimensionError("similarity_profile: cutoff exceeds vocabulary size");
  }
  if (width <= 0 || width > cutoff) width = cutoff;
  const SvdResult dec = svd(emb.topRows(cutoff));
  const MatrixD us = dec.u * dec.s.asDiagonal();
  const MatrixD root = us * dec.u.transpose();
  const MatrixD sorted = sort_rows_desc(root);
  Matrix profile = sorted.leftCols(width).cast<float>();
  return normalize(profile);
}

// One deterministic induction pass over the two profile matrices, without
// stochastic dropout. Entries index the first min(cutoff, vocab) words of
// each side; profiles are truncated to a common width when sizes differ.
inline Dictionary build_initial_dictionary(const Matrix& x, const Matrix& z,
                                           const InitConfig& cfg) {
  cfg.validate();
  const Index cx = std::min(cfg.vocab_cutoff_init, x.rows());
  const Index cz = std::min(cfg.vocab_cutoff_init, z.rows());
  const Index width = std::min(cx, cz);

  SelfLearnConfig pass;
  pass.stochastic = false;
  pass.retrieval = cfg.use_csls ? Retrieval::kCsls : Retrieval::kNearestNeighbor;
  pass.bidirectional = cfg.bidirectional;
  pass.csls_k = cfg.csls_k;
  pass.vocab_cutoff = std::max(cx, cz);

  const Matrix xp = similarity_profile(x, cx, width);
  const Matrix zp = similarity_profile(z, cz, width);
  return induce_dictionary(xp, zp, pass, 1.0, {});
}

inline Dictionary build_initial_dictionary(const Embedding& x, const Embedding& z,
                                           const InitConfig& cfg) {
  return build_initial_dictionary(x.vectors(), z.vectors(), cfg);
}

}  // namespace xlmap
