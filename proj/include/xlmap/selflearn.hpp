#pragma once

// Robust self-learning: alternate an orthogonal Procrustes fit with a
// dictionary-induction step (CSLS retrieval, stochastic dropout of candidate
// pairs, bidirectional concatenation) until an annealed stall detector fires.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "xlmap/embedio.hpp"
#include "xlmap/error.hpp"
#include "xlmap/parallel.hpp"
#include "xlmap/vecmath.hpp"

namespace xlmap {

// (source row, target row); every entry has weight one.
struct DictEntry {
  Index src = 0;
  Index tgt = 0;

  friend bool operator==(const DictEntry&, const DictEntry&) = default;
};

// Sparse 0/1 dictionary with multiplicity: a pair listed twice (e.g. found in
// both induction directions) counts twice in the cross-covariance.
struct Dictionary {
  std::vector<DictEntry> entries;

  [[nodiscard]] std::size_t size() const { return entries.size(); }
  [[nodiscard]] bool empty() const { return entries.empty(); }

  friend bool operator==(const Dictionary&, const Dictionary&) = default;
};

enum class Retrieval { kCsls, kNearestNeighbor };

inline const char* to_string(Retrieval r) {
  return r == Retrieval::kCsls ? "csls" : "nn";
}

struct SelfLearnConfig {
  double keep_prob_initial = 0.1;
  double keep_prob_growth = 2.0;
  double stall_tolerance = 1e-6;
  int stall_patience = 50;
  Index vocab_cutoff = 20000;
  int csls_k = 10;
  bool bidirectional = true;
  bool stochastic = true;
  Retrieval retrieval = Retrieval::kCsls;
  int max_iterations = 10000;
  std::uint64_t seed = 0;
  // Rows per similarity block; also the granularity of random substreams.
  Index block_rows = kDefaultBlockRows;
  // Worker threads for block-parallel steps; 0 reads XLMAP_THREADS.
  std::size_t threads = 0;

  void validate() const {
    if (!(keep_prob_initial > 0.0 && keep_prob_initial <= 1.0)) {
      throw DimensionError("keep_prob_initial must be in (0, 1]");
    }
    if (!(keep_prob_growth > 1.0)) throw DimensionError("keep_prob_growth must exceed 1");
    if (!(stall_tolerance >= 0.0)) throw DimensionError("stall_tolerance must be >= 0");
    if (stall_patience < 1) throw DimensionError("stall_patience must be positive");
    if (vocab_cutoff < 1) throw DimensionError("vocab_cutoff must be positive");
    if (csls_k < 1) throw DimensionError("csls_k must be positive");
    if (max_iterations < 1) throw DimensionError("max_iterations must be positive");
    if (block_rows < 1) throw DimensionError("block_rows must be positive");
  }
};

// x * wx and z * wz place both languages in a shared space.
struct MappingPair {
  MatrixD wx;
  MatrixD wz;
};

struct ProcrustesResult {
  MappingPair mapping;
  double objective = 0.0;       // sum of singular values of X^T D Z
  double mean_objective = 0.0;  // objective / number of entries
};

namespace detail {

inline void check_dictionary(const Dictionary& d, Index x_rows, Index z_rows) {
  if (d.empty()) throw EmptyDictionaryError("dictionary is empty");
  for (const auto& e : d.entries) {
    if (e.src < 0 || e.src >= x_rows || e.tgt < 0 || e.tgt >= z_rows) {
      throw DimensionError("dictionary entry (" + std::to_string(e.src) + ", " +
                           std::to_string(e.tgt) + ") out of range");
    }
  }
}

inline constexpr std::size_t kCrossCovBlock = 4096;

}  // namespace detail

// X^T D Z accumulated in double, one entry per dictionary row.
inline MatrixD cross_covariance(const Matrix& x, const Matrix& z, const Dictionary& d) {
  if (x.cols() != z.cols()) throw DimensionError("cross_covariance: dimension mismatch");
  detail::check_dictionary(d, x.rows(), z.rows());
  const Index dim = x.cols();
  MatrixD a = MatrixD::Zero(dim, dim);
  for (std::size_t begin = 0; begin < d.size(); begin += detail::kCrossCovBlock) {
    const std::size_t end = std::min(d.size(), begin + detail::kCrossCovBlock);
    const auto n = static_cast<Index>(end - begin);
    MatrixD xb(n, dim);
    MatrixD zb(n, dim);
    for (std::size_t e = begin; e < end; ++e) {
      const auto r = static_cast<Index>(e - begin);
      xb.row(r) = x.row(d.entries[e].src).cast<double>();
      zb.row(r) = z.row(d.entries[e].tgt).cast<double>();
    }
    a.noalias() += xb.transpose() * zb;
  }
  return a;
}

// Orthogonal wx, wz maximizing sum_{(i,j) in D} (x_i wx) . (z_j wz):
// with U S V^T = X^T D Z, wx = U and wz = V.
inline ProcrustesResult procrustes(const Matrix& x, const Matrix& z, const Dictionary& d) {
  const SvdResult dec = svd(cross_covariance(x, z, d));
  ProcrustesResult r;
  r.mapping = {dec.u, dec.v()};
  r.objective = dec.s.sum();
  r.mean_objective = r.objective / static_cast<double>(d.size());
  return r;
}

namespace detail {

inline std::size_t block_count(Index rows, Index block_rows) {
  return static_cast<std::size_t>((rows + block_rows - 1) / block_rows);
}

inline RowRange block_range(std::size_t b, Index rows, Index block_rows) {
  const Index begin = static_cast<Index>(b) * block_rows;
  return {begin, std::min(rows, begin + block_rows)};
}

// Min-heap of the k largest values seen so far; heap[0] is the smallest.
inline void top_k_push(float* heap, int k, float v) {
  if (!(v > heap[0])) return;
  std::pop_heap(heap, heap + k, std::greater<float>());
  heap[k - 1] = v;
  std::push_heap(heap, heap + k, std::greater<float>());
}

inline double heap_mean(const float* heap, int k) {
  double acc = 0.0;
  for (int t = 0; t < k; ++t) acc += heap[t];
  return acc / k;
}

inline void check_knn_k(int k, Index candidates, const char* who) {
  if (k < 1 || k > candidates) {
    throw DimensionError(std::string(who) + ": k=" + std::to_string(k) +
                         " out of range for " + std::to_string(candidates) + " candidates");
  }
}

}  // namespace detail

// For every src row, the mean of its k largest dot products with tgt rows.
inline std::vector<double> csls_knn_means(const Matrix& src, const Matrix& tgt, int k,
                                          Index block_rows = kDefaultBlockRows,
                                          std::size_t threads = 1) {
  detail::check_knn_k(k, tgt.rows(), "csls_knn_means");
  std::vector<double> out(static_cast<std::size_t>(src.rows()));
  if (src.rows() == 0) return out;
  const std::size_t blocks = detail::block_count(src.rows(), block_rows);
  parallel_for(blocks, threads, [&](std::size_t b) {
    const RowRange range = detail::block_range(b, src.rows(), block_rows);
    const Matrix sim = similarity_block(src, tgt, range);
    std::vector<float> heap(static_cast<std::size_t>(k));
    for (Index i = 0; i < sim.rows(); ++i) {
      std::fill(heap.begin(), heap.end(), -std::numeric_limits<float>::infinity());
      const float* row = sim.row(i).data();
      for (Index j = 0; j < sim.cols(); ++j) detail::top_k_push(heap.data(), k, row[j]);
      out[static_cast<std::size_t>(range.begin + i)] = detail::heap_mean(heap.data(), k);
    }
  });
  return out;
}

struct KnnMeansPair {
  std::vector<double> a;  // rows of a against b
  std::vector<double> b;  // rows of b against a
};

namespace detail {

// Folds one similarity block into per-row means (written to row_out at
// row_offset) and per-column top-k heaps (k floats per column).
inline void accumulate_knn(const Matrix& sim, Index row_offset, int k,
                           std::vector<double>& row_out, std::vector<float>& col_heaps) {
  const auto uk = static_cast<std::size_t>(k);
  const auto m = static_cast<std::size_t>(sim.cols());
  std::vector<float> heap(uk);
  for (Index i = 0; i < sim.rows(); ++i) {
    std::fill(heap.begin(), heap.end(), -std::numeric_limits<float>::infinity());
    const float* row = sim.row(i).data();
    for (std::size_t j = 0; j < m; ++j) {
      top_k_push(heap.data(), k, row[j]);
      top_k_push(col_heaps.data() + j * uk, k, row[j]);
    }
    row_out[static_cast<std::size_t>(row_offset + i)] = heap_mean(heap.data(), k);
  }
}

inline std::vector<double> column_heap_means(const std::vector<float>& col_heaps, int k) {
  const auto uk = static_cast<std::size_t>(k);
  std::vector<double> out(col_heaps.size() / uk);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = heap_mean(col_heaps.data() + j * uk, k);
  return out;
}

}  // namespace detail

// csls_knn_means in both directions from one pass over a * b^T: row heaps
// give the a side, per-column heaps (merged across blocks) the b side.
inline KnnMeansPair csls_knn_means_both(const Matrix& a, const Matrix& b, int k,
                                        Index block_rows = kDefaultBlockRows,
                                        std::size_t threads = 1) {
  detail::check_knn_k(k, b.rows(), "csls_knn_means_both");
  detail::check_knn_k(k, a.rows(), "csls_knn_means_both");
  const auto uk = static_cast<std::size_t>(k);
  const auto m = static_cast<std::size_t>(b.rows());
  KnnMeansPair out;
  out.a.resize(static_cast<std::size_t>(a.rows()));
  const std::size_t blocks = detail::block_count(a.rows(), block_rows);
  std::vector<std::vector<float>> col_heaps(
      blocks, std::vector<float>(m * uk, -std::numeric_limits<float>::infinity()));
  parallel_for(blocks, threads, [&](std::size_t blk) {
    const RowRange range = detail::block_range(blk, a.rows(), block_rows);
    detail::accumulate_knn(similarity_block(a, b, range), range.begin, k, out.a, col_heaps[blk]);
  });
  std::vector<float>& merged = col_heaps.front();
  for (std::size_t blk = 1; blk < blocks; ++blk) {
    const std::vector<float>& part = col_heaps[blk];
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t t = 0; t < uk; ++t) {
        detail::top_k_push(merged.data() + j * uk, k, part[j * uk + t]);
      }
    }
  }
  out.b = detail::column_heap_means(merged, k);
  return out;
}

// Identifies the random stream of one induction call. Each similarity block
// derives its own generator from (seed, iteration, attempt, direction, block),
// so the outcome does not depend on how blocks are scheduled across threads.
struct StreamKey {
  std::uint64_t seed = 0;
  std::uint64_t iteration = 0;
  std::uint64_t attempt = 0;
};

namespace detail {

// SplitMix64: a counter-based stream, cheap enough to draw once per pair of
// candidate entries.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;
  explicit SplitMix64(std::uint64_t state = 0) : state_(state) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() {
    std::uint64_t v = (state_ += 0x9e3779b97f4a7c15ULL);
    v = (v ^ (v >> 30)) * 0xbf58476d1ce4e5b9ULL;
    v = (v ^ (v >> 27)) * 0x94d049bb133111ebULL;
    return v ^ (v >> 31);
  }

 private:
  std::uint64_t state_;
};

inline SplitMix64 block_generator(const StreamKey& key, std::uint32_t direction,
                                  std::size_t block) {
  auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v); };
  auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(key.seed),      hi(key.seed),      lo(key.iteration),
                    hi(key.iteration), lo(key.attempt),   hi(key.attempt),
                    direction,         lo(block),         hi(block)};
  std::mt19937_64 keyed(seq);
  return SplitMix64(keyed());
}

// Keep decisions come from 32-bit halves of each 64-bit draw: a candidate
// survives when its half is below keep_prob * 2^32.
inline std::uint64_t keep_threshold(double keep_prob) {
  return static_cast<std::uint64_t>(std::ldexp(keep_prob, 32));
}

}  // namespace detail

// Per-query argmax over targets. With CSLS the score is
// 2 cos(x, y) - r_query(x) - r_target(y). When keep_prob < 1 each candidate
// survives independently with that probability; dropped candidates are
// excluded from the argmax. Rows with no surviving candidate get -1.
// Ties go to the lowest target index.
struct RetrievalRequest {
  const std::vector<double>* r_query = nullptr;
  const std::vector<double>* r_target = nullptr;
  double keep_prob = 1.0;
  StreamKey stream;
  std::uint32_t direction = 0;
  Index block_rows = kDefaultBlockRows;
  std::size_t threads = 1;
};

namespace detail {

// Argmax for each row of one similarity block; results go to best at
// row_offset. `block` selects the random substream.
inline void argmax_rows(const Matrix& sim, Index row_offset, const RetrievalRequest& req,
                        std::size_t block, std::vector<Index>& best) {
  const bool csls = req.r_query != nullptr && req.r_target != nullptr;
  const bool stochastic = req.keep_prob < 1.0;
  SplitMix64 gen;
  if (stochastic) gen = block_generator(req.stream, req.direction, block);
  const std::uint64_t threshold = keep_threshold(req.keep_prob);
  std::uint64_t bits = 0;
  bool have_half = false;
  for (Index i = 0; i < sim.rows(); ++i) {
    const float* row = sim.row(i).data();
    const double r_q = csls ? (*req.r_query)[static_cast<std::size_t>(row_offset + i)] : 0.0;
    double best_score = -std::numeric_limits<double>::infinity();
    Index arg = -1;
    for (Index j = 0; j < sim.cols(); ++j) {
      if (stochastic) {
        if (!have_half) bits = gen();
        const std::uint64_t half = have_half ? (bits >> 32) : (bits & 0xffffffffULL);
        have_half = !have_half;
        if (half >= threshold) continue;
      }
      double score = row[j];
      if (csls) score = 2.0 * score - r_q - (*req.r_target)[static_cast<std::size_t>(j)];
      if (arg < 0 || score > best_score) {
        best_score = score;
        arg = j;
      }
    }
    best[static_cast<std::size_t>(row_offset + i)] = arg;
  }
}

inline void check_retrieval(const RetrievalRequest& req, Index queries, Index targets) {
  const bool csls = req.r_query != nullptr && req.r_target != nullptr;
  if (csls && (static_cast<Index>(req.r_query->size()) != queries ||
               static_cast<Index>(req.r_target->size()) != targets)) {
    throw DimensionError("retrieve_top1: CSLS statistics have the wrong length");
  }
}

}  // namespace detail

inline std::vector<Index> retrieve_top1(const Matrix& queries, const Matrix& targets,
                                        const RetrievalRequest& req) {
  detail::check_retrieval(req, queries.rows(), targets.rows());
  std::vector<Index> best(static_cast<std::size_t>(queries.rows()), -1);
  if (queries.rows() == 0 || targets.rows() == 0) return best;
  const std::size_t blocks = detail::block_count(queries.rows(), req.block_rows);
  parallel_for(blocks, req.threads, [&](std::size_t b) {
    const RowRange range = detail::block_range(b, queries.rows(), req.block_rows);
    detail::argmax_rows(similarity_block(queries, targets, range), range.begin, req, b, best);
  });
  return best;
}

// One dictionary-induction step over mapped, cutoff-restricted embeddings.
// Throws EmptyDictionaryError if every candidate was dropped.
inline Dictionary induce_dictionary(const Matrix& x_mapped, const Matrix& z_mapped,
                                    const SelfLearnConfig& cfg, double keep_prob,
                                    const StreamKey& stream) {
  if (x_mapped.cols() != z_mapped.cols()) {
    throw DimensionError("induce_dictionary: dimension mismatch");
  }
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) {
    throw DimensionError("induce_dictionary: keep probability must be in (0, 1]");
  }
  const std::size_t threads = cfg.threads == 0 ? default_thread_count() : cfg.threads;
  const bool csls = cfg.retrieval == Retrieval::kCsls;
  const double p = cfg.stochastic ? keep_prob : 1.0;
  std::vector<double> r_x;  // x rows vs z: r_T
  std::vector<double> r_z;  // z rows vs x: r_S
  RetrievalRequest fwd{nullptr, nullptr, p, stream, 0, cfg.block_rows, threads};
  RetrievalRequest bwd{nullptr, nullptr, p, stream, 1, cfg.block_rows, threads};
  if (csls) {
    fwd.r_query = bwd.r_target = &r_x;
    fwd.r_target = bwd.r_query = &r_z;
  }
  std::vector<Index> x_to_z;
  std::vector<Index> z_to_x;

  if (x_mapped.rows() <= cfg.block_rows && z_mapped.rows() <= cfg.block_rows) {
    // Both sides fit in one block: one similarity matrix serves every pass.
    // Block indices (and so random substreams) match the blocked path.
    const Matrix sim = similarity_block(x_mapped, z_mapped, {0, x_mapped.rows()});
    if (csls) {
      detail::check_knn_k(cfg.csls_k, z_mapped.rows(), "induce_dictionary");
      detail::check_knn_k(cfg.csls_k, x_mapped.rows(), "induce_dictionary");
      r_x.resize(static_cast<std::size_t>(x_mapped.rows()));
      std::vector<float> cols(static_cast<std::size_t>(z_mapped.rows() * cfg.csls_k),
                              -std::numeric_limits<float>::infinity());
      detail::accumulate_knn(sim, 0, cfg.csls_k, r_x, cols);
      r_z = detail::column_heap_means(cols, cfg.csls_k);
    }
    x_to_z.assign(static_cast<std::size_t>(x_mapped.rows()), -1);
    detail::argmax_rows(sim, 0, fwd, 0, x_to_z);
    if (cfg.bidirectional) {
      const Matrix sim_t = sim.transpose();
      z_to_x.assign(static_cast<std::size_t>(z_mapped.rows()), -1);
      detail::argmax_rows(sim_t, 0, bwd, 0, z_to_x);
    }
  } else {
    if (csls) {
      KnnMeansPair knn =
          csls_knn_means_both(x_mapped, z_mapped, cfg.csls_k, cfg.block_rows, threads);
      r_x = std::move(knn.a);
      r_z = std::move(knn.b);
    }
    x_to_z = retrieve_top1(x_mapped, z_mapped, fwd);
    if (cfg.bidirectional) z_to_x = retrieve_top1(z_mapped, x_mapped, bwd);
  }

  Dictionary d;
  for (std::size_t i = 0; i < x_to_z.size(); ++i) {
    if (x_to_z[i] >= 0) d.entries.push_back({static_cast<Index>(i), x_to_z[i]});
  }
  for (std::size_t j = 0; j < z_to_x.size(); ++j) {
    if (z_to_x[j] >= 0) d.entries.push_back({z_to_x[j], static_cast<Index>(j)});
  }
  if (d.empty()) throw EmptyDictionaryError("induce_dictionary: every candidate was dropped");
  return d;
}

struct LoopState {
  int iteration = 0;
  double keep_prob = 1.0;
  double best_objective = -std::numeric_limits<double>::infinity();
  int stall_count = 0;
  // Mean per-entry Procrustes objective, one value per iteration.
  std::vector<double> objective_trace;
  // Objective of the final deterministic re-fit.
  double final_objective = 0.0;
  bool converged = false;
  bool hit_max_iterations = false;
  // Induction calls repeated because every candidate was dropped.
  int empty_retries = 0;
};

struct SelfLearnResult {
  MappingPair mapping;
  Dictionary dictionary;
  LoopState state;
};

// Bound on consecutive empty inductions before giving up.
inline constexpr int kMaxEmptyRetries = 100;

// Self-learning from seed dictionary d0 over normalized x and z. Induction is
// restricted to the first cfg.vocab_cutoff rows of each side. When the mean
// objective fails to beat the best value by more than stall_tolerance for
// stall_patience consecutive iterations, the keep probability grows by
// keep_prob_growth (capped at 1); a further stall at probability 1 ends the
// loop. The result is re-fit once on a deterministically induced dictionary.
inline SelfLearnResult self_learn(const Matrix& x, const Matrix& z, const Dictionary& d0,
                                  const SelfLearnConfig& cfg) {
  cfg.validate();
  if (x.cols() != z.cols()) throw DimensionError("self_learn: dimension mismatch");
  detail::check_dictionary(d0, x.rows(), z.rows());

  const Matrix x_cut = x.topRows(std::min(cfg.vocab_cutoff, x.rows()));
  const Matrix z_cut = z.topRows(std::min(cfg.vocab_cutoff, z.rows()));

  SelfLearnResult out;
  LoopState& st = out.state;
  st.keep_prob = cfg.stochastic ? cfg.keep_prob_initial : 1.0;

  Dictionary d = d0;
  ProcrustesResult fit;
  for (;;) {
    ++st.iteration;
    fit = procrustes(x, z, d);
    const double obj = fit.mean_objective;
    st.objective_trace.push_back(obj);
    if (obj - st.best_objective > cfg.stall_tolerance) {
      st.best_objective = obj;
      st.stall_count = 0;
    } else {
      st.best_objective = std::max(st.best_objective, obj);
      ++st.stall_count;
    }
    if (st.stall_count >= cfg.stall_patience) {
      if (st.keep_prob >= 1.0) {
        st.converged = true;
        break;
      }
      st.keep_prob = std::min(1.0, st.keep_prob * cfg.keep_prob_growth);
      st.stall_count = 0;
    }
    if (st.iteration >= cfg.max_iterations) {
      st.hit_max_iterations = true;
      break;
    }

    const Matrix xm = apply_transform(x_cut, fit.mapping.wx);
    const Matrix zm = apply_transform(z_cut, fit.mapping.wz);
    for (std::uint64_t attempt = 0;; ++attempt) {
      try {
        d = induce_dictionary(xm, zm, cfg, st.keep_prob,
                              {cfg.seed, static_cast<std::uint64_t>(st.iteration), attempt});
        break;
      } catch (const EmptyDictionaryError&) {
        ++st.empty_retries;
        if (attempt + 1 >= kMaxEmptyRetries) throw;
      }
    }
  }

  SelfLearnConfig final_cfg = cfg;
  final_cfg.stochastic = false;
  const Matrix xm = apply_transform(x_cut, fit.mapping.wx);
  const Matrix zm = apply_transform(z_cut, fit.mapping.wz);
  out.dictionary = induce_dictionary(xm, zm, final_cfg, 1.0, {cfg.seed, 0, 0});
  const ProcrustesResult final_fit = procrustes(x, z, out.dictionary);
  out.mapping = final_fit.mapping;
  st.final_objective = final_fit.mean_objective;
  return out;
}

inline SelfLearnResult self_learn(const Embedding& x, const Embedding& z, const Dictionary& d0,
                                  const SelfLearnConfig& cfg) {
  return self_learn(x.vectors(), z.vectors(), d0, cfg);
}

}  // namespace xlmap
