#pragma once

// Bilingual lexicon extraction (P@1), the synthetic isometry benchmark,
// multi-run reporting, and similarity-profile export.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "xlmap/embedio.hpp"
#include "xlmap/error.hpp"
#include "xlmap/initsol.hpp"
#include "xlmap/parallel.hpp"
#include "xlmap/pipeline.hpp"
#include "xlmap/selflearn.hpp"
#include "xlmap/vecmath.hpp"

namespace xlmap {

// ---------------------------------------------------------------------------
// Evaluation

struct EvalOptions {
  Retrieval retrieval = Retrieval::kCsls;
  int csls_k = 10;
  // Length-normalize mapped vectors so retrieval scores are cosines.
  bool cosine = true;
  Index block_rows = kDefaultBlockRows;
  std::size_t threads = 0;
};

struct PairOutcome {
  std::string source;
  std::string predicted;
  bool correct = false;
};

struct EvalResult {
  double accuracy = 0.0;     // correct / covered
  std::size_t covered = 0;   // distinct gold sources found in the vocabulary
  std::size_t oov = 0;       // distinct gold sources missing from it
  std::vector<PairOutcome> outcomes;  // one per covered source
};

// Top-1 retrieval over the full target vocabulary for every distinct gold
// source present in x. A prediction counts if it matches any gold target.
inline EvalResult evaluate(const Embedding& x, const Embedding& z, const MappingPair& map,
                           const WordPairList& gold, const EvalOptions& opts = {}) {
  if (gold.empty()) throw DimensionError("evaluate: empty gold dictionary");
  std::vector<std::string> sources;
  std::unordered_map<std::string, std::unordered_set<std::string>> targets;
  for (const auto& [src, tgt] : gold.pairs) {
    auto [it, fresh] = targets.try_emplace(src);
    if (fresh) sources.push_back(src);
    it->second.insert(tgt);
  }

  EvalResult r;
  std::vector<Index> rows;
  std::vector<const std::string*> covered_words;
  for (const auto& s : sources) {
    if (const auto i = x.find(s)) {
      rows.push_back(*i);
      covered_words.push_back(&s);
    } else {
      ++r.oov;
    }
  }
  r.covered = rows.size();
  if (r.covered == 0) throw DimensionError("evaluate: no gold source word is in the vocabulary");

  Matrix xm = apply_transform(x.vectors(), map.wx);
  Matrix zm = apply_transform(z.vectors(), map.wz);
  if (opts.cosine) {
    length_normalize(xm);
    length_normalize(zm);
  }
  Matrix queries(static_cast<Index>(rows.size()), xm.cols());
  for (std::size_t q = 0; q < rows.size(); ++q) queries.row(static_cast<Index>(q)) = xm.row(rows[q]);

  const std::size_t threads = opts.threads == 0 ? default_thread_count() : opts.threads;
  RetrievalRequest req;
  req.block_rows = opts.block_rows;
  req.threads = threads;
  std::vector<double> r_query;
  std::vector<double> r_target;
  if (opts.retrieval == Retrieval::kCsls) {
    r_target = csls_knn_means(zm, xm, opts.csls_k, opts.block_rows, threads);
    r_query = csls_knn_means(queries, zm, opts.csls_k, opts.block_rows, threads);
    req.r_query = &r_query;
    req.r_target = &r_target;
  }
  const std::vector<Index> best = retrieve_top1(queries, zm, req);

  std::size_t correct = 0;
  r.outcomes.reserve(rows.size());
  for (std::size_t q = 0; q < rows.size(); ++q) {
    PairOutcome o;
    o.source = *covered_words[q];
    o.predicted = z.words()[static_cast<std::size_t>(best[q])];
    o.correct = targets.at(o.source).count(o.predicted) != 0;
    correct += o.correct ? 1 : 0;
    r.outcomes.push_back(std::move(o));
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.covered);
  return r;
}

// ---------------------------------------------------------------------------
// Synthetic isometry benchmark

struct SynthSpec {
  Index n_words = 2000;
  Index dim = 50;
  double noise_sigma = 0.02;
  bool permute = true;
  std::uint64_t seed = 0;
};

struct SyntheticData {
  Embedding x;
  Embedding z;
  WordPairList gold;                // (s_i, t_perm[i])
  std::vector<Index> permutation;   // source row i sits at target row perm[i]
  MatrixD rotation;
};

// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the signs
// of R's diagonal folded into Q.
inline MatrixD random_orthogonal(Index dim, std::mt19937_64& gen) {
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixD g(dim, dim);
  for (Index i = 0; i < dim; ++i)
    for (Index j = 0; j < dim; ++j) g(i, j) = normal(gen);
  Eigen::HouseholderQR<MatrixD> qr(g);
  MatrixD q = qr.householderQ() * MatrixD::Identity(dim, dim);
  const MatrixD rmat = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < dim; ++j) {
    if (rmat(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

// X is n x d standard Gaussian; row perm[i] of Z is X_i Q plus N(0, sigma^2)
// noise per component.
inline SyntheticData generate_synthetic(const SynthSpec& spec) {
  if (spec.n_words < 1 || spec.dim < 1) throw DimensionError("generate_synthetic: empty spec");
  if (spec.noise_sigma < 0.0) throw DimensionError("generate_synthetic: negative sigma");
  std::mt19937_64 gen(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  MatrixD x(spec.n_words, spec.dim);
  for (Index i = 0; i < spec.n_words; ++i)
    for (Index j = 0; j < spec.dim; ++j) x(i, j) = normal(gen);
  SyntheticData out;
  out.rotation = random_orthogonal(spec.dim, gen);

  out.permutation.resize(static_cast<std::size_t>(spec.n_words));
  std::iota(out.permutation.begin(), out.permutation.end(), Index{0});
  if (spec.permute) std::shuffle(out.permutation.begin(), out.permutation.end(), gen);

  const MatrixD rotated = x * out.rotation;
  MatrixD z(spec.n_words, spec.dim);
  for (Index i = 0; i < spec.n_words; ++i) {
    z.row(out.permutation[static_cast<std::size_t>(i)]) = rotated.row(i);
  }
  if (spec.noise_sigma > 0.0) {
    for (Index i = 0; i < spec.n_words; ++i)
      for (Index j = 0; j < spec.dim; ++j) z(i, j) += spec.noise_sigma * normal(gen);
  }

  std::vector<std::string> sw;
  std::vector<std::string> tw;
  sw.reserve(static_cast<std::size_t>(spec.n_words));
  tw.reserve(static_cast<std::size_t>(spec.n_words));
  for (Index i = 0; i < spec.n_words; ++i) {
    sw.push_back("s" + std::to_string(i));
    tw.push_back("t" + std::to_string(i));
  }
  for (Index i = 0; i < spec.n_words; ++i) {
    out.gold.pairs.emplace_back(sw[static_cast<std::size_t>(i)],
                                tw[static_cast<std::size_t>(out.permutation[static_cast<std::size_t>(i)])]);
  }
  out.x = Embedding(std::move(sw), x.cast<float>());
  out.z = Embedding(std::move(tw), z.cast<float>());
  return out;
}

// Uniformly random pairing of the first `cutoff` source words with target
// words from the first `cutoff` rows; a stand-in for a useless seed.
inline Dictionary random_dictionary(Index x_rows, Index z_rows, Index cutoff,
                                    std::uint64_t seed) {
  const Index nx = std::min(cutoff, x_rows);
  const Index nz = std::min(cutoff, z_rows);
  if (nx < 1 || nz < 1) throw DimensionError("random_dictionary: empty vocabulary");
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<Index> pick(0, nz - 1);
  Dictionary d;
  d.entries.reserve(static_cast<std::size_t>(nx));
  for (Index i = 0; i < nx; ++i) d.entries.push_back({i, pick(gen)});
  return d;
}

// ---------------------------------------------------------------------------
// Multi-run reporting

// Runs scoring above this accuracy count as successful.
inline constexpr double kSuccessThreshold = 0.05;

struct RunRecord {
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  bool success = false;
  std::size_t covered = 0;
  int iterations = 0;
  bool converged = false;
  double final_objective = 0.0;
  std::size_t dictionary_size = 0;
  std::vector<double> objective_trace;
  double wall_seconds = 0.0;
  std::string error;  // empty unless the run failed
};

struct RunReport {
  std::vector<RunRecord> runs;
  double best = 0.0;
  double average = 0.0;
  std::size_t success_count = 0;
  double mean_runtime = 0.0;
};

inline RunReport aggregate(std::vector<RunRecord> runs) {
  RunReport rep;
  rep.runs = std::move(runs);
  if (rep.runs.empty()) return rep;
  double sum = 0.0;
  double time = 0.0;
  rep.best = rep.runs.front().accuracy;
  for (const auto& r : rep.runs) {
    rep.best = std::max(rep.best, r.accuracy);
    sum += r.accuracy;
    time += r.wall_seconds;
    rep.success_count += r.success ? 1 : 0;
  }
  rep.average = sum / static_cast<double>(rep.runs.size());
  rep.mean_runtime = time / static_cast<double>(rep.runs.size());
  return rep;
}

// Calls run_one(base_seed + r) for r in [0, n_runs). A run that throws is
// recorded with its message and zero accuracy.
inline RunReport multi_run(int n_runs, std::uint64_t base_seed,
                           const std::function<RunRecord(std::uint64_t)>& run_one,
                           std::size_t threads = 1) {
  if (n_runs < 1) throw DimensionError("multi_run: n_runs must be positive");
  std::vector<RunRecord> runs(static_cast<std::size_t>(n_runs));
  parallel_for(runs.size(), threads, [&](std::size_t r) {
    const std::uint64_t seed = base_seed + r;
    try {
      runs[r] = run_one(seed);
    } catch (const std::exception& e) {
      runs[r] = RunRecord{};
      runs[r].error = e.what();
    }
    runs[r].seed = seed;
    runs[r].success = runs[r].error.empty() && runs[r].accuracy > kSuccessThreshold;
  });
  return aggregate(std::move(runs));
}

inline RunRecord evaluate_run(const PipelineResult& result, const WordPairList& gold,
                              const EvalOptions& eval) {
  RunRecord rec;
  const EvalResult ev = evaluate(result.x, result.z, result.mapping, gold, eval);
  rec.accuracy = ev.accuracy;
  rec.covered = ev.covered;
  rec.iterations = result.state.iteration;
  rec.converged = result.state.converged;
  rec.final_objective = result.state.final_objective;
  rec.dictionary_size = result.dictionary.size();
  rec.objective_trace = result.state.objective_trace;
  rec.wall_seconds = result.timings.total;
  return rec;
}

// Fixed data, pipeline seed varies per run.
inline RunReport multi_run(const PipelineConfig& cfg, const Embedding& x, const Embedding& z,
                           const WordPairList& gold, int n_runs, std::uint64_t base_seed,
                           const EvalOptions& eval = {}, std::size_t threads = 1) {
  return multi_run(
      n_runs, base_seed,
      [&](std::uint64_t seed) {
        PipelineConfig run_cfg = cfg;
        run_cfg.self_learn.seed = seed;
        return evaluate_run(run_pipeline(x, z, run_cfg), gold, eval);
      },
      threads);
}

// Fresh synthetic data per run: both the data seed and the pipeline seed are
// base_seed + r.
inline RunReport multi_run_synthetic(const SynthSpec& spec, const PipelineConfig& cfg,
                                     int n_runs, std::uint64_t base_seed,
                                     const EvalOptions& eval = {}, std::size_t threads = 1) {
  return multi_run(
      n_runs, base_seed,
      [&](std::uint64_t seed) {
        SynthSpec s = spec;
        s.seed = seed;
        const SyntheticData data = generate_synthetic(s);
        PipelineConfig run_cfg = cfg;
        run_cfg.self_learn.seed = seed;
        return evaluate_run(run_pipeline(data.x, data.z, run_cfg), data.gold, eval);
      },
      threads);
}

inline nlohmann::json to_json(const RunRecord& r, bool include_timing = true) {
  nlohmann::json j;
  j["seed"] = r.seed;
  j["accuracy"] = r.accuracy;
  j["success"] = r.success;
  j["covered"] = r.covered;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["final_objective"] = r.final_objective;
  j["dictionary_size"] = r.dictionary_size;
  j["objective_trace"] = r.objective_trace;
  if (!r.error.empty()) j["error"] = r.error;
  if (include_timing) j["wall_seconds"] = r.wall_seconds;
  return j;
}

// One JSON object per line, one line per run.
inline void write_json_lines(const RunReport& rep, std::ostream& out, bool include_timing = true) {
  for (const auto& r : rep.runs) out << to_json(r, include_timing).dump() << '\n';
}

// Best / avg / successful runs / mean runtime, accuracies in percent.
inline std::string format_report_table(const RunReport& rep) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "run   seed        acc(%)  iters  time(s)\n";
  for (std::size_t i = 0; i < rep.runs.size(); ++i) {
    const auto& r = rep.runs[i];
    os << std::setw(3) << i << "  " << std::setw(10) << r.seed << "  " << std::setw(6)
       << 100.0 * r.accuracy << "  " << std::setw(5) << r.iterations << "  " << std::setw(7)
       << r.wall_seconds;
    if (!r.error.empty()) os << "  error: " << r.error;
    os << '\n';
  }
  os << "best " << 100.0 * rep.best << "  avg " << 100.0 * rep.average << "  successful "
     << rep.success_count << "/" << rep.runs.size() << "  mean time " << rep.mean_runtime
     << " s\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Similarity-profile export

struct ProfileRow {
  std::string word;
  Index rank = 0;  // 1 = largest similarity
  float value = 0.0f;
};

// Rows of the normalized sorted sqrt-similarity matrix for the requested
// words. `emb` must already be normalized; cutoff is clamped to its size.
inline std::vector<ProfileRow> export_profile(const Embedding& emb,
                                              const std::vector<std::string>& words,
                                              Index cutoff) {
  cutoff = std::min(cutoff, emb.size());
  std::vector<Index> rows;
  for (const auto& w : words) {
    const auto i = emb.find(w);
    if (!i || *i >= cutoff) {
      throw DimensionError("export_profile: '" + w + "' is not among the first " +
                           std::to_string(cutoff) + " words");
    }
    rows.push_back(*i);
  }
  const Matrix profile = similarity_profile(emb.vectors(), cutoff);
  std::vector<ProfileRow> out;
  out.reserve(rows.size() * static_cast<std::size_t>(cutoff));
  for (std::size_t w = 0; w < rows.size(); ++w) {
    for (Index j = 0; j < profile.cols(); ++j) {
      out.push_back({words[w], j + 1, profile(rows[w], j)});
    }
  }
  return out;
}

inline void write_profile_csv(const std::vector<ProfileRow>& rows, std::ostream& out) {
  out << "word,rank,value\n";
  char buf[64];
  for (const auto& r : rows) {
    const auto res = std::to_chars(buf, buf + sizeof(buf), r.value);
    if (r.word.find_first_of(",\"\n") == std::string::npos) {
      out << r.word;
    } else {
      out << '"';
      for (char c : r.word) out << (c == '"' ? "\"\"" : std::string(1, c));
      out << '"';
    }
    out << ',' << r.rank << ',';
    out.write(buf, res.ptr - buf);
    out << '\n';
  }
}

}  // namespace xlmap
