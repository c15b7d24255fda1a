#pragma once

// The four-stage mapping pipeline: normalize, initial dictionary
// (unsupervised or supplied), self-learning, and optional re-weighting.

#include <chrono>
#include <optional>
#include <string>

#include "xlmap/embedio.hpp"
#include "xlmap/error.hpp"
#include "xlmap/initsol.hpp"
#include "xlmap/refine.hpp"
#include "xlmap/selflearn.hpp"
#include "xlmap/vecmath.hpp"

namespace xlmap {

struct PipelineConfig {
  InitConfig init;
  SelfLearnConfig self_learn;
  // Used instead of the unsupervised initialization when set.
  std::optional<Dictionary> seed_dictionary;
  bool reweight = true;
  RefineOptions refine;
};

struct PipelineTimings {
  double normalize = 0.0;
  double init = 0.0;
  double self_learn = 0.0;
  double refine = 0.0;
  double total = 0.0;
};

struct PipelineResult {
  Embedding x;  // normalized source
  Embedding z;  // normalized target
  Dictionary initial_dictionary;
  Dictionary dictionary;
  MappingPair orthogonal_mapping;  // self-learning output
  MappingPair mapping;             // after re-weighting when enabled
  LoopState state;
  PipelineTimings timings;
};

// Index pairs for the word pairs present in both vocabularies.
inline Dictionary dictionary_from_pairs(const Embedding& x, const Embedding& z,
                                        const WordPairList& pairs) {
  Dictionary d;
  for (const auto& [src, tgt] : pairs.pairs) {
    const auto i = x.find(src);
    const auto j = z.find(tgt);
    if (i && j) d.entries.push_back({*i, *j});
  }
  return d;
}

namespace detail {

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

}  // namespace detail

inline PipelineResult run_pipeline(const Embedding& x_raw, const Embedding& z_raw,
                                   const PipelineConfig& cfg) {
  if (x_raw.dim() != z_raw.dim()) {
    throw DimensionError("source and target embeddings differ in dimension (" +
                         std::to_string(x_raw.dim()) + " vs " +
                         std::to_string(z_raw.dim()) + ")");
  }
  detail::Stopwatch clock;
  PipelineResult r;
  r.x = x_raw.with_vectors(normalize(x_raw.vectors()));
  r.z = z_raw.with_vectors(normalize(z_raw.vectors()));
  r.timings.normalize = clock.lap();

  if (cfg.seed_dictionary) {
    if (cfg.seed_dictionary->empty()) throw EmptyDictionaryError("seed dictionary is empty");
    r.initial_dictionary = *cfg.seed_dictionary;
  } else {
    r.initial_dictionary = build_initial_dictionary(r.x, r.z, cfg.init);
  }
  r.timings.init = clock.lap();

  SelfLearnResult learned = self_learn(r.x, r.z, r.initial_dictionary, cfg.self_learn);
  r.dictionary = std::move(learned.dictionary);
  r.orthogonal_mapping = std::move(learned.mapping);
  r.state = std::move(learned.state);
  r.timings.self_learn = clock.lap();

  if (cfg.reweight) {
    r.mapping =
        symmetric_reweight(r.x.vectors(), r.z.vectors(), r.dictionary, cfg.refine).mapping;
  } else {
    r.mapping = r.orthogonal_mapping;
  }
  r.timings.refine = clock.lap();
  r.timings.total =
      r.timings.normalize + r.timings.init + r.timings.self_learn + r.timings.refine;
  return r;
}

}  // namespace xlmap
