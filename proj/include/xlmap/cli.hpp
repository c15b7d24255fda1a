#pragma once

// Command-line front end: `map`, `eval`, `synth` and `profile` subcommands.
// Exit status: 0 success, 1 pipeline failure, 2 usage error.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "xlmap/embedio.hpp"
#include "xlmap/evalharness.hpp"
#include "xlmap/pipeline.hpp"

namespace xlmap::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Raised for flag combinations CLI11 cannot express.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Every pipeline knob, defaulting to the published hyperparameters.
struct PipelineFlags {
  double keep_prob = 0.1;
  double keep_prob_growth = 2.0;
  double stall_tolerance = 1e-6;
  int stall_patience = 50;
  long long cutoff = 20000;
  long long init_cutoff = 4000;
  int csls_k = 10;
  int max_iterations = 10000;
  std::uint64_t seed = 0;
  bool no_stochastic = false;
  bool no_csls = false;
  bool no_bidirectional = false;
  bool no_reweight = false;
  bool no_unsup_init = false;
  std::string seed_dict;
  std::size_t threads = 0;
  long long block_rows = kDefaultBlockRows;
  std::string eval_retrieval = "csls";
};

inline void add_pipeline_flags(CLI::App& app, PipelineFlags& f) {
  app.add_option("--keep-prob", f.keep_prob, "Initial keep probability of stochastic induction")
      ->capture_default_str()->check(CLI::Range(0.0, 1.0));
  app.add_option("--keep-prob-growth", f.keep_prob_growth, "Keep-probability multiplier on stall")
      ->capture_default_str();
  app.add_option("--stall-tolerance", f.stall_tolerance, "Minimum objective improvement")
      ->capture_default_str();
  app.add_option("--stall-patience", f.stall_patience, "Stalled iterations before annealing")
      ->capture_default_str();
  app.add_option("--cutoff", f.cutoff, "Vocabulary cutoff for dictionary induction")
      ->capture_default_str();
  app.add_option("--init-cutoff", f.init_cutoff, "Vocabulary cutoff for the initial dictionary")
      ->capture_default_str();
  app.add_option("--csls-k", f.csls_k, "CSLS neighborhood size")->capture_default_str();
  app.add_option("--max-iterations", f.max_iterations, "Safety cap on self-learning iterations")
      ->capture_default_str();
  app.add_option("--seed", f.seed, "Random seed")->capture_default_str();
  app.add_flag("--no-stochastic", f.no_stochastic, "Deterministic dictionary induction");
  app.add_flag("--no-csls", f.no_csls, "Nearest-neighbor retrieval instead of CSLS");
  app.add_flag("--no-bidirectional", f.no_bidirectional, "Induce source-to-target only");
  app.add_flag("--no-reweight", f.no_reweight, "Skip the final symmetric re-weighting");
  auto* no_init = app.add_flag("--no-unsup-init", f.no_unsup_init,
                               "Start from --seed-dict instead of the unsupervised initialization");
  auto* seed_dict = app.add_option("--seed-dict", f.seed_dict, "Seed dictionary file");
  seed_dict->needs(no_init);
  app.add_option("--threads", f.threads, "Worker threads (default: $XLMAP_THREADS or all cores)");
  app.add_option("--block-rows", f.block_rows, "Rows per similarity block")->capture_default_str();
  app.add_option("--eval-retrieval", f.eval_retrieval, "Retrieval used when evaluating")
      ->check(CLI::IsMember({"csls", "nn"}))
      ->capture_default_str();
}

inline PipelineConfig to_pipeline_config(const PipelineFlags& f) {
  if (f.no_unsup_init && f.seed_dict.empty()) {
    throw UsageError("--no-unsup-init requires --seed-dict");
  }
  PipelineConfig cfg;
  cfg.init.vocab_cutoff_init = f.init_cutoff;
  cfg.init.use_csls = !f.no_csls;
  cfg.init.bidirectional = !f.no_bidirectional;
  cfg.init.csls_k = f.csls_k;
  auto& s = cfg.self_learn;
  s.keep_prob_initial = f.keep_prob;
  s.keep_prob_growth = f.keep_prob_growth;
  s.stall_tolerance = f.stall_tolerance;
  s.stall_patience = f.stall_patience;
  s.vocab_cutoff = f.cutoff;
  s.csls_k = f.csls_k;
  s.bidirectional = !f.no_bidirectional;
  s.stochastic = !f.no_stochastic;
  s.retrieval = f.no_csls ? Retrieval::kNearestNeighbor : Retrieval::kCsls;
  s.max_iterations = f.max_iterations;
  s.seed = f.seed;
  s.block_rows = f.block_rows;
  s.threads = f.threads;
  cfg.reweight = !f.no_reweight;
  cfg.init.validate();
  s.validate();
  return cfg;
}

inline EvalOptions to_eval_options(const PipelineFlags& f) {
  EvalOptions e;
  e.retrieval = f.eval_retrieval == "nn" ? Retrieval::kNearestNeighbor : Retrieval::kCsls;
  e.csls_k = f.csls_k;
  e.block_rows = f.block_rows;
  e.threads = f.threads;
  return e;
}

inline nlohmann::json config_json(const PipelineConfig& cfg, bool seeded) {
  const auto& s = cfg.self_learn;
  nlohmann::json j;
  j["keep_prob_initial"] = s.keep_prob_initial;
  j["keep_prob_growth"] = s.keep_prob_growth;
  j["stall_tolerance"] = s.stall_tolerance;
  j["stall_patience"] = s.stall_patience;
  j["vocab_cutoff"] = s.vocab_cutoff;
  j["vocab_cutoff_init"] = cfg.init.vocab_cutoff_init;
  j["csls_k"] = s.csls_k;
  j["retrieval"] = to_string(s.retrieval);
  j["stochastic"] = s.stochastic;
  j["bidirectional"] = s.bidirectional;
  j["max_iterations"] = s.max_iterations;
  j["block_rows"] = s.block_rows;
  j["reweight"] = cfg.reweight;
  j["unsupervised_init"] = !seeded;
  return j;
}

// Reproducible description of one pipeline run. Wall-clock fields live under
// "timings" and are omitted when include_timing is false.
inline nlohmann::json run_record(const PipelineConfig& cfg, const PipelineResult& r,
                                 bool include_timing = true) {
  nlohmann::json j;
  j["seed"] = cfg.self_learn.seed;
  j["config"] = config_json(cfg, cfg.seed_dictionary.has_value());
  j["iterations"] = r.state.iteration;
  j["converged"] = r.state.converged;
  j["hit_max_iterations"] = r.state.hit_max_iterations;
  j["keep_prob"] = r.state.keep_prob;
  j["objective_trace"] = r.state.objective_trace;
  j["final_objective"] = r.state.final_objective;
  j["empty_retries"] = r.state.empty_retries;
  j["initial_dictionary_size"] = r.initial_dictionary.size();
  j["dictionary_size"] = r.dictionary.size();
  if (include_timing) {
    j["timings"] = {{"normalize", r.timings.normalize},
                    {"init", r.timings.init},
                    {"self_learn", r.timings.self_learn},
                    {"refine", r.timings.refine},
                    {"total", r.timings.total}};
  }
  return j;
}

inline Embedding mapped_embedding(const Embedding& normalized, const MatrixD& w) {
  return normalized.with_vectors(apply_transform(normalized.vectors(), w));
}

inline LoadOptions load_options(long long max_vocab, std::ostream& err) {
  LoadOptions o;
  if (max_vocab > 0) o.max_vocab = static_cast<std::size_t>(max_vocab);
  o.warn = [&err](const std::string& msg) { err << "warning: " << msg << '\n'; };
  return o;
}

inline void print_eval(const EvalResult& r, std::ostream& out) {
  out << "coverage: " << r.covered << " / " << (r.covered + r.oov) << " source words\n";
  out << "accuracy: " << std::fixed << std::setprecision(2) << 100.0 * r.accuracy << "%\n";
  out.unsetf(std::ios::fixed);
}

struct MapArgs {
  std::string src, trg, src_out, trg_out, record, gold;
  long long max_vocab = 0;
};

inline int run_map(const MapArgs& a, const PipelineFlags& f, std::ostream& out,
                   std::ostream& err) {
  PipelineConfig cfg = to_pipeline_config(f);
  const LoadOptions lo = load_options(a.max_vocab, err);
  const Embedding x = load_embeddings_file(a.src, lo);
  const Embedding z = load_embeddings_file(a.trg, lo);
  if (f.no_unsup_init) {
    const WordPairList seed = load_dictionary_file(f.seed_dict);
    cfg.seed_dictionary = dictionary_from_pairs(x, z, seed);
    if (cfg.seed_dictionary->empty()) {
      throw EmptyDictionaryError("no seed dictionary pair is in both vocabularies");
    }
  }
  const PipelineResult r = run_pipeline(x, z, cfg);
  save_embeddings_file(mapped_embedding(r.x, r.mapping.wx), a.src_out);
  save_embeddings_file(mapped_embedding(r.z, r.mapping.wz), a.trg_out);

  nlohmann::json record = run_record(cfg, r);
  if (!a.gold.empty()) {
    const EvalResult ev = evaluate(r.x, r.z, r.mapping, load_dictionary_file(a.gold),
                                   to_eval_options(f));
    record["accuracy"] = ev.accuracy;
    record["covered"] = ev.covered;
    print_eval(ev, out);
  }
  if (!a.record.empty()) {
    std::ofstream rec(a.record);
    if (!rec) throw Error("cannot open '" + a.record + "' for writing");
    rec << record.dump() << '\n';
  }
  out << "iterations: " << r.state.iteration << (r.state.converged ? " (converged)" : "")
      << "\nfinal objective: " << r.state.final_objective << "\ntime: " << r.timings.total
      << " s\n";
  return kExitOk;
}

struct EvalArgs {
  std::vector<std::string> src, trg;
  std::string gold, json;
  std::string retrieval = "csls";
  int csls_k = 10;
  bool dot = false;
  long long max_vocab = 0;
  std::size_t threads = 0;
};

// Evaluates already-mapped embeddings (identity mapping). Several src/trg
// pairs are treated as separate runs and aggregated.
inline int run_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  if (a.src.size() != a.trg.size()) {
    throw UsageError("--src and --trg must list the same number of files");
  }
  const WordPairList gold = load_dictionary_file(a.gold);
  EvalOptions opts;
  opts.retrieval = a.retrieval == "nn" ? Retrieval::kNearestNeighbor : Retrieval::kCsls;
  opts.csls_k = a.csls_k;
  opts.cosine = !a.dot;
  opts.threads = a.threads;
  const LoadOptions lo = load_options(a.max_vocab, err);

  std::vector<RunRecord> runs;
  for (std::size_t i = 0; i < a.src.size(); ++i) {
    const Embedding x = load_embeddings_file(a.src[i], lo);
    const Embedding z = load_embeddings_file(a.trg[i], lo);
    if (x.dim() != z.dim()) throw DimensionError("source and target dimensions differ");
    const MappingPair id{MatrixD::Identity(x.dim(), x.dim()), MatrixD::Identity(z.dim(), z.dim())};
    const EvalResult ev = evaluate(x, z, id, gold, opts);
    if (a.src.size() > 1) out << a.src[i] << ":\n";
    print_eval(ev, out);
    RunRecord rec;
    rec.seed = i;
    rec.accuracy = ev.accuracy;
    rec.covered = ev.covered;
    rec.success = ev.accuracy > kSuccessThreshold;
    runs.push_back(std::move(rec));
  }
  const RunReport rep = aggregate(std::move(runs));
  if (rep.runs.size() > 1) {
    out << std::fixed << std::setprecision(2) << "best " << 100.0 * rep.best << "  avg "
        << 100.0 * rep.average << "  successful " << rep.success_count << "/"
        << rep.runs.size() << '\n';
    out.unsetf(std::ios::fixed);
  }
  if (!a.json.empty()) {
    std::ofstream js(a.json);
    if (!js) throw Error("cannot open '" + a.json + "' for writing");
    write_json_lines(rep, js, false);
  }
  return kExitOk;
}

struct SynthArgs {
  long long n = 2000;
  long long dim = 50;
  double sigma = 0.02;
  bool no_permute = false;
  int runs = 1;
  std::string json;
  std::string write_dir;
};

inline int run_synth(const SynthArgs& a, const PipelineFlags& f, std::ostream& out,
                     std::ostream& err) {
  (void)err;
  SynthSpec spec;
  spec.n_words = a.n;
  spec.dim = a.dim;
  spec.noise_sigma = a.sigma;
  spec.permute = !a.no_permute;
  spec.seed = f.seed;

  if (!a.write_dir.empty()) {
    const SyntheticData data = generate_synthetic(spec);
    std::filesystem::create_directories(a.write_dir);
    const std::filesystem::path dir(a.write_dir);
    save_embeddings_file(data.x, (dir / "src.vec").string());
    save_embeddings_file(data.z, (dir / "trg.vec").string());
    std::ofstream g(dir / "gold.txt");
    save_dictionary(data.gold, g);
    out << "wrote " << (dir / "src.vec").string() << ", " << (dir / "trg.vec").string()
        << ", " << (dir / "gold.txt").string() << '\n';
    if (a.runs <= 0) return kExitOk;
  }
  if (a.runs < 1) throw UsageError("--runs must be positive");
  if (f.no_unsup_init) throw UsageError("synth always uses the unsupervised initialization");

  const PipelineConfig cfg = to_pipeline_config(f);
  const RunReport rep =
      multi_run_synthetic(spec, cfg, a.runs, f.seed, to_eval_options(f), 1);
  out << format_report_table(rep);
  if (!a.json.empty()) {
    std::ofstream js(a.json);
    if (!js) throw Error("cannot open '" + a.json + "' for writing");
    write_json_lines(rep, js);
  }
  return kExitOk;
}

struct ProfileArgs {
  std::string emb, out;
  std::vector<std::string> words;
  long long cutoff = 4000;
  long long max_vocab = 0;
};

inline int run_profile(const ProfileArgs& a, std::ostream& out, std::ostream& err) {
  const Embedding raw = load_embeddings_file(a.emb, load_options(a.max_vocab, err));
  const Embedding emb = raw.with_vectors(normalize(raw.vectors()));
  const auto rows = export_profile(emb, a.words, a.cutoff);
  if (a.out.empty() || a.out == "-") {
    write_profile_csv(rows, out);
  } else {
    std::ofstream f(a.out);
    if (!f) throw Error("cannot open '" + a.out + "' for writing");
    write_profile_csv(rows, f);
  }
  return kExitOk;
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Unsupervised cross-lingual embedding mapping"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Config file (TOML/INI); command-line flags take precedence");

  MapArgs map_args;
  PipelineFlags map_flags;
  auto* map = app.add_subcommand("map", "Learn a mapping and write mapped embeddings");
  map->add_option("--src", map_args.src, "Source embeddings (word2vec text)")->required();
  map->add_option("--trg", map_args.trg, "Target embeddings (word2vec text)")->required();
  map->add_option("--src-out", map_args.src_out, "Mapped source output")->required();
  map->add_option("--trg-out", map_args.trg_out, "Mapped target output")->required();
  map->add_option("--record", map_args.record, "JSON run record output");
  map->add_option("--gold", map_args.gold, "Gold dictionary to evaluate against");
  map->add_option("--max-vocab", map_args.max_vocab, "Read at most this many words");
  add_pipeline_flags(*map, map_flags);

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Evaluate mapped embeddings on a gold dictionary");
  eval->add_option("--src", eval_args.src, "Mapped source embeddings (one per run)")->required();
  eval->add_option("--trg", eval_args.trg, "Mapped target embeddings (one per run)")->required();
  eval->add_option("--gold", eval_args.gold, "Gold dictionary")->required();
  eval->add_option("--retrieval", eval_args.retrieval, "csls or nn")
      ->check(CLI::IsMember({"csls", "nn"}))->capture_default_str();
  eval->add_option("--csls-k", eval_args.csls_k, "CSLS neighborhood size")->capture_default_str();
  eval->add_flag("--dot", eval_args.dot, "Score with raw dot products instead of cosines");
  eval->add_option("--json", eval_args.json, "JSON lines output, one record per run");
  eval->add_option("--max-vocab", eval_args.max_vocab, "Read at most this many words");
  eval->add_option("--threads", eval_args.threads, "Worker threads");

  SynthArgs synth_args;
  PipelineFlags synth_flags;
  auto* synth = app.add_subcommand("synth", "Run the synthetic isometry benchmark");
  synth->add_option("--n", synth_args.n, "Words per language")->capture_default_str();
  synth->add_option("--dim", synth_args.dim, "Embedding dimension")->capture_default_str();
  synth->add_option("--sigma", synth_args.sigma, "Gaussian noise per component")
      ->capture_default_str();
  synth->add_flag("--no-permute", synth_args.no_permute, "Keep target rows in source order");
  synth->add_option("--runs", synth_args.runs, "Number of seeded runs (0 with --write-dir: write only)")
      ->capture_default_str();
  synth->add_option("--json", synth_args.json, "JSON lines output, one record per run");
  synth->add_option("--write-dir", synth_args.write_dir,
                    "Write src.vec, trg.vec and gold.txt for --seed into this directory");
  add_pipeline_flags(*synth, synth_flags);

  ProfileArgs profile_args;
  auto* profile = app.add_subcommand("profile", "Export sorted similarity profiles as CSV");
  profile->add_option("--emb", profile_args.emb, "Embeddings (word2vec text)")->required();
  profile->add_option("--words", profile_args.words, "Words to export")
      ->required()->delimiter(',');
  profile->add_option("--cutoff", profile_args.cutoff, "Number of most frequent words")
      ->capture_default_str();
  profile->add_option("--out", profile_args.out, "CSV output (default stdout)");
  profile->add_option("--max-vocab", profile_args.max_vocab, "Read at most this many words");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*map) return run_map(map_args, map_flags, out, err);
    if (*eval) return run_eval(eval_args, out, err);
    if (*synth) return run_synth(synth_args, synth_flags, out, err);
    if (*profile) return run_profile(profile_args, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace xlmap::cli
