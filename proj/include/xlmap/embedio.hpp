#pragma once

// Embeddings in word2vec text format and bilingual word-pair dictionaries.
//
// Text format: a header line `count dim`, then one `word v1 ... vdim` line per
// word, most frequent word first. Words are opaque byte strings; only ASCII
// spaces and tabs delimit fields.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "xlmap/error.hpp"
#include "xlmap/vecmath.hpp"

namespace xlmap {

// Vocabulary plus one vector per word. Immutable once constructed.
class Embedding {
 public:
  Embedding() = default;

  // Throws if the row count differs from the word count or a word repeats.
  Embedding(std::vector<std::string> words, Matrix vectors)
      : words_(std::move(words)), vectors_(std::move(vectors)) {
    if (static_cast<Index>(words_.size()) != vectors_.rows()) {
      throw DimensionError("Embedding: " + std::to_string(words_.size()) +
                           " words but " + std::to_string(vectors_.rows()) + " rows");
    }
    index_.reserve(words_.size());
    for (std::size_t i = 0; i < words_.size(); ++i) {
      if (!index_.emplace(words_[i], static_cast<Index>(i)).second) {
        throw FormatError("Embedding: duplicate word '" + words_[i] + "'");
      }
    }
  }

  [[nodiscard]] const std::vector<std::string>& words() const { return words_; }
  [[nodiscard]] const Matrix& vectors() const { return vectors_; }
  [[nodiscard]] Index size() const { return vectors_.rows(); }
  [[nodiscard]] Index dim() const { return vectors_.cols(); }
  [[nodiscard]] bool empty() const { return words_.empty(); }

  [[nodiscard]] std::optional<Index> find(std::string_view word) const {
    auto it = index_.find(std::string(word));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  // Same vocabulary, new vectors (e.g. after normalization or mapping).
  [[nodiscard]] Embedding with_vectors(Matrix vectors) const {
    if (vectors.rows() != size()) {
      throw DimensionError("Embedding::with_vectors: row count changed");
    }
    Embedding out;
    out.words_ = words_;
    out.index_ = index_;
    out.vectors_ = std::move(vectors);
    return out;
  }

 private:
  std::vector<std::string> words_;
  Matrix vectors_;
  std::unordered_map<std::string, Index> index_;
};

// Gold or seed dictionary as word pairs; a source may have several targets.
struct WordPairList {
  std::vector<std::pair<std::string, std::string>> pairs;

  [[nodiscard]] std::size_t size() const { return pairs.size(); }
  [[nodiscard]] bool empty() const { return pairs.empty(); }
};

struct LoadOptions {
  std::optional<std::size_t> max_vocab;
  // Receives one message per dropped row; defaults to stderr.
  std::function<void(const std::string&)> warn = [](const std::string& msg) {
    std::cerr << "warning: " << msg << '\n';
  };
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

struct PairHash {
  std::size_t operator()(const std::pair<std::string, std::string>& p) const {
    const std::size_t h = std::hash<std::string>{}(p.first);
    return h ^ (std::hash<std::string>{}(p.second) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
  }
};

}  // namespace detail

// Reads word2vec text. Keeps the first occurrence of a repeated word and
// drops all-zero rows (with a warning); stops after `max_vocab` kept rows.
inline Embedding load_embeddings(std::istream& in, const LoadOptions& opts = {}) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("embeddings: missing header");
  const auto header = detail::split_fields(line);
  long long count = 0;
  long long dim = 0;
  if (header.size() != 2 || !detail::parse_number(header[0], count) ||
      !detail::parse_number(header[1], dim) || count < 0 || dim <= 0) {
    throw FormatError("embeddings: malformed header '" + line + "'");
  }

  std::size_t limit = static_cast<std::size_t>(count);
  if (opts.max_vocab) limit = std::min(limit, *opts.max_vocab);

  std::vector<std::string> words;
  std::vector<float> values;
  std::unordered_set<std::string> seen;
  words.reserve(limit);
  values.reserve(limit * static_cast<std::size_t>(dim));
  std::vector<float> row(static_cast<std::size_t>(dim));

  long long line_no = 1;
  for (long long r = 0; r < count && words.size() < limit; ++r) {
    ++line_no;
    if (!std::getline(in, line)) {
      throw FormatError("embeddings: expected " + std::to_string(count) +
                        " rows, file ends after " + std::to_string(r));
    }
    const auto fields = detail::split_fields(line);
    if (static_cast<long long>(fields.size()) != dim + 1) {
      throw FormatError("embeddings: line " + std::to_string(line_no) + " has " +
                        std::to_string(fields.empty() ? 0 : fields.size() - 1) +
                        " components, expected " + std::to_string(dim));
    }
    bool zero = true;
    for (long long j = 0; j < dim; ++j) {
      float v = 0.0f;
      if (!detail::parse_number(fields[static_cast<std::size_t>(j + 1)], v) ||
          !std::isfinite(v)) {
        throw FormatError("embeddings: line " + std::to_string(line_no) +
                          ": bad value '" +
                          std::string(fields[static_cast<std::size_t>(j + 1)]) + "'");
      }
      row[static_cast<std::size_t>(j)] = v;
      zero = zero && v == 0.0f;
    }
    std::string word(fields[0]);
    if (seen.count(word) != 0) continue;
    if (zero) {
      if (opts.warn) opts.warn("dropping zero vector for '" + word + "'");
      continue;
    }
    seen.insert(word);
    words.push_back(std::move(word));
    values.insert(values.end(), row.begin(), row.end());
  }
  if (words.empty()) throw FormatError("embeddings: empty vocabulary");

  Matrix m = Eigen::Map<const Matrix>(values.data(), static_cast<Index>(words.size()),
                                      static_cast<Index>(dim));
  return Embedding(std::move(words), std::move(m));
}

inline Embedding load_embeddings_file(const std::string& path, const LoadOptions& opts = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  return load_embeddings(in, opts);
}

// Writes word2vec text with shortest round-trip float formatting.
inline void save_embeddings(const Embedding& emb, std::ostream& out) {
  if (emb.empty()) throw DimensionError("save_embeddings: empty embedding");
  out << emb.size() << ' ' << emb.dim() << '\n';
  char buf[64];
  const Matrix& m = emb.vectors();
  for (Index i = 0; i < emb.size(); ++i) {
    out << emb.words()[static_cast<std::size_t>(i)];
    for (Index j = 0; j < emb.dim(); ++j) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), m(i, j));
      out << ' ';
      out.write(buf, res.ptr - buf);
    }
    out << '\n';
  }
  if (!out) throw Error("save_embeddings: write failed");
}

inline void save_embeddings_file(const Embedding& emb, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  save_embeddings(emb, out);
  out.flush();
  if (!out) throw Error("save_embeddings: write failed for '" + path + "'");
}

// Reads `source<ws>target` lines; blank lines are skipped, repeated pairs
// are dropped, and fields beyond the second are ignored.
inline WordPairList load_dictionary(std::istream& in) {
  WordPairList out;
  std::unordered_set<std::pair<std::string, std::string>, detail::PairHash> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = detail::split_fields(line);
    if (fields.empty()) continue;
    if (fields.size() < 2) {
      throw FormatError("dictionary: line " + std::to_string(line_no) +
                        " has fewer than 2 fields");
    }
    std::pair<std::string, std::string> p{std::string(fields[0]), std::string(fields[1])};
    if (seen.insert(p).second) out.pairs.push_back(std::move(p));
  }
  return out;
}

inline WordPairList load_dictionary_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  return load_dictionary(in);
}

inline void save_dictionary(const WordPairList& dict, std::ostream& out) {
  for (const auto& [src, tgt] : dict.pairs) out << src << '\t' << tgt << '\n';
  if (!out) throw Error("save_dictionary: write failed");
}

}  // namespace xlmap
