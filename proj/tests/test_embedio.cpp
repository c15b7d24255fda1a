#include <gtest/gtest.h>

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "xlmap/embedio.hpp"

namespace xlmap {
namespace {

LoadOptions quiet(std::vector<std::string>* sink = nullptr) {
  LoadOptions o;
  o.warn = [sink](const std::string& m) {
    if (sink) sink->push_back(m);
  };
  return o;
}

Embedding parse(const std::string& text, LoadOptions o = quiet()) {
  std::istringstream in(text);
  return load_embeddings(in, o);
}

TEST(LoadEmbeddings, ParsesTwoWords) {
  const Embedding e = parse("2 3\ncat 1 0 0\ndog 0 1 0\n");
  ASSERT_EQ(e.size(), 2);
  EXPECT_EQ(e.dim(), 3);
  EXPECT_EQ(e.words()[0], "cat");
  EXPECT_EQ(e.words()[1], "dog");
  EXPECT_EQ(e.vectors()(0, 0), 1.0f);
  EXPECT_EQ(e.vectors()(1, 1), 1.0f);
  EXPECT_EQ(e.vectors()(1, 2), 0.0f);
}

TEST(LoadEmbeddings, DuplicateKeepsFirst) {
  const Embedding e = parse("3 2\na 1 0\na 2 0\nb 0 1\n");
  ASSERT_EQ(e.size(), 2);
  EXPECT_EQ(e.words()[0], "a");
  EXPECT_EQ(e.vectors()(0, 0), 1.0f);
  EXPECT_EQ(e.words()[1], "b");
  EXPECT_EQ(e.vectors()(1, 1), 1.0f);
}

TEST(LoadEmbeddings, ZeroRowDroppedWithWarning) {
  std::vector<std::string> warnings;
  const Embedding e = parse("3 2\na 1 0\nz 0 0\nb 0 1\n", quiet(&warnings));
  ASSERT_EQ(e.size(), 2);
  EXPECT_FALSE(e.find("z"));
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(LoadEmbeddings, ScientificNotationAndTabs) {
  const Embedding e = parse("1 3\nw\t1e-3 -2.5E+1\t.5\r\n");
  EXPECT_FLOAT_EQ(e.vectors()(0, 0), 1e-3f);
  EXPECT_FLOAT_EQ(e.vectors()(0, 1), -25.0f);
  EXPECT_FLOAT_EQ(e.vectors()(0, 2), 0.5f);
}

TEST(LoadEmbeddings, MaxVocabTruncatesAfterFiltering) {
  const std::string text = "5 1\na 1\na 2\nz 0\nb 3\nc 4\n";
  for (std::size_t k = 1; k <= 6; ++k) {
    LoadOptions o = quiet();
    o.max_vocab = k;
    const Embedding e = parse(text, o);
    EXPECT_EQ(static_cast<std::size_t>(e.size()), std::min<std::size_t>(k, 3));
  }
}

TEST(LoadEmbeddings, Errors) {
  EXPECT_THROW(parse(""), FormatError);
  EXPECT_THROW(parse("two 3\n"), FormatError);
  EXPECT_THROW(parse("2\n"), FormatError);
  EXPECT_THROW(parse("1 3\na 1 2\n"), FormatError);
  EXPECT_THROW(parse("1 2\na 1 2 3\n"), FormatError);
  EXPECT_THROW(parse("1 2\na 1 x\n"), FormatError);
  EXPECT_THROW(parse("1 2\na 0 0\n"), FormatError);
  EXPECT_THROW(parse("2 2\na 1 0\n"), FormatError);
}

TEST(SaveEmbeddings, SingleWordText) {
  Matrix m(1, 2);
  m << 1.0f, 2.0f;
  const Embedding e({"x"}, m);
  std::ostringstream out;
  save_embeddings(e, out);
  EXPECT_EQ(out.str(), "1 2\nx 1 2\n");
}

TEST(SaveEmbeddings, EmptyIsError) {
  std::ostringstream out;
  EXPECT_THROW(save_embeddings(Embedding(), out), DimensionError);
}

// Oracle: split the saved text by hand and compare each number with strtod.
TEST(SaveEmbeddings, RoundTripMatchesIndependentReparse) {
  std::mt19937_64 gen(7);
  std::normal_distribution<float> normal(0.0f, 3.0f);
  const Index n = 40;
  const Index d = 7;
  Matrix m(n, d);
  std::vector<std::string> words;
  for (Index i = 0; i < n; ++i) {
    words.push_back("w" + std::to_string(i) + "\xc3\xa9");
    for (Index j = 0; j < d; ++j) m(i, j) = normal(gen);
  }
  const Embedding e(words, m);
  std::ostringstream out;
  save_embeddings(e, out);

  std::istringstream lines(out.str());
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "40 7");
  for (Index i = 0; i < n; ++i) {
    ASSERT_TRUE(std::getline(lines, line));
    std::istringstream fields(line);
    std::string word;
    fields >> word;
    EXPECT_EQ(word, words[static_cast<std::size_t>(i)]);
    for (Index j = 0; j < d; ++j) {
      std::string tok;
      fields >> tok;
      EXPECT_NEAR(std::strtod(tok.c_str(), nullptr), m(i, j), 1e-5 * std::abs(m(i, j)) + 1e-6);
    }
  }

  const Embedding back = parse(out.str());
  EXPECT_EQ(back.words(), e.words());
  EXPECT_LE((back.vectors() - m).cwiseAbs().maxCoeff(), 1e-5f);

  std::ostringstream again;
  save_embeddings(back, again);
  EXPECT_EQ(again.str(), out.str());
}

TEST(Embedding, ConstructorValidates) {
  EXPECT_THROW(Embedding({"a", "b"}, Matrix::Ones(1, 2)), DimensionError);
  EXPECT_THROW(Embedding({"a", "a"}, Matrix::Ones(2, 2)), FormatError);
  const Embedding e({"a", "b"}, Matrix::Ones(2, 2));
  EXPECT_EQ(e.find("b"), Index{1});
  EXPECT_FALSE(e.find("A"));
  EXPECT_THROW((void)e.with_vectors(Matrix::Ones(3, 2)), DimensionError);
}

WordPairList parse_dict(const std::string& text) {
  std::istringstream in(text);
  return load_dictionary(in);
}

TEST(LoadDictionary, TabSeparated) {
  const WordPairList d = parse_dict("two\tdue\n");
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d.pairs[0], std::make_pair(std::string("two"), std::string("due")));
}

TEST(LoadDictionary, Deduplicates) {
  const WordPairList d = parse_dict("two due\ntwo due\n");
  ASSERT_EQ(d.size(), 1u);
}

TEST(LoadDictionary, MultipleTargetsKeptInOrder) {
  const WordPairList d = parse_dict("a x\n\nb y\na z\n");
  ASSERT_EQ(d.size(), 3u);
  EXPECT_EQ(d.pairs[2].second, "z");
}

TEST(LoadDictionary, SingleFieldIsError) {
  EXPECT_THROW(parse_dict("a b\nlonely\n"), FormatError);
}

TEST(LoadDictionary, FifteenHundredDistinctPairs) {
  std::ostringstream text;
  for (int i = 0; i < 1500; ++i) text << "src" << i << '\t' << "tgt" << i % 700 << '\n';
  const WordPairList d = parse_dict(text.str());
  EXPECT_EQ(d.size(), 1500u);

  std::ostringstream out;
  save_dictionary(d, out);
  EXPECT_EQ(parse_dict(out.str()).pairs, d.pairs);
}

}  // namespace
}  // namespace xlmap
