// SPDX-License-Identifier: Apache-2.0
#include "anticipate/data_io.hpp"

#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "anticipate/errors.hpp"
#include "doctest.h"

using namespace anticipate;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("anticipate_io_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static inline int counter = 0;
};

void write(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

}  // namespace

TEST_CASE("load_corpus parses names into indices") {
  TempDir d;
  write(d.path / "vocab.txt", "pour_milk\nstir\n");
  write(d.path / "labels" / "v1.txt", "pour_milk\npour_milk\nstir\n");
  auto corpus = load_corpus(d.path / "labels", d.path / "vocab.txt");
  REQUIRE(corpus.videos().size() == 1);
  CHECK(corpus.videos()[0].id == "v1");
  CHECK(corpus.videos()[0].ground_truth.vector() == std::vector<Label>{0, 0, 1});
  CHECK_FALSE(corpus.videos()[0].decoded.has_value());
}

TEST_CASE("CRLF line endings and a trailing blank line are tolerated") {
  TempDir d;
  write(d.path / "vocab.txt", "a\r\nb\r\n");
  write(d.path / "labels" / "v.txt", "a\r\nb\r\nb\r\n\r\n");
  auto corpus = load_corpus(d.path / "labels", d.path / "vocab.txt");
  CHECK(corpus.videos()[0].ground_truth.vector() == std::vector<Label>{0, 1, 1});
}

TEST_CASE("indexed vocabulary format is accepted") {
  TempDir d;
  write(d.path / "mapping.txt", "0 SIL\n1 take_cup\n");
  auto v = load_vocabulary(d.path / "mapping.txt");
  CHECK(v.names() == std::vector<std::string>{"SIL", "take_cup"});
}

TEST_CASE("label file errors") {
  TempDir d;
  write(d.path / "vocab.txt", "a\nb\n");
  write(d.path / "empty" / "v.txt", "");
  CHECK_THROWS_AS(load_corpus(d.path / "empty", d.path / "vocab.txt"), InputError);

  write(d.path / "bad" / "v.txt", "a\nzzz\n");
  try {
    load_corpus(d.path / "bad", d.path / "vocab.txt");
    FAIL("expected an error");
  } catch (const InputError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("v.txt:2") != std::string::npos);
    CHECK(msg.find("zzz") != std::string::npos);
  }

  write(d.path / "gt" / "v.txt", "a\na\na\nb\nb\nb\n");
  write(d.path / "dec" / "v.txt", "a\na\nb\nb\nb\n");
  CHECK_THROWS_AS(load_corpus(d.path / "gt", d.path / "vocab.txt", d.path / "dec"), InputError);

  CHECK_THROWS_AS(load_corpus(d.path / "gt", d.path / "missing_vocab.txt"), InputError);
}

TEST_CASE("decoded labels attach by file name") {
  TempDir d;
  write(d.path / "vocab.txt", "a\nb\n");
  write(d.path / "gt" / "v1.txt", "a\na\nb\n");
  write(d.path / "gt" / "v2.txt", "b\nb\n");
  write(d.path / "dec" / "v1.txt", "a\nb\nb\n");
  auto corpus = load_corpus(d.path / "gt", d.path / "vocab.txt", d.path / "dec");
  REQUIRE(corpus.video("v1").decoded.has_value());
  CHECK(corpus.video("v1").decoded->vector() == std::vector<Label>{0, 1, 1});
  CHECK_FALSE(corpus.video("v2").decoded.has_value());
}

TEST_CASE("parse -> serialize -> parse is the identity") {
  TempDir d;
  write(d.path / "vocab.txt", "x\ny\nz\n");
  write(d.path / "labels" / "a.txt", "x\ny\ny\nz\nx\n");
  write(d.path / "labels" / "b.txt", "z\n");
  write(d.path / "decoded" / "a.txt", "x\nx\ny\nz\nz\n");
  auto c1 = load_corpus(d.path / "labels", d.path / "vocab.txt", d.path / "decoded");
  save_corpus(c1, d.path / "copy");
  auto c2 = load_corpus(d.path / "copy" / "labels", d.path / "copy" / "vocab.txt", d.path / "copy" / "decoded");
  CHECK(c1.vocabulary() == c2.vocabulary());
  REQUIRE(c1.videos().size() == c2.videos().size());
  for (std::size_t i = 0; i < c1.videos().size(); ++i) {
    CHECK(c1.videos()[i].id == c2.videos()[i].id);
    CHECK(c1.videos()[i].ground_truth == c2.videos()[i].ground_truth);
    CHECK(c1.videos()[i].decoded == c2.videos()[i].decoded);
  }
}

TEST_CASE("load_split") {
  TempDir d;
  LabelVocabulary vocab({"a"});
  Corpus corpus(vocab, {{"v1", FrameTimeline({0}), std::nullopt},
                        {"v2", FrameTimeline({0}), std::nullopt},
                        {"v3", FrameTimeline({0}), std::nullopt}});
  write(d.path / "s1.txt", "v3\n");
  auto split = load_split(d.path / "s1.txt", corpus);
  CHECK(split.train_ids == std::vector<std::string>{"v1", "v2"});
  CHECK(split.test_ids == std::vector<std::string>{"v3"});

  write(d.path / "all.txt", "v1\nv2\nv3\n");
  CHECK_THROWS_AS(load_split(d.path / "all.txt", corpus), InputError);
  write(d.path / "unknown.txt", "vX\n");
  CHECK_THROWS_AS(load_split(d.path / "unknown.txt", corpus), InputError);
  CHECK_THROWS_AS(load_split(d.path / "nope.txt", corpus), InputError);
}

TEST_CASE("generate_synthetic") {
  LabelVocabulary vocab({"A", "B", "C"});
  SyntheticGrammarSpec spec{vocab, {{{0, 1}, 1.0}}, {{3, 3}, {3, 3}, {3, 3}}, 1, 42};
  auto corpus = generate_synthetic(spec);
  REQUIRE(corpus.videos().size() == 1);
  CHECK(corpus.videos()[0].ground_truth.vector() == std::vector<Label>{0, 0, 0, 1, 1, 1});

  SUBCASE("same seed gives identical corpora") {
    SyntheticGrammarSpec s{vocab, {{{0, 1, 2}, 1.0}, {{2, 0}, 2.0}}, {{1, 9}, {2, 7}, {3, 5}}, 50, 9};
    auto a = generate_synthetic(s);
    auto b = generate_synthetic(s);
    for (std::size_t i = 0; i < a.videos().size(); ++i) CHECK(a.videos()[i].ground_truth == b.videos()[i].ground_truth);
    s.seed = 10;
    auto c = generate_synthetic(s);
    bool differs = false;
    for (std::size_t i = 0; i < a.videos().size(); ++i) differs |= !(a.videos()[i].ground_truth == c.videos()[i].ground_truth);
    CHECK(differs);
  }

  SUBCASE("zero weight sequences are never drawn and labels follow the grammar") {
    SyntheticGrammarSpec s{vocab, {{{0, 1, 2}, 1.0}, {{2, 0}, 0.0}}, {{1, 4}, {1, 4}, {1, 4}}, 100, 3};
    const auto c = generate_synthetic(s);
    for (const auto& v : c.videos())
      CHECK(segments_from_frames(v.ground_truth).labels() == std::vector<Label>{0, 1, 2});
  }

  SUBCASE("invalid specs are rejected") {
    SyntheticGrammarSpec s{vocab, {{{0, 0}, 1.0}}, {{1, 1}, {1, 1}, {1, 1}}, 1, 0};
    CHECK_THROWS_AS(generate_synthetic(s), InputError);
    s.sequences = {{{0}, 1.0}};
    s.lengths[0] = {0, 1};
    CHECK_THROWS_AS(generate_synthetic(s), InputError);
    s.lengths[0] = {3, 2};
    CHECK_THROWS_AS(generate_synthetic(s), InputError);
  }

  SUBCASE("decoded noise produces aligned decoded timelines") {
    SyntheticGrammarSpec s{vocab, {{{0, 1, 2}, 1.0}}, {{5, 9}, {5, 9}, {5, 9}}, 20, 4, 0.0, 0.5};
    auto c = generate_synthetic(s);
    bool any_diff = false;
    for (const auto& v : c.videos()) {
      REQUIRE(v.decoded.has_value());
      CHECK(v.decoded->size() == v.ground_truth.size());
      any_diff |= !(*v.decoded == v.ground_truth);
    }
    CHECK(any_diff);
  }
}

TEST_CASE("synthetic spec JSON") {
  const std::string text = R"({
    "classes": ["A", "B", "C"],
    "sequences": [{"labels": ["A", "B"], "weight": 2}, {"labels": ["C", "A"]}],
    "default_length": [2, 4],
    "lengths": {"C": [5, 5]},
    "videos": 7,
    "seed": 3,
    "transition_noise": 0.1
  })";
  auto spec = parse_synthetic_spec(text);
  CHECK(spec.vocabulary.size() == 3);
  CHECK(spec.sequences.size() == 2);
  CHECK(spec.sequences[0].weight == 2.0);
  CHECK(spec.sequences[1].labels == std::vector<Label>{2, 0});
  CHECK(spec.lengths[0].min == 2);
  CHECK(spec.lengths[2].max == 5);
  CHECK(spec.video_count == 7);
  CHECK(spec.transition_noise == doctest::Approx(0.1));
  CHECK_THROWS_AS(parse_synthetic_spec("{"), InputError);
  CHECK_THROWS_AS(parse_synthetic_spec(R"({"classes":["A"],"sequences":[{"labels":["Q"]}],"default_length":[1,1]})"),
                  InputError);
  CHECK_THROWS_AS(parse_synthetic_spec(R"({"classes":["A","B"],"sequences":[{"labels":["A"]}],"lengths":{"A":[1,1]}})"),
                  InputError);
}
