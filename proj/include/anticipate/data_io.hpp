// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "anticipate/timeline.hpp"

namespace anticipate {

struct Video {
  std::string id;
  FrameTimeline ground_truth;
  /// Labels produced by an external recognizer for the same frames, if available.
  std::optional<FrameTimeline> decoded;
};

/// A vocabulary plus labelled videos, sorted by id.
class Corpus {
 public:
  Corpus(LabelVocabulary vocabulary, std::vector<Video> videos);

  const LabelVocabulary& vocabulary() const { return vocabulary_; }
  const std::vector<Video>& videos() const { return videos_; }
  std::size_t num_classes() const { return vocabulary_.size(); }
  const Video& video(const std::string& id) const;
  bool contains(const std::string& id) const;

 private:
  LabelVocabulary vocabulary_;
  std::vector<Video> videos_;
};

struct SplitSpec {
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

LabelVocabulary load_vocabulary(const std::filesystem::path& vocab_file);
void write_vocabulary(const std::filesystem::path& vocab_file, const LabelVocabulary& vocabulary);

/// One class name per line; CRLF and a trailing blank line are accepted.
FrameTimeline read_label_file(const std::filesystem::path& file, const LabelVocabulary& vocabulary);
void write_label_file(const std::filesystem::path& file, const FrameTimeline& timeline,
                      const LabelVocabulary& vocabulary);

/// Every regular file in label_dir is one video whose id is the file stem. When
/// decoded_dir is given, a file with the same name there is attached as the decoded timeline.
Corpus load_corpus(const std::filesystem::path& label_dir, const std::filesystem::path& vocab_file,
                   const std::optional<std::filesystem::path>& decoded_dir = std::nullopt);

/// Writes <dir>/labels/<id>.txt, <dir>/vocab.txt and, for videos that have one, <dir>/decoded/<id>.txt.
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);

/// Split file lists test ids one per line; every other corpus video is training data.
SplitSpec load_split(const std::filesystem::path& split_file, const Corpus& corpus);
SplitSpec make_split(const Corpus& corpus, const std::vector<std::string>& test_ids);

struct GrammarSequence {
  std::vector<Label> labels;
  double weight = 1.0;
};

struct LengthRange {
  std::size_t min = 1;
  std::size_t max = 1;
};

/// Stochastic activity grammar for generating desk-scale corpora.
///
/// Each video picks one sequence by weight and draws every segment length uniformly
/// from its class range. With transition_noise > 0, each label after the first is
/// replaced with that probability by a random class different from its predecessor.
/// With decoded_noise > 0 a decoded timeline is attached in which each ground-truth
/// segment is relabelled with that probability.
struct SyntheticGrammarSpec {
  LabelVocabulary vocabulary;
  std::vector<GrammarSequence> sequences;
  std::vector<LengthRange> lengths;  // one per class
  std::size_t video_count = 1;
  std::uint64_t seed = 0;
  double transition_noise = 0.0;
  double decoded_noise = 0.0;

  /// Throws InputError on a violated invariant.
  void validate() const;
};

Corpus generate_synthetic(const SyntheticGrammarSpec& spec);

/// JSON config, schema documented in README.md.
SyntheticGrammarSpec load_synthetic_spec(const std::filesystem::path& file);
SyntheticGrammarSpec parse_synthetic_spec(const std::string& json_text);

/// Training and test timelines of a split, in split order.
std::vector<FrameTimeline> timelines_of(const Corpus& corpus, const std::vector<std::string>& ids);

}  // namespace anticipate
