// SPDX-License-Identifier: Apache-2.0
#include "anticipate/data_io.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "anticipate/errors.hpp"
#include "anticipate/random.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace anticipate {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

/// Non-empty trimmed lines; blank lines are accepted only at the end of the file.
std::vector<std::string> read_lines(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw InputError("cannot open " + file.string());
  std::vector<std::string> lines;
  std::string line;
  std::size_t line_no = 0;
  std::size_t first_blank = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty()) {
      if (first_blank == 0) first_blank = line_no;
      continue;
    }
    if (first_blank != 0)
      throw InputError(file.string() + ":" + std::to_string(first_blank) + ": blank line inside file");
    lines.push_back(std::move(t));
  }
  return lines;
}

void write_lines(const fs::path& file, const std::vector<std::string>& lines) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw InputError("cannot write " + file.string());
  for (const auto& l : lines) out << l << '\n';
}

std::vector<fs::path> regular_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InputError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    if (entry.path().filename().string().starts_with(".")) continue;
    files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

Corpus::Corpus(LabelVocabulary vocabulary, std::vector<Video> videos)
    : vocabulary_(std::move(vocabulary)), videos_(std::move(videos)) {
  std::sort(videos_.begin(), videos_.end(), [](const Video& a, const Video& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < videos_.size(); ++i) {
    const auto& v = videos_[i];
    if (i > 0 && videos_[i - 1].id == v.id) throw InputError("duplicate video id: " + v.id);
    v.ground_truth.validate(vocabulary_.size());
    if (v.decoded) {
      if (v.decoded->size() != v.ground_truth.size())
        throw InputError("decoded labels of " + v.id + " have " + std::to_string(v.decoded->size()) +
                         " frames, ground truth has " + std::to_string(v.ground_truth.size()));
      v.decoded->validate(vocabulary_.size());
    }
  }
}

const Video& Corpus::video(const std::string& id) const {
  auto it = std::lower_bound(videos_.begin(), videos_.end(), id,
                             [](const Video& v, const std::string& key) { return v.id < key; });
  if (it == videos_.end() || it->id != id) throw InputError("unknown video id: " + id);
  return *it;
}

bool Corpus::contains(const std::string& id) const {
  auto it = std::lower_bound(videos_.begin(), videos_.end(), id,
                             [](const Video& v, const std::string& key) { return v.id < key; });
  return it != videos_.end() && it->id == id;
}

LabelVocabulary load_vocabulary(const fs::path& vocab_file) {
  if (!fs::exists(vocab_file)) throw InputError("vocabulary file not found: " + vocab_file.string());
  auto lines = read_lines(vocab_file);
  // Accept the "<index> <name>" mapping format some datasets ship with.
  bool indexed = !lines.empty();
  for (std::size_t i = 0; i < lines.size() && indexed; ++i) {
    std::istringstream ss(lines[i]);
    std::size_t idx;
    std::string name, rest;
    indexed = static_cast<bool>(ss >> idx >> name) && !(ss >> rest) && idx == i;
  }
  if (indexed)
    for (auto& l : lines) l = trim(l.substr(l.find_first_of(" \t")));
  return LabelVocabulary(std::move(lines));
}

void write_vocabulary(const fs::path& vocab_file, const LabelVocabulary& vocabulary) {
  write_lines(vocab_file, vocabulary.names());
}

FrameTimeline read_label_file(const fs::path& file, const LabelVocabulary& vocabulary) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw InputError("cannot open " + file.string());
  std::vector<Label> frames;
  std::string line;
  std::size_t line_no = 0;
  std::size_t first_blank = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string name = trim(line);
    if (name.empty()) {
      if (first_blank == 0) first_blank = line_no;
      continue;
    }
    if (first_blank != 0)
      throw InputError(file.string() + ":" + std::to_string(first_blank) + ": blank line inside label file");
    auto label = vocabulary.find(name);
    if (!label) throw InputError(file.string() + ":" + std::to_string(line_no) + ": unknown label '" + name + "'");
    frames.push_back(*label);
  }
  if (frames.empty()) throw InputError("empty label file: " + file.string());
  return FrameTimeline(std::move(frames));
}

void write_label_file(const fs::path& file, const FrameTimeline& timeline, const LabelVocabulary& vocabulary) {
  std::vector<std::string> lines;
  lines.reserve(timeline.size());
  for (Label l : timeline.frames()) lines.push_back(vocabulary.name(l));
  write_lines(file, lines);
}

Corpus load_corpus(const fs::path& label_dir, const fs::path& vocab_file, const std::optional<fs::path>& decoded_dir) {
  auto vocabulary = load_vocabulary(vocab_file);
  const auto files = regular_files(label_dir);
  if (files.empty()) throw InputError("no label files in " + label_dir.string());
  std::vector<Video> videos;
  videos.reserve(files.size());
  for (const auto& file : files) {
    Video v{file.stem().string(), read_label_file(file, vocabulary), std::nullopt};
    if (decoded_dir) {
      const fs::path decoded_file = *decoded_dir / file.filename();
      if (fs::exists(decoded_file)) {
        v.decoded = read_label_file(decoded_file, vocabulary);
        if (v.decoded->size() != v.ground_truth.size())
          throw InputError(decoded_file.string() + " has " + std::to_string(v.decoded->size()) +
                           " frames but " + file.string() + " has " + std::to_string(v.ground_truth.size()));
      }
    }
    videos.push_back(std::move(v));
  }
  return Corpus(std::move(vocabulary), std::move(videos));
}

void save_corpus(const Corpus& corpus, const fs::path& dir) {
  write_vocabulary(dir / "vocab.txt", corpus.vocabulary());
  for (const auto& v : corpus.videos()) {
    write_label_file(dir / "labels" / (v.id + ".txt"), v.ground_truth, corpus.vocabulary());
    if (v.decoded) write_label_file(dir / "decoded" / (v.id + ".txt"), *v.decoded, corpus.vocabulary());
  }
}

SplitSpec make_split(const Corpus& corpus, const std::vector<std::string>& test_ids) {
  std::set<std::string> test;
  for (const auto& id : test_ids) {
    if (!corpus.contains(id)) throw InputError("split references unknown video id: " + id);
    if (!test.insert(id).second) throw InputError("split lists video id twice: " + id);
  }
  SplitSpec split;
  for (const auto& v : corpus.videos()) {
    if (test.count(v.id))
      split.test_ids.push_back(v.id);
    else
      split.train_ids.push_back(v.id);
  }
  if (split.test_ids.empty()) throw InputError("split has no test videos");
  if (split.train_ids.empty()) throw InputError("split leaves no training videos");
  return split;
}

SplitSpec load_split(const fs::path& split_file, const Corpus& corpus) {
  if (!fs::exists(split_file)) throw InputError("split file not found: " + split_file.string());
  auto lines = read_lines(split_file);
  for (auto& l : lines) {
    // Allow "P03_cam01_P03_cereals.txt" style entries.
    fs::path p(l);
    if (!corpus.contains(l) && corpus.contains(p.stem().string())) l = p.stem().string();
  }
  return make_split(corpus, lines);
}

void SyntheticGrammarSpec::validate() const {
  const std::size_t C = vocabulary.size();
  if (sequences.empty()) throw InputError("synthetic spec has no sequences");
  if (lengths.size() != C) throw InputError("synthetic spec needs one length range per class");
  bool any_positive = false;
  for (const auto& seq : sequences) {
    if (seq.labels.empty()) throw InputError("synthetic spec contains an empty sequence");
    if (seq.weight < 0.0) throw InputError("synthetic sequence weights must be non-negative");
    any_positive |= seq.weight > 0.0;
    for (std::size_t i = 0; i < seq.labels.size(); ++i) {
      if (seq.labels[i] >= C) throw InputError("synthetic sequence label out of range");
      if (i > 0 && seq.labels[i] == seq.labels[i - 1])
        throw InputError("synthetic sequence repeats a label on adjacent positions");
    }
  }
  if (!any_positive) throw InputError("synthetic spec needs at least one positive weight");
  for (const auto& r : lengths)
    if (r.min < 1 || r.min > r.max) throw InputError("synthetic length range needs 1 <= min <= max");
  if (video_count == 0) throw InputError("synthetic spec must generate at least one video");
  if (transition_noise < 0.0 || transition_noise > 1.0 || decoded_noise < 0.0 || decoded_noise > 1.0)
    throw InputError("synthetic noise rates must lie in [0, 1]");
  if ((transition_noise > 0.0 || decoded_noise > 0.0) && C < 2)
    throw InputError("label noise needs at least two classes");
}

namespace {

Label random_other_label(Rng& rng, std::size_t num_classes, Label avoid) {
  const auto pick = static_cast<Label>(rng.uniform_index(num_classes - 1));
  return pick >= avoid ? pick + 1 : pick;
}

}  // namespace

Corpus generate_synthetic(const SyntheticGrammarSpec& spec) {
  spec.validate();
  const std::size_t C = spec.vocabulary.size();
  std::vector<double> weights;
  for (const auto& s : spec.sequences) weights.push_back(s.weight);

  Rng rng(spec.seed);
  std::vector<Video> videos;
  const std::size_t width = std::to_string(spec.video_count - 1).size();
  for (std::size_t v = 0; v < spec.video_count; ++v) {
    const auto& seq = spec.sequences[rng.weighted_index(weights)];
    std::vector<Label> labels = seq.labels;
    if (spec.transition_noise > 0.0) {
      for (std::size_t i = 1; i < labels.size(); ++i)
        if (rng.uniform_real() < spec.transition_noise) labels[i] = random_other_label(rng, C, labels[i - 1]);
    }
    std::vector<Segment> segments;
    for (Label l : labels) {
      const auto& r = spec.lengths[l];
      segments.push_back({l, static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(r.min),
                                                                       static_cast<std::int64_t>(r.max)))});
    }
    FrameTimeline gt = frames_from_segments(SegmentSequence::merged(segments));

    std::optional<FrameTimeline> decoded;
    if (spec.decoded_noise > 0.0) {
      std::vector<Segment> noisy = segments_from_frames(gt).segments();
      for (auto& s : noisy)
        if (rng.uniform_real() < spec.decoded_noise) s.label = random_other_label(rng, C, s.label);
      decoded = frames_from_segments(SegmentSequence::merged(noisy));
    }

    std::string id = std::to_string(v);
    id = "video_" + std::string(width - id.size(), '0') + id;
    videos.push_back({std::move(id), std::move(gt), std::move(decoded)});
  }
  return Corpus(spec.vocabulary, std::move(videos));
}

SyntheticGrammarSpec parse_synthetic_spec(const std::string& json_text) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw InputError(std::string("synthetic spec is not valid JSON: ") + e.what());
  }
  try {
    LabelVocabulary vocab(j.at("classes").get<std::vector<std::string>>());
    auto label_of = [&vocab](const std::string& name) {
      auto l = vocab.find(name);
      if (!l) throw InputError("synthetic spec references unknown class '" + name + "'");
      return *l;
    };
    SyntheticGrammarSpec spec{vocab, {}, {}, 1, 0, 0.0, 0.0};
    for (const auto& s : j.at("sequences")) {
      GrammarSequence seq;
      for (const auto& name : s.at("labels")) seq.labels.push_back(label_of(name.get<std::string>()));
      seq.weight = s.value("weight", 1.0);
      spec.sequences.push_back(std::move(seq));
    }
    LengthRange fallback{1, 1};
    const bool has_default = j.contains("default_length");
    if (has_default) {
      auto d = j.at("default_length").get<std::vector<std::size_t>>();
      if (d.size() != 2) throw InputError("default_length must be [min, max]");
      fallback = {d[0], d[1]};
    }
    spec.lengths.assign(vocab.size(), fallback);
    std::vector<bool> seen(vocab.size(), has_default);
    if (j.contains("lengths")) {
      for (const auto& [name, range] : j.at("lengths").items()) {
        auto r = range.get<std::vector<std::size_t>>();
        if (r.size() != 2) throw InputError("length range for '" + name + "' must be [min, max]");
        spec.lengths[label_of(name)] = {r[0], r[1]};
        seen[label_of(name)] = true;
      }
    }
    for (std::size_t c = 0; c < vocab.size(); ++c)
      if (!seen[c]) throw InputError("no length range for class '" + vocab.name(static_cast<Label>(c)) + "'");
    spec.video_count = j.value("videos", std::size_t{1});
    spec.seed = j.value("seed", std::uint64_t{0});
    spec.transition_noise = j.value("transition_noise", 0.0);
    spec.decoded_noise = j.value("decoded_noise", 0.0);
    spec.validate();
    return spec;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed synthetic spec: ") + e.what());
  }
}

SyntheticGrammarSpec load_synthetic_spec(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw InputError("cannot open synthetic spec " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_synthetic_spec(ss.str());
}

std::vector<FrameTimeline> timelines_of(const Corpus& corpus, const std::vector<std::string>& ids) {
  std::vector<FrameTimeline> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(corpus.video(id).ground_truth);
  return out;
}

}  // namespace anticipate
