// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "anticipate/data_io.hpp"
#include "anticipate/predictors.hpp"
#include "anticipate/timeline.hpp"

namespace anticipate {

/// Correct and total frame counts per ground-truth class.
struct ClassCounts {
  std::vector<std::size_t> correct;
  std::vector<std::size_t> total;

  explicit ClassCounts(std::size_t num_classes = 0) : correct(num_classes, 0), total(num_classes, 0) {}

  void add(const FrameTimeline& prediction, const FrameTimeline& ground_truth);
  void merge(const ClassCounts& other);
  /// Mean of per-class accuracies over classes that occur in the ground truth; nullopt if none do.
  std::optional<double> moc() const;
  std::map<Label, double> per_class() const;
};

struct MocResult {
  double moc = 0.0;
  std::map<Label, double> per_class;
};

/// Mean-over-classes frame accuracy of one prediction.
MocResult moc_accuracy(const FrameTimeline& prediction, const FrameTimeline& ground_truth);

/// Intersection over union of the half-open frame intervals [a0, a1) and [b0, b1).
double interval_iou(std::size_t a0, std::size_t a1, std::size_t b0, std::size_t b1);

/// Hit flag for each of the first `positions` ground-truth segments: the k-th
/// predicted segment must exist, share its label and overlap it with IoU >= threshold.
std::vector<bool> action_level_accuracy(const FrameTimeline& prediction, const FrameTimeline& ground_truth,
                                        std::size_t positions = 3, double iou_threshold = 0.5);

enum class ObservedSource { GroundTruth, Decoded };

std::string to_string(ObservedSource source);
ObservedSource observed_source_from_string(const std::string& name);

inline constexpr std::size_t kActionPositions = 3;

/// Result of one (video, alpha, beta) prediction.
struct VideoResult {
  std::string video_id;
  double alpha = 0.0;
  double beta = 0.0;
  std::size_t video_length = 0;
  std::size_t observed_frames = 0;
  std::size_t horizon_frames = 0;
  double moc = 0.0;
  std::size_t predicted_segments = 0;
  std::array<bool, kActionPositions> action_hits{};
  /// Whether the ground-truth future has a segment at each position.
  std::array<bool, kActionPositions> action_present{};
  ClassCounts counts;
};

struct GridCell {
  double alpha = 0.0;
  double beta = 0.0;
  /// Corpus-level MoC from pooled per-class counts.
  double moc = 0.0;
  /// Mean of per-video MoC values.
  double mean_video_moc = 0.0;
  double mean_predicted_segments = 0.0;
  std::array<double, kActionPositions> action_accuracy{};
  ClassCounts counts;
};

struct EvaluationReport {
  std::string model;
  std::vector<double> alphas;
  std::vector<double> betas;
  /// alpha-major: cells[i * betas.size() + j].
  std::vector<GridCell> cells;
  /// Sorted by video id, then alpha, then beta.
  std::vector<VideoResult> videos;
  std::size_t video_count = 0;
  std::map<std::string, std::string> config;

  const GridCell& cell(double alpha, double beta) const;
  /// Per-class accuracies pooled over all cells.
  std::map<Label, double> per_class() const;
};

struct EvaluationOptions {
  ObservedSource observed_source = ObservedSource::GroundTruth;
  std::uint64_t seed = 0;
};

/// Observes floor(alpha*T) frames of each test video from the chosen source, predicts
/// floor(beta*T) frames and scores them against the ground-truth future.
EvaluationReport evaluate_grid(const Predictor& predictor, const Corpus& corpus, const SplitSpec& split,
                               const std::vector<double>& alphas, const std::vector<double>& betas,
                               const EvaluationOptions& options = {});

struct LengthBucket {
  std::size_t lower = 0;
  std::size_t upper = 0;
  std::size_t videos = 0;
  /// Absent when no video falls into the bucket.
  std::optional<double> moc;
};

/// Groups results by horizon length into (edges[i], edges[i+1]] and pools MoC per group,
/// so a horizon equal to an edge falls into the lower bucket.
std::vector<LengthBucket> length_bucketed_moc(const std::vector<VideoResult>& results,
                                              const std::vector<std::size_t>& edges);

}  // namespace anticipate
