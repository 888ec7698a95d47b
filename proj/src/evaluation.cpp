// SPDX-License-Identifier: Apache-2.0
#include "anticipate/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "anticipate/errors.hpp"
#include "anticipate/random.hpp"

namespace anticipate {

void ClassCounts::add(const FrameTimeline& prediction, const FrameTimeline& ground_truth) {
  if (prediction.size() != ground_truth.size())
    throw std::invalid_argument("prediction has " + std::to_string(prediction.size()) + " frames, ground truth " +
                                std::to_string(ground_truth.size()));
  for (std::size_t i = 0; i < ground_truth.size(); ++i) {
    const Label g = ground_truth[i];
    if (g >= total.size()) {
      total.resize(g + 1, 0);
      correct.resize(g + 1, 0);
    }
    ++total[g];
    correct[g] += prediction[i] == g;
  }
}

void ClassCounts::merge(const ClassCounts& other) {
  if (other.total.size() > total.size()) {
    total.resize(other.total.size(), 0);
    correct.resize(other.total.size(), 0);
  }
  for (std::size_t c = 0; c < other.total.size(); ++c) {
    total[c] += other.total[c];
    correct[c] += other.correct[c];
  }
}

std::optional<double> ClassCounts::moc() const {
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < total.size(); ++c) {
    if (total[c] == 0) continue;
    sum += static_cast<double>(correct[c]) / static_cast<double>(total[c]);
    ++present;
  }
  if (present == 0) return std::nullopt;
  return sum / static_cast<double>(present);
}

std::map<Label, double> ClassCounts::per_class() const {
  std::map<Label, double> out;
  for (std::size_t c = 0; c < total.size(); ++c)
    if (total[c] > 0) out[static_cast<Label>(c)] = static_cast<double>(correct[c]) / static_cast<double>(total[c]);
  return out;
}

MocResult moc_accuracy(const FrameTimeline& prediction, const FrameTimeline& ground_truth) {
  ClassCounts counts;
  counts.add(prediction, ground_truth);
  return {*counts.moc(), counts.per_class()};
}

double interval_iou(std::size_t a0, std::size_t a1, std::size_t b0, std::size_t b1) {
  const std::size_t lo = std::max(a0, b0), hi = std::min(a1, b1);
  const std::size_t inter = hi > lo ? hi - lo : 0;
  const std::size_t uni = (a1 - a0) + (b1 - b0) - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<bool> action_level_accuracy(const FrameTimeline& prediction, const FrameTimeline& ground_truth,
                                        std::size_t positions, double iou_threshold) {
  if (prediction.size() != ground_truth.size())
    throw std::invalid_argument("action_level_accuracy: length mismatch");
  const auto pred = segments_from_frames(prediction);
  const auto gt = segments_from_frames(ground_truth);
  std::vector<bool> hits(positions, false);
  std::size_t p0 = 0, g0 = 0;
  for (std::size_t k = 0; k < positions; ++k) {
    if (k >= gt.size()) break;
    const std::size_t g1 = g0 + gt[k].length;
    if (k < pred.size()) {
      const std::size_t p1 = p0 + pred[k].length;
      hits[k] = pred[k].label == gt[k].label && interval_iou(p0, p1, g0, g1) >= iou_threshold;
      p0 = p1;
    }
    g0 = g1;
  }
  return hits;
}

std::string to_string(ObservedSource source) { return source == ObservedSource::GroundTruth ? "gt" : "decoded"; }

ObservedSource observed_source_from_string(const std::string& name) {
  if (name == "gt" || name == "ground-truth") return ObservedSource::GroundTruth;
  if (name == "decoded") return ObservedSource::Decoded;
  throw InputError("unknown observed source '" + name + "' (expected gt or decoded)");
}

const GridCell& EvaluationReport::cell(double alpha, double beta) const {
  for (const auto& c : cells)
    if (std::abs(c.alpha - alpha) < 1e-12 && std::abs(c.beta - beta) < 1e-12) return c;
  throw std::out_of_range("no grid cell for the requested fractions");
}

std::map<Label, double> EvaluationReport::per_class() const {
  ClassCounts pooled;
  for (const auto& c : cells) pooled.merge(c.counts);
  return pooled.per_class();
}

namespace {

std::uint64_t id_hash(const std::string& id) {
  std::uint64_t h = 14695981039346656037ULL;
  for (char c : id) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

EvaluationReport evaluate_grid(const Predictor& predictor, const Corpus& corpus, const SplitSpec& split,
                               const std::vector<double>& alphas, const std::vector<double>& betas,
                               const EvaluationOptions& options) {
  if (alphas.empty() || betas.empty()) throw InputError("evaluation needs at least one alpha and one beta");
  for (double a : alphas)
    for (double b : betas) ObservationSplit check(a, b);

  EvaluationReport report;
  report.model = predictor.name();
  report.alphas = alphas;
  report.betas = betas;
  std::vector<std::string> ids = split.test_ids;
  std::sort(ids.begin(), ids.end());
  report.video_count = ids.size();
  const std::size_t C = corpus.num_classes();

  for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
    for (std::size_t bi = 0; bi < betas.size(); ++bi) {
      GridCell cell;
      cell.alpha = alphas[ai];
      cell.beta = betas[bi];
      cell.counts = ClassCounts(C);
      std::array<std::size_t, kActionPositions> hits{}, present{};
      double moc_sum = 0.0, seg_sum = 0.0;
      std::size_t n = 0;
      for (const auto& id : ids) {
        const Video& v = corpus.video(id);
        const std::size_t T = v.ground_truth.size();
        const auto parts = split_observation(v.ground_truth, ObservationSplit(alphas[ai], betas[bi]));
        const std::size_t t = parts.observed.size();
        const std::size_t horizon = fraction_of(betas[bi], T);
        const FrameTimeline gt_future = parts.future.slice(0, horizon);

        const FrameTimeline* source = &v.ground_truth;
        if (options.observed_source == ObservedSource::Decoded) {
          if (!v.decoded) throw InputError("video " + id + " has no decoded labels");
          source = &*v.decoded;
        }
        const FrameTimeline observed = source->slice(0, t);
        const std::uint64_t seed = derive_seed(options.seed, id_hash(id), ai, bi);
        const FrameTimeline pred = predictor.predict(observed, T, horizon, seed);
        if (pred.size() != horizon)
          throw ConsistencyError(predictor.name() + " returned " + std::to_string(pred.size()) + " frames, expected " +
                                 std::to_string(horizon));

        VideoResult r;
        r.video_id = id;
        r.alpha = alphas[ai];
        r.beta = betas[bi];
        r.video_length = T;
        r.observed_frames = t;
        r.horizon_frames = horizon;
        r.counts = ClassCounts(C);
        r.counts.add(pred, gt_future);
        r.moc = *r.counts.moc();
        r.predicted_segments = segments_from_frames(pred).size();
        const auto hit = action_level_accuracy(pred, gt_future, kActionPositions);
        const std::size_t gt_segments = segments_from_frames(gt_future).size();
        for (std::size_t k = 0; k < kActionPositions; ++k) {
          r.action_hits[k] = hit[k];
          r.action_present[k] = k < gt_segments;
          present[k] += r.action_present[k];
          hits[k] += hit[k];
        }
        cell.counts.merge(r.counts);
        moc_sum += r.moc;
        seg_sum += static_cast<double>(r.predicted_segments);
        ++n;
        report.videos.push_back(std::move(r));
      }
      cell.moc = cell.counts.moc().value_or(0.0);
      cell.mean_video_moc = n ? moc_sum / static_cast<double>(n) : 0.0;
      cell.mean_predicted_segments = n ? seg_sum / static_cast<double>(n) : 0.0;
      for (std::size_t k = 0; k < kActionPositions; ++k)
        cell.action_accuracy[k] = present[k] ? static_cast<double>(hits[k]) / static_cast<double>(present[k]) : 0.0;
      report.cells.push_back(std::move(cell));
    }
  }
  std::stable_sort(report.videos.begin(), report.videos.end(),
                   [](const VideoResult& a, const VideoResult& b) { return a.video_id < b.video_id; });
  report.config = {{"model", report.model},
                   {"observed", to_string(options.observed_source)},
                   {"seed", std::to_string(options.seed)}};
  return report;
}

std::vector<LengthBucket> length_bucketed_moc(const std::vector<VideoResult>& results,
                                              const std::vector<std::size_t>& edges) {
  if (edges.size() < 2) throw InputError("length buckets need at least two edges");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (edges[i] <= edges[i - 1]) throw InputError("length bucket edges must be strictly increasing");
  std::vector<LengthBucket> buckets;
  std::vector<ClassCounts> counts;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    buckets.push_back({edges[i], edges[i + 1], 0, std::nullopt});
    counts.emplace_back();
  }
  for (const auto& r : results) {
    for (std::size_t i = 0; i < buckets.size(); ++i) {
      if (r.horizon_frames > buckets[i].lower && r.horizon_frames <= buckets[i].upper) {
        ++buckets[i].videos;
        counts[i].merge(r.counts);
        break;
      }
    }
  }
  for (std::size_t i = 0; i < buckets.size(); ++i)
    if (buckets[i].videos > 0) buckets[i].moc = counts[i].moc();
  return buckets;
}

}  // namespace anticipate
