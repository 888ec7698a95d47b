// SPDX-License-Identifier: Apache-2.0
#include "anticipate/predictors.hpp"

namespace anticipate {

FrameTimeline RnnPredictor::predict(const FrameTimeline& observed, std::size_t video_length,
                                    std::size_t horizon_frames, std::uint64_t) const {
  try {
    return frames_from_segments(
        rnn_predict_future(model_, segments_from_frames(observed), video_length, horizon_frames));
  } catch (const RecursionLimitError& e) {
    ++limit_hits_;
    std::vector<Label> frames;
    for (const auto& s : e.partial()) frames.insert(frames.end(), s.length, s.label);
    const Label fill = frames.empty() ? observed[observed.size() - 1] : frames.back();
    frames.resize(horizon_frames, fill);
    return FrameTimeline(std::move(frames));
  }
}

FrameTimeline CnnPredictor::predict(const FrameTimeline& observed, std::size_t video_length,
                                    std::size_t horizon_frames, std::uint64_t) const {
  return cnn_predict_future(model_, segments_from_frames(observed), horizon_frames, fraction_of(0.5, video_length),
                            options_);
}

FrameTimeline GrammarPredictor::predict(const FrameTimeline& observed, std::size_t, std::size_t horizon_frames,
                                        std::uint64_t seed) const {
  Rng rng(seed);
  return grammar_predict(grammar_, segments_from_frames(observed), horizon_frames, rng);
}

FrameTimeline NearestNeighborPredictor::predict(const FrameTimeline& observed, std::size_t video_length,
                                                std::size_t horizon_frames, std::uint64_t) const {
  return nn_predict(training_, observed, video_length, horizon_frames);
}

}  // namespace anticipate
