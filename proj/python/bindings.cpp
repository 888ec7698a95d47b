// SPDX-License-Identifier: Apache-2.0
//
// Python bindings. Timelines cross the boundary as lists of integer labels and
// segment sequences as lists of (label, length) tuples.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "anticipate/checkpoint.hpp"
#include "anticipate/data_io.hpp"
#include "anticipate/errors.hpp"
#include "anticipate/evaluation.hpp"
#include "anticipate/gradcheck_suite.hpp"
#include "anticipate/predictors.hpp"

namespace py = pybind11;
using namespace anticipate;

namespace {

using PySegments = std::vector<std::pair<Label, std::size_t>>;

SegmentSequence to_segments(const PySegments& segs) {
  std::vector<Segment> out;
  for (const auto& [label, length] : segs) out.push_back({label, length});
  return SegmentSequence(std::move(out));
}

PySegments from_segments(const SegmentSequence& seq) {
  PySegments out;
  for (const auto& s : seq.segments()) out.emplace_back(s.label, s.length);
  return out;
}

std::vector<FrameTimeline> to_timelines(const std::vector<std::vector<Label>>& frames) {
  std::vector<FrameTimeline> out;
  for (const auto& f : frames) out.emplace_back(f);
  return out;
}

std::vector<Label> predict_frames(const Predictor& p, const std::vector<Label>& observed, std::size_t video_length,
                                  std::size_t horizon, std::uint64_t seed) {
  py::gil_scoped_release release;
  return p.predict(FrameTimeline(observed), video_length, horizon, seed).vector();
}

std::shared_ptr<Predictor> load_model(const std::filesystem::path& path, bool smooth) {
  const Checkpoint ckpt = read_checkpoint(path);
  if (ckpt.architecture == kRnnArchitecture) return std::make_shared<RnnPredictor>(RnnModel::from_checkpoint(ckpt));
  if (ckpt.architecture == kCnnArchitecture)
    return std::make_shared<CnnPredictor>(CnnModel::from_checkpoint(ckpt), CnnPredictOptions{smooth});
  throw ConsistencyError("unknown architecture '" + ckpt.architecture + "' in " + path.string());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Action anticipation models, baselines and metrics.";

  auto input_error = py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<ConsistencyError>(m, "ConsistencyError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<RecursionLimitError>(m, "RecursionLimitError", PyExc_ArithmeticError);
  (void)input_error;

  // ---- timelines
  m.def(
      "segments_from_frames",
      [](const std::vector<Label>& frames) { return from_segments(segments_from_frames(FrameTimeline(frames))); },
      py::arg("frames"), "Run-length encode a frame label list into (label, length) pairs.");
  m.def(
      "frames_from_segments",
      [](const PySegments& segs) { return frames_from_segments(to_segments(segs)).vector(); }, py::arg("segments"));
  m.def("fraction_of", &fraction_of, py::arg("fraction"), py::arg("total"), "floor(fraction * total).");
  m.def(
      "split_observation",
      [](const std::vector<Label>& frames, double alpha) {
        auto s = split_observation(FrameTimeline(frames), alpha);
        return std::make_pair(s.observed.vector(), s.future.vector());
      },
      py::arg("frames"), py::arg("alpha"));

  // ---- metrics
  m.def(
      "moc",
      [](const std::vector<Label>& pred, const std::vector<Label>& gt) {
        return moc_accuracy(FrameTimeline(pred), FrameTimeline(gt)).moc;
      },
      py::arg("prediction"), py::arg("ground_truth"), "Mean over classes of frame accuracy.");
  m.def(
      "action_level_accuracy",
      [](const std::vector<Label>& pred, const std::vector<Label>& gt, std::size_t positions, double threshold) {
        return action_level_accuracy(FrameTimeline(pred), FrameTimeline(gt), positions, threshold);
      },
      py::arg("prediction"), py::arg("ground_truth"), py::arg("positions") = 3, py::arg("iou_threshold") = 0.5);
  m.def("interval_iou", &interval_iou, py::arg("a_begin"), py::arg("a_end"), py::arg("b_begin"), py::arg("b_end"));

  // ---- CNN matrix encoding
  m.def(
      "encode_matrix",
      [](const PySegments& segs, std::size_t rows, std::size_t num_classes) {
        const Tensor t = encode_matrix(to_segments(segs), rows, num_classes);
        std::vector<std::vector<double>> out(rows, std::vector<double>(num_classes));
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < num_classes; ++c) out[r][c] = t.at(r, c);
        return out;
      },
      py::arg("segments"), py::arg("rows"), py::arg("num_classes"));

  // ---- corpus
  py::class_<Corpus>(m, "Corpus")
      .def_property_readonly("classes", [](const Corpus& c) { return c.vocabulary().names(); })
      .def_property_readonly("vocabulary_hash", [](const Corpus& c) { return c.vocabulary().hash(); })
      .def_property_readonly("video_ids",
                             [](const Corpus& c) {
                               std::vector<std::string> ids;
                               for (const auto& v : c.videos()) ids.push_back(v.id);
                               return ids;
                             })
      .def("ground_truth", [](const Corpus& c, const std::string& id) { return c.video(id).ground_truth.vector(); })
      .def("decoded",
           [](const Corpus& c, const std::string& id) -> std::optional<std::vector<Label>> {
             const auto& d = c.video(id).decoded;
             if (!d) return std::nullopt;
             return d->vector();
           })
      .def("save", [](const Corpus& c, const std::filesystem::path& dir) { save_corpus(c, dir); })
      .def("__len__", [](const Corpus& c) { return c.videos().size(); });

  m.def(
      "load_corpus",
      [](const std::filesystem::path& labels, const std::filesystem::path& vocab,
         std::optional<std::filesystem::path> decoded) { return load_corpus(labels, vocab, decoded); },
      py::arg("label_dir"), py::arg("vocab_file"), py::arg("decoded_dir") = py::none());
  m.def(
      "generate_synthetic", [](const std::string& json) { return generate_synthetic(parse_synthetic_spec(json)); },
      py::arg("spec_json"), "Build a corpus from a JSON grammar spec.");
  m.def(
      "load_split",
      [](const std::filesystem::path& file, const Corpus& corpus) {
        auto s = load_split(file, corpus);
        return std::make_pair(s.train_ids, s.test_ids);
      },
      py::arg("split_file"), py::arg("corpus"), "Returns (train_ids, test_ids).");

  // ---- predictors
  py::class_<Predictor, std::shared_ptr<Predictor>>(m, "Predictor")
      .def_property_readonly("name", &Predictor::name)
      .def("predict", &predict_frames, py::arg("observed"), py::arg("video_length"), py::arg("horizon_frames"),
           py::arg("seed") = 0, "Labels of the horizon_frames frames after the observation.");

  py::class_<RnnPredictor, Predictor, std::shared_ptr<RnnPredictor>>(m, "RnnPredictor")
      .def_property_readonly("parameter_count", [](const RnnPredictor& p) { return p.model().parameter_count(); })
      .def_property_readonly("scale", [](const RnnPredictor& p) { return p.model().scale(); })
      .def_property_readonly("recursion_limit_hits", &RnnPredictor::recursion_limit_hits)
      .def("save", [](const RnnPredictor& p, const std::filesystem::path& f) {
        write_checkpoint(f, p.model().to_checkpoint());
      });
  py::class_<CnnPredictor, Predictor, std::shared_ptr<CnnPredictor>>(m, "CnnPredictor")
      .def_property_readonly("parameter_count", [](const CnnPredictor& p) { return p.model().parameter_count(); })
      .def("save", [](const CnnPredictor& p, const std::filesystem::path& f) {
        write_checkpoint(f, p.model().to_checkpoint());
      });
  py::class_<GrammarPredictor, Predictor, std::shared_ptr<GrammarPredictor>>(m, "GrammarBaseline")
      .def(py::init([](const std::vector<std::vector<Label>>& training, std::size_t num_classes) {
             std::vector<SegmentSequence> seqs;
             for (const auto& f : training) seqs.push_back(segments_from_frames(FrameTimeline(f)));
             return std::make_shared<GrammarPredictor>(build_grammar(seqs, num_classes));
           }),
           py::arg("training"), py::arg("num_classes"));
  py::class_<NearestNeighborPredictor, Predictor, std::shared_ptr<NearestNeighborPredictor>>(m,
                                                                                            "NearestNeighborBaseline")
      .def(py::init([](const std::vector<std::vector<Label>>& training) {
             return std::make_shared<NearestNeighborPredictor>(to_timelines(training));
           }),
           py::arg("training"));

  m.def(
      "train_rnn",
      [](const std::vector<std::vector<Label>>& training, std::size_t num_classes, std::size_t hidden,
         std::size_t input_width, std::size_t epochs, double learning_rate, double scale, std::uint64_t seed,
         std::uint64_t vocab_hash) {
        RnnConfig cfg;
        cfg.hidden = hidden;
        cfg.input_width = input_width;
        cfg.epochs = epochs;
        cfg.learning_rate = learning_rate;
        cfg.scale = scale;
        cfg.seed = seed;
        std::vector<SegmentSequence> seqs;
        for (const auto& f : training) seqs.push_back(segments_from_frames(FrameTimeline(f)));
        py::gil_scoped_release release;
        auto r = train_rnn(seqs, num_classes, cfg, vocab_hash);
        return std::make_pair(std::make_shared<RnnPredictor>(std::move(r.model)), r.loss_curve);
      },
      py::arg("training"), py::arg("num_classes"), py::arg("hidden") = 256, py::arg("input_width") = 0,
      py::arg("epochs") = 20, py::arg("learning_rate") = 0.001, py::arg("scale") = 0.0, py::arg("seed") = 0,
      py::arg("vocabulary_hash") = 0, "Returns (predictor, per-epoch loss).");

  m.def(
      "train_cnn",
      [](const std::vector<std::vector<Label>>& training, std::size_t num_classes, std::size_t rows,
         std::size_t hidden, double sigma, const std::string& loss, std::size_t epochs, std::size_t batch_size,
         double learning_rate, std::uint64_t seed, bool smooth, std::uint64_t vocab_hash) {
        CnnConfig cfg;
        cfg.rows = rows;
        cfg.num_classes = num_classes;
        cfg.hidden = hidden;
        cfg.sigma = sigma;
        cfg.loss = cnn_loss_from_string(loss);
        cfg.epochs = epochs;
        cfg.batch_size = batch_size;
        cfg.learning_rate = learning_rate;
        cfg.seed = seed;
        const auto timelines = to_timelines(training);
        py::gil_scoped_release release;
        auto r = train_cnn(timelines, cfg, vocab_hash);
        return std::make_pair(std::make_shared<CnnPredictor>(std::move(r.model), CnnPredictOptions{smooth}),
                              r.loss_curve);
      },
      py::arg("training"), py::arg("num_classes"), py::arg("rows") = 128, py::arg("hidden") = 0,
      py::arg("sigma") = 3.0, py::arg("loss") = "squared", py::arg("epochs") = 30, py::arg("batch_size") = 32,
      py::arg("learning_rate") = 0.001, py::arg("seed") = 0, py::arg("smooth") = true,
      py::arg("vocabulary_hash") = 0, "Returns (predictor, per-epoch loss).");

  m.def("load_model", &load_model, py::arg("checkpoint"), py::arg("smooth") = true,
        "Load an rnn or cnn checkpoint as a predictor.");

  // ---- evaluation
  m.def(
      "evaluate",
      [](const Predictor& p, const Corpus& corpus, const std::vector<std::string>& train_ids,
         const std::vector<std::string>& test_ids, const std::vector<double>& alphas, const std::vector<double>& betas,
         const std::string& observed, std::uint64_t seed) {
        const SplitSpec split{train_ids, test_ids};
        EvaluationReport report;
        {
          py::gil_scoped_release release;
          report = evaluate_grid(p, corpus, split, alphas, betas, {observed_source_from_string(observed), seed});
        }
        py::dict out;
        for (const auto& c : report.cells) {
          py::dict cell;
          cell["moc"] = c.moc;
          cell["mean_video_moc"] = c.mean_video_moc;
          cell["mean_predicted_segments"] = c.mean_predicted_segments;
          cell["action_accuracy"] = std::vector<double>(c.action_accuracy.begin(), c.action_accuracy.end());
          out[py::make_tuple(c.alpha, c.beta)] = cell;
        }
        return out;
      },
      py::arg("predictor"), py::arg("corpus"), py::arg("train_ids"), py::arg("test_ids"),
      py::arg("alphas") = std::vector<double>{0.2, 0.3}, py::arg("betas") = std::vector<double>{0.1, 0.2, 0.3, 0.5},
      py::arg("observed") = "gt", py::arg("seed") = 0,
      "MoC and action-level accuracy per (alpha, beta) cell over the test videos.");

  // ---- gradient checks
  m.def(
      "toy_gradcheck",
      [](const std::string& model, std::uint64_t seed) {
        ToyGradCheckOptions o;
        o.seed = seed;
        GradCheckReport r;
        if (model == "rnn")
          r = rnn_toy_gradcheck(o);
        else
          r = cnn_toy_gradcheck(cnn_loss_from_string(model == "cnn" ? "squared" : model), o);
        std::vector<std::pair<std::string, double>> blocks;
        for (const auto& b : r.blocks) blocks.emplace_back(b.name, b.max_rel_error);
        return blocks;
      },
      py::arg("model"), py::arg("seed") = 0,
      "Max relative error per parameter block; model is rnn, squared or xent.");
}
