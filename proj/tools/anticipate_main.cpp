// SPDX-License-Identifier: Apache-2.0
//
// anticipate: train, predict, evaluate and gradient-check the anticipation models.
//
// Exit codes: 0 success, 2 input error, 3 consistency error, 4 numerical failure.

#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "anticipate/checkpoint.hpp"
#include "anticipate/data_io.hpp"
#include "anticipate/errors.hpp"
#include "anticipate/evaluation.hpp"
#include "anticipate/gradcheck_suite.hpp"
#include "anticipate/predictors.hpp"
#include "anticipate/report.hpp"

namespace fs = std::filesystem;
using namespace anticipate;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitConsistency = 3;
constexpr int kExitNumerical = 4;

struct DataOptions {
  std::string data;
  std::string vocab;
  std::string decoded;
  std::string split;
};

void add_data_options(CLI::App* cmd, DataOptions& d) {
  cmd->add_option("--data", d.data, "Corpus directory (labels/ and vocab.txt, or label files directly)");
  cmd->add_option("--vocab", d.vocab, "Class list, one name per line (default <data>/vocab.txt)");
  cmd->add_option("--decoded", d.decoded, "Directory of decoded label files (default <data>/decoded if present)");
  cmd->add_option("--split", d.split, "File listing the test video ids");
}

Corpus load_data(const DataOptions& d) {
  if (d.data.empty()) throw InputError("--data is required");
  const fs::path root(d.data);
  if (!fs::exists(root)) throw InputError("data directory not found: " + root.string());
  const fs::path labels = fs::is_directory(root / "labels") ? root / "labels" : root;
  fs::path vocab = d.vocab;
  if (vocab.empty()) {
    vocab = root / "vocab.txt";
    if (!fs::exists(vocab) && fs::exists(root / "mapping.txt")) vocab = root / "mapping.txt";
  }
  std::optional<fs::path> decoded;
  if (!d.decoded.empty())
    decoded = fs::path(d.decoded);
  else if (fs::is_directory(root / "decoded"))
    decoded = root / "decoded";
  return load_corpus(labels, vocab, decoded);
}

/// With no split file every video is training data and nothing is held out.
SplitSpec load_split_or_all(const DataOptions& d, const Corpus& corpus) {
  if (!d.split.empty()) return load_split(d.split, corpus);
  SplitSpec all;
  for (const auto& v : corpus.videos()) all.train_ids.push_back(v.id);
  return all;
}

std::vector<FrameTimeline> training_timelines(const Corpus& corpus, const SplitSpec& split) {
  if (split.train_ids.empty()) throw InputError("no training videos");
  return timelines_of(corpus, split.train_ids);
}

std::string join(const std::vector<double>& values) {
  std::string out;
  for (double v : values) out += (out.empty() ? "" : ",") + format_double(v);
  return out;
}

// ---- model construction ------------------------------------------------------

struct ModelOptions {
  // RNN
  std::size_t rnn_hidden = 256;
  std::size_t rnn_input_width = 0;
  std::size_t rnn_epochs = 20;
  double rnn_scale = 0.0;
  // CNN
  std::size_t rows = 128;
  std::size_t cnn_hidden = 0;
  double sigma = 3.0;
  std::string loss = "squared";
  std::size_t cnn_epochs = 30;
  std::size_t batch = 32;
  // shared
  double learning_rate = 0.001;
  bool no_smooth = false;
};

void add_model_options(CLI::App* cmd, ModelOptions& m) {
  cmd->add_option("--hidden", m.rnn_hidden, "RNN: GRU width")->capture_default_str();
  cmd->add_option("--input-width", m.rnn_input_width, "RNN: input projection width (0 = GRU width)");
  cmd->add_option("--scale", m.rnn_scale, "RNN: length scale (0 = mean segments per training video)");
  cmd->add_option("--rows", m.rows, "CNN: matrix rows S")->capture_default_str();
  cmd->add_option("--fc-hidden", m.cnn_hidden, "CNN: dense hidden width (0 = default for S and C)");
  cmd->add_option("--sigma", m.sigma, "CNN: smoothing sigma")->capture_default_str();
  cmd->add_option("--loss", m.loss, "CNN: squared or xent")->check(CLI::IsMember({"squared", "xent"}))
      ->capture_default_str();
  cmd->add_option("--batch", m.batch, "CNN: mini-batch size")->capture_default_str();
  cmd->add_option("--lr", m.learning_rate, "Adam learning rate")->capture_default_str();
}

/// 0 keeps the model's own default epoch count.
std::size_t epochs_flag = 0;

void check_vocabulary(const Checkpoint& ckpt, const Corpus& corpus, const std::string& path) {
  if (ckpt.vocab_hash != corpus.vocabulary().hash()) {
    std::ostringstream msg;
    msg << "checkpoint " << path << " was trained on a different vocabulary (hash " << std::hex << ckpt.vocab_hash
        << ", corpus " << corpus.vocabulary().hash() << ")";
    throw ConsistencyError(msg.str());
  }
}

std::string architecture_of(const std::string& model) {
  if (model == "rnn") return kRnnArchitecture;
  if (model == "cnn") return kCnnArchitecture;
  return {};
}

std::unique_ptr<Predictor> make_predictor(const std::string& model, const std::string& checkpoint_path,
                                          const Corpus& corpus, const SplitSpec& split, const ModelOptions& m) {
  if (model == "grammar") {
    std::vector<SegmentSequence> seqs;
    for (const auto& tl : training_timelines(corpus, split)) seqs.push_back(segments_from_frames(tl));
    return std::make_unique<GrammarPredictor>(build_grammar(seqs, corpus.num_classes()));
  }
  if (model == "nn-baseline") return std::make_unique<NearestNeighborPredictor>(training_timelines(corpus, split));
  if (model != "rnn" && model != "cnn") throw InputError("unknown model '" + model + "'");
  if (checkpoint_path.empty()) throw InputError("model " + model + " needs --checkpoint");
  const Checkpoint ckpt = read_checkpoint(checkpoint_path);
  if (ckpt.architecture != architecture_of(model))
    throw ConsistencyError("checkpoint " + checkpoint_path + " holds a " + ckpt.architecture + " model, not " + model);
  check_vocabulary(ckpt, corpus, checkpoint_path);
  if (model == "rnn") return std::make_unique<RnnPredictor>(RnnModel::from_checkpoint(ckpt));
  CnnModel cnn = CnnModel::from_checkpoint(ckpt);
  std::string name = "cnn";
  if (cnn.config().loss == CnnLoss::CrossEntropy) name += "-xent";
  if (m.no_smooth) name += "-nosmooth";
  return std::make_unique<CnnPredictor>(std::move(cnn), CnnPredictOptions{!m.no_smooth}, name);
}

// ---- commands ------------------------------------------------------------------

struct CommonOptions {
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_synth(const std::string& config, const std::string& out, std::optional<std::uint64_t> seed,
              std::size_t test_count) {
  if (out.empty()) throw InputError("--out is required");
  SyntheticGrammarSpec spec = load_synthetic_spec(config);
  if (seed) spec.seed = *seed;
  const Corpus corpus = generate_synthetic(spec);
  save_corpus(corpus, out);
  if (test_count >= corpus.videos().size()) throw InputError("--test must leave at least one training video");
  std::string split;
  for (std::size_t i = corpus.videos().size() - test_count; i < corpus.videos().size(); ++i)
    split += corpus.videos()[i].id + "\n";
  write_text(fs::path(out) / "split.txt", split);
  std::cout << "wrote " << corpus.videos().size() << " videos (" << test_count << " listed in "
            << (fs::path(out) / "split.txt").string() << ")\n";
  return 0;
}

int cmd_train(const std::string& model, const DataOptions& d, const ModelOptions& m, const CommonOptions& c) {
  const Corpus corpus = load_data(d);
  const SplitSpec split = load_split_or_all(d, corpus);
  const auto training = training_timelines(corpus, split);
  const fs::path out = c.out.empty() ? fs::path(".") : fs::path(c.out);
  ConfigEcho echo{{"command", "train"}, {"model", model}, {"seed", std::to_string(c.seed)},
                  {"split", d.split.empty() ? "all" : fs::path(d.split).filename().string()},
                  {"train_videos", std::to_string(training.size())}};

  Checkpoint ckpt;
  std::vector<double> curve;
  std::size_t params = 0;
  if (model == "rnn") {
    RnnConfig cfg;
    cfg.hidden = m.rnn_hidden;
    cfg.input_width = m.rnn_input_width;
    cfg.learning_rate = m.learning_rate;
    cfg.epochs = epochs_flag ? epochs_flag : m.rnn_epochs;
    cfg.seed = c.seed;
    cfg.scale = m.rnn_scale;
    std::vector<SegmentSequence> seqs;
    for (const auto& tl : training) seqs.push_back(segments_from_frames(tl));
    auto result = train_rnn(seqs, corpus.num_classes(), cfg, corpus.vocabulary().hash());
    ckpt = result.model.to_checkpoint();
    curve = std::move(result.loss_curve);
    params = result.model.parameter_count();
    echo["hidden"] = std::to_string(cfg.hidden);
    echo["epochs"] = std::to_string(cfg.epochs);
    echo["scale"] = format_double(result.model.scale());
  } else if (model == "cnn") {
    CnnConfig cfg;
    cfg.rows = m.rows;
    cfg.num_classes = corpus.num_classes();
    cfg.hidden = m.cnn_hidden;
    cfg.sigma = m.sigma;
    cfg.loss = cnn_loss_from_string(m.loss);
    cfg.learning_rate = m.learning_rate;
    cfg.epochs = epochs_flag ? epochs_flag : m.cnn_epochs;
    cfg.batch_size = m.batch;
    cfg.seed = c.seed;
    auto result = train_cnn(training, cfg, corpus.vocabulary().hash());
    ckpt = result.model.to_checkpoint();
    curve = std::move(result.loss_curve);
    params = result.model.parameter_count();
    echo["rows"] = std::to_string(cfg.rows);
    echo["loss"] = m.loss;
    echo["sigma"] = format_double(cfg.sigma);
    echo["epochs"] = std::to_string(cfg.epochs);
  } else {
    throw InputError("train supports --model rnn or cnn, not '" + model + "'");
  }
  const fs::path ckpt_path = out / (model + ".ckpt");
  const fs::path curve_path = out / (model + "_loss.csv");
  fs::create_directories(out);
  write_checkpoint(ckpt_path, ckpt);
  write_text(curve_path, loss_curve_csv(curve, echo));
  std::cout << model << ": " << params << " parameters, final loss " << format_double(curve.back()) << "\n"
            << "wrote " << ckpt_path.string() << " and " << curve_path.string() << "\n";
  return 0;
}

int cmd_predict(const std::string& model, const std::string& checkpoint, const std::string& video_id, double alpha,
                double beta, const std::string& observed_name, const DataOptions& d, const ModelOptions& m,
                const CommonOptions& c) {
  const Corpus corpus = load_data(d);
  SplitSpec split = load_split_or_all(d, corpus);
  if (d.split.empty()) std::erase(split.train_ids, video_id);
  const Video& video = corpus.video(video_id);
  const ObservationSplit fractions(alpha, beta);
  const std::size_t T = video.ground_truth.size();
  const std::size_t t = split_observation(video.ground_truth, fractions).observed.size();
  const std::size_t horizon = fraction_of(beta, T);

  const ObservedSource source = observed_source_from_string(observed_name);
  const FrameTimeline* observed = &video.ground_truth;
  if (source == ObservedSource::Decoded) {
    if (!video.decoded) throw InputError("video " + video_id + " has no decoded labels");
    observed = &*video.decoded;
  }
  const auto predictor = make_predictor(model, checkpoint, corpus, split, m);
  const FrameTimeline pred = predictor->predict(observed->slice(0, t), T, horizon, c.seed);

  std::cerr << "# model=" << predictor->name() << " video=" << video_id << " obs=" << format_double(alpha)
            << " pred=" << format_double(beta) << " observed=" << to_string(source) << " seed=" << c.seed
            << " frames=" << pred.size() << "\n";
  if (c.out.empty()) {
    for (Label l : pred.frames()) std::cout << corpus.vocabulary().name(l) << "\n";
  } else {
    write_label_file(c.out, pred, corpus.vocabulary());
  }
  return 0;
}

int cmd_evaluate(const std::vector<std::string>& models, const std::vector<std::string>& checkpoints,
                 const std::vector<double>& alphas, const std::vector<double>& betas,
                 const std::string& observed_name, const std::vector<std::string>& metrics,
                 const std::vector<std::size_t>& bucket_edges, const DataOptions& d, const ModelOptions& m,
                 const CommonOptions& c) {
  if (d.split.empty()) throw InputError("evaluate needs --split to select test videos");
  const Corpus corpus = load_data(d);
  const SplitSpec split = load_split(d.split, corpus);
  if (split.test_ids.empty()) throw InputError("split " + d.split + " lists no test videos");
  const ObservedSource source = observed_source_from_string(observed_name);
  const bool actions = std::find(metrics.begin(), metrics.end(), "actions") != metrics.end();
  const bool buckets = std::find(metrics.begin(), metrics.end(), "buckets") != metrics.end();

  // Each neural model takes the next unused checkpoint of its architecture.
  std::vector<bool> used(checkpoints.size(), false);
  std::vector<std::string> arch(checkpoints.size());
  for (std::size_t i = 0; i < checkpoints.size(); ++i) arch[i] = read_checkpoint(checkpoints[i]).architecture;
  std::vector<std::unique_ptr<Predictor>> predictors;
  std::vector<std::string> names;
  for (const auto& model : models) {
    std::string path;
    if (model == "rnn" || model == "cnn") {
      for (std::size_t i = 0; i < checkpoints.size() && path.empty(); ++i)
        if (!used[i] && arch[i] == architecture_of(model)) {
          used[i] = true;
          path = checkpoints[i];
        }
      if (path.empty()) throw InputError("no unused " + architecture_of(model) + " checkpoint for model " + model);
    }
    predictors.push_back(make_predictor(model, path, corpus, split, m));
    names.push_back(predictors.back()->name());
  }
  for (std::size_t i = 0; i < checkpoints.size(); ++i)
    if (!used[i]) throw InputError("checkpoint " + checkpoints[i] + " is not used by any --model");

  std::string model_list;
  for (const auto& n : names) model_list += (model_list.empty() ? "" : ",") + n;
  ConfigEcho echo{{"command", "evaluate"},
                  {"models", model_list},
                  {"obs", join(alphas)},
                  {"pred", join(betas)},
                  {"observed", to_string(source)},
                  {"seed", std::to_string(c.seed)},
                  {"split", fs::path(d.split).filename().string()},
                  {"test_videos", std::to_string(split.test_ids.size())}};

  std::vector<EvaluationReport> reports;
  for (const auto& p : predictors) {
    reports.push_back(evaluate_grid(*p, corpus, split, alphas, betas, {source, c.seed}));
    if (const auto* rnn = dynamic_cast<const RnnPredictor*>(p.get()); rnn && rnn->recursion_limit_hits() > 0)
      std::cerr << "warning: rnn hit its recursion cap on " << rnn->recursion_limit_hits()
                << " predictions; the last label was held to fill the horizon\n";
  }

  const fs::path out = c.out.empty() ? fs::path(".") : fs::path(c.out);
  fs::create_directories(out);
  const std::string grid = grid_csv(reports, echo, actions);
  write_text(out / "grid.csv", grid);
  write_text(out / "videos.csv", video_csv(reports, echo));
  for (double a : alphas) write_text(out / ("moc_obs" + percent_tag(a) + ".svg"), moc_plot_svg(reports, a, echo));
  if (buckets) {
    ConfigEcho b = echo;
    std::string edges;
    for (auto e : bucket_edges) edges += (edges.empty() ? "" : ",") + std::to_string(e);
    b["buckets"] = edges;
    write_text(out / "buckets.csv", bucket_csv(reports, bucket_edges, b));
  }
  std::cout << grid;
  return 0;
}

int cmd_gradcheck(double tolerance, std::uint64_t seed, std::size_t seeds, bool inject_fault) {
  struct Case {
    std::string name;
    std::function<GradCheckReport(const ToyGradCheckOptions&)> run;
  };
  const std::vector<Case> cases{
      {"rnn", [](const ToyGradCheckOptions& o) { return rnn_toy_gradcheck(o); }},
      {"cnn-squared", [](const ToyGradCheckOptions& o) { return cnn_toy_gradcheck(CnnLoss::Squared, o); }},
      {"cnn-xent", [](const ToyGradCheckOptions& o) { return cnn_toy_gradcheck(CnnLoss::CrossEntropy, o); }},
  };
  bool ok = true;
  for (const auto& test : cases) {
    double worst = 0.0;
    std::string worst_block;
    std::uint64_t worst_seed = seed;
    bool finite = true;
    for (std::uint64_t s = seed; s < seed + seeds; ++s) {
      ToyGradCheckOptions o;
      o.seed = s;
      o.inject_fault = inject_fault;
      const auto report = test.run(o);
      finite &= report.all_finite();
      if (report.max_rel_error() >= worst) {
        worst = report.max_rel_error();
        worst_block = report.worst_block()->name;
        worst_seed = s;
      }
    }
    const bool pass = finite && worst < tolerance;
    ok &= pass;
    std::cout << (pass ? "PASS " : "FAIL ") << test.name << " max_rel_error=" << format_double(worst)
              << " worst_block=" << worst_block << " seed=" << worst_seed << (finite ? "" : " non-finite") << "\n";
  }
  std::cout << (ok ? "gradient check passed" : "gradient check FAILED") << " (tolerance " << format_double(tolerance)
            << ", " << seeds << " seed" << (seeds == 1 ? "" : "s") << ")\n";
  return ok ? 0 : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anticipate future action segments from observed frame labels."};
  app.require_subcommand(1);
  app.set_version_flag("--version", "anticipate 0.1.0");

  DataOptions data;
  ModelOptions model_opts;
  CommonOptions common;

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus from a JSON grammar spec");
  std::string synth_config;
  std::optional<std::uint64_t> synth_seed;
  std::size_t synth_test = 0;
  synth->add_option("--config", synth_config, "Grammar spec (JSON)")->required();
  synth->add_option("--out", common.out, "Output corpus directory")->required();
  synth->add_option("--seed", synth_seed, "Override the spec's seed");
  synth->add_option("--test", synth_test, "Number of videos listed in <out>/split.txt")->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "Train a model and write <out>/<model>.ckpt and <out>/<model>_loss.csv");
  std::string train_model;
  train->add_option("--model", train_model, "rnn or cnn")->required()->check(CLI::IsMember({"rnn", "cnn"}));
  add_data_options(train, data);
  add_model_options(train, model_opts);
  train->add_option("--epochs", epochs_flag, "Training epochs (default 20 for rnn, 30 for cnn)");
  train->add_option("--seed", common.seed, "Random seed")->capture_default_str();
  train->add_option("--out", common.out, "Output directory (default .)");

  // predict
  auto* predict = app.add_subcommand("predict", "Write the predicted labels of one video");
  std::string predict_model, predict_ckpt, predict_video, predict_observed = "gt";
  double predict_alpha = 0.2, predict_beta = 0.1;
  predict->add_option("--model", predict_model, "rnn, cnn, grammar or nn-baseline")
      ->required()
      ->check(CLI::IsMember({"rnn", "cnn", "grammar", "nn-baseline"}));
  predict->add_option("--checkpoint", predict_ckpt, "Checkpoint for rnn or cnn");
  predict->add_option("--video", predict_video, "Video id")->required();
  predict->add_option("--obs", predict_alpha, "Observed fraction")->capture_default_str();
  predict->add_option("--pred", predict_beta, "Predicted fraction")->capture_default_str();
  predict->add_option("--observed", predict_observed, "gt or decoded")->capture_default_str();
  add_data_options(predict, data);
  predict->add_flag("--no-smooth", model_opts.no_smooth, "CNN: skip output smoothing");
  predict->add_option("--seed", common.seed, "Seed for the grammar baseline")->capture_default_str();
  predict->add_option("--out", common.out, "Output label file (default stdout)");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate models over an observation x prediction grid");
  std::vector<std::string> eval_models, eval_ckpts, metrics{"moc"};
  std::vector<double> alphas{0.2, 0.3}, betas{0.1, 0.2, 0.3, 0.5};
  std::vector<std::size_t> edges{0, 100, 200, 400, 800, 1600, 3200, 6400, 1000000000};
  std::string eval_observed = "gt";
  evaluate->add_option("--model", eval_models, "Models to evaluate (repeatable)")
      ->required()
      ->delimiter(',')
      ->check(CLI::IsMember({"rnn", "cnn", "grammar", "nn-baseline"}));
  evaluate->add_option("--checkpoint", eval_ckpts, "Checkpoints for rnn/cnn models, matched by architecture")
      ->delimiter(',');
  evaluate->add_option("--obs", alphas, "Observed fractions")->delimiter(',')->capture_default_str();
  evaluate->add_option("--pred", betas, "Predicted fractions")->delimiter(',')->capture_default_str();
  evaluate->add_option("--observed", eval_observed, "gt or decoded")->capture_default_str();
  evaluate->add_option("--metric", metrics, "moc, actions, buckets (repeatable)")
      ->delimiter(',')
      ->check(CLI::IsMember({"moc", "actions", "buckets"}))
      ->capture_default_str();
  evaluate->add_option("--buckets", edges, "Horizon-length bucket edges in frames")->delimiter(',');
  evaluate->add_flag("--no-smooth", model_opts.no_smooth, "CNN: skip output smoothing");
  add_data_options(evaluate, data);
  evaluate->add_option("--seed", common.seed, "Base seed for per-video randomness")->capture_default_str();
  evaluate->add_option("--out", common.out, "Output directory (default .)");

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients at toy size");
  double tolerance = 1e-4;
  std::uint64_t gc_seed = 0;
  std::size_t gc_seeds = 5;
  bool inject_fault = false;
  gradcheck->add_option("--tolerance", tolerance, "Maximum relative error")->capture_default_str();
  gradcheck->add_option("--seed", gc_seed, "First seed")->capture_default_str();
  gradcheck->add_option("--seeds", gc_seeds, "Number of seeds")->capture_default_str();
  gradcheck->add_flag("--inject-fault", inject_fault)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*synth) return cmd_synth(synth_config, common.out, synth_seed, synth_test);
    if (*train) return cmd_train(train_model, data, model_opts, common);
    if (*predict)
      return cmd_predict(predict_model, predict_ckpt, predict_video, predict_alpha, predict_beta, predict_observed,
                         data, model_opts, common);
    if (*evaluate)
      return cmd_evaluate(eval_models, eval_ckpts, alphas, betas, eval_observed, metrics, edges, data, model_opts,
                          common);
    if (*gradcheck) return cmd_gradcheck(tolerance, gc_seed, gc_seeds, inject_fault);
  } catch (const ConsistencyError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConsistency;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const RecursionLimitError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
