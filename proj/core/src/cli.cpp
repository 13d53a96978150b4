#include "lehgr/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lehgr/config.hpp"
#include "lehgr/dataset.hpp"
#include "lehgr/error.hpp"
#include "lehgr/features.hpp"
#include "lehgr/metrics.hpp"
#include "lehgr/net.hpp"
#include "lehgr/stream_io.hpp"
#include "lehgr/synth.hpp"
#include "lehgr/tracking.hpp"

namespace lehgr {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

PipelineConfig resolve_config(const std::string& config_path) {
  if (config_path.empty()) {
    return default_pipeline_config();
  }
  return load_pipeline_config(config_path);
}

TrajectoryKind kind_from_string(const std::string& name) {
  if (name == "wave_left") return TrajectoryKind::WaveLeft;
  if (name == "wave_right") return TrajectoryKind::WaveRight;
  if (name == "hold") return TrajectoryKind::NegativeHold;
  if (name == "drift") return TrajectoryKind::NegativeDrift;
  if (name == "bob") return TrajectoryKind::NegativeBob;
  if (name == "negative") return TrajectoryKind::NegativeAuto;
  throw Error(ErrorCode::Schema, "unknown trajectory kind " + name);
}

struct SceneConfig {
  std::string recording_id;
  std::int64_t n_frames = 0;
  NoiseConfig noise;
  std::vector<GestureScript> scripts;
};

SceneConfig scene_from_json(const json& j) {
  SceneConfig scene;
  try {
    scene.recording_id = j.value("recording_id", std::string("recording"));
    scene.n_frames = j.at("n_frames").get<std::int64_t>();
    if (j.contains("seed")) {
      scene.noise.seed = j.at("seed").get<std::uint64_t>();
    }
    if (j.contains("noise")) {
      const json& n = j.at("noise");
      scene.noise.keypoint_jitter = n.value("kpt_jitter", 0.0);
      scene.noise.box_jitter = n.value("box_jitter", 0.0);
      scene.noise.dropout = n.value("dropout", 0.0);
      scene.noise.false_positive_rate = n.value("fp_rate", 0.0);
      scene.noise.false_positive_persistence = n.value("fp_persistence", 1);
    }
    for (const json& s : j.at("scripts")) {
      GestureScript script;
      script.kind = kind_from_string(s.at("kind").get<std::string>());
      script.class_id = s.value("class", 0);
      script.source_id = s.value("source", 0);
      script.start = s.at("start").get<std::int64_t>();
      script.end = s.at("end").get<std::int64_t>();
      script.amplitude = s.value("amplitude", 0.15);
      script.period = s.value("period", 20);
      script.scale = s.value("scale", 0.12);
      if (s.contains("base")) {
        const json& base = s.at("base");
        script.base = Vec2{base.at(0).get<double>(), base.at(1).get<double>()};
      }
      scene.scripts.push_back(std::move(script));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("bad scene config: ") + e.what());
  }
  return scene;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorCode::Io, "cannot write " + path);
  }
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::Io, "cannot open " + path);
  }
  return in;
}

FeatureMode parse_mode(const std::string& name) {
  if (name == "motion") return FeatureMode::Motion;
  if (name == "box") return FeatureMode::Box;
  throw Error(ErrorCode::Config, "unknown feature mode " + name);
}

int dataset_frame_width(const SkeletonSpec& skeleton, FeatureMode mode) {
  if (mode == FeatureMode::Box) return 4;
  return 2 * skeleton.keypoint_count +
         2 * static_cast<int>(skeleton.edges.size());
}

Recording load_recording(const std::string& id, const std::string& traces_path,
                         const std::string& annotations_path,
                         const SkeletonSpec& skeleton, FeatureMode mode) {
  Recording recording;
  recording.id = id;
  std::ifstream trace_in = open_in(traces_path);
  const std::vector<TraceFrame> trace_frames =
      read_trace_stream(trace_in, skeleton);
  for (const auto& [trace_id, trace] : traces_from_stream(trace_frames)) {
    for (MotionFeatureSequence& run : featurize_runs(trace, mode, skeleton)) {
      recording.traces.emplace_back(trace_id, std::move(run));
    }
  }
  if (!annotations_path.empty()) {
    recording.segments = load_annotations(annotations_path).segments;
  }
  return recording;
}

NetConfig net_config_for(const Dataset& dataset, const std::string& mode,
                         const PipelineConfig& config) {
  NetConfig net;
  net.hidden = config.hidden;
  net.depth = config.depth;
  net.dropout = config.dropout;
  net.fc_hidden = config.fc_hidden;
  net.classes = dataset.labels.count();
  if (mode == "two-branch") {
    if (dataset.mode != FeatureMode::Motion) {
      throw Error(ErrorCode::Config,
                  "two-branch mode needs a motion-mode dataset");
    }
    net.mode = BranchMode::TwoBranch;
    net.input_velocity = 2 * dataset.skeleton.keypoint_count;
    net.input_shape = 2 * static_cast<int>(dataset.skeleton.edges.size());
  } else if (mode == "single-branch" || mode == "box") {
    if (mode == "box" && dataset.mode != FeatureMode::Box) {
      throw Error(ErrorCode::Config, "box mode needs a box-mode dataset");
    }
    net.mode = BranchMode::SingleBranch;
    net.input_velocity = dataset.frame_width;
    net.input_shape = 0;
  } else {
    throw Error(ErrorCode::Config, "unknown network mode " + mode);
  }
  return net;
}

int run_parsed(CLI::App& app, const std::string& config_path);

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"hand-gesture recognition pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path,
                 "JSON file overriding pipeline defaults")
      ->expected(1);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "generate a synthetic stream");
  std::string scene_path, stream_out, annotations_out;
  std::optional<std::uint64_t> simulate_seed;
  simulate->add_option("--scene", scene_path, "scene config JSON")->required();
  simulate->add_option("--out", stream_out, "detection stream JSONL")->required();
  simulate->add_option("--annotations-out", annotations_out,
                       "annotations JSON");
  simulate->add_option("--seed", simulate_seed, "override the scene seed");

  // track
  auto* track = app.add_subcommand("track", "associate detections into traces");
  std::string track_in, track_out;
  std::optional<std::uint64_t> track_seed;
  track->add_option("--in", track_in, "detection stream JSONL")->required();
  track->add_option("--out", track_out, "trace stream JSONL")->required();
  track->add_option("--seed", track_seed, "unused; accepted for uniformity");

  // featurize
  auto* featurize = app.add_subcommand("featurize", "trace stream to feature CSV");
  std::string feat_in, feat_out, feat_mode = "motion";
  std::optional<std::uint64_t> feat_seed;
  featurize->add_option("--in", feat_in, "trace stream JSONL")->required();
  featurize->add_option("--out", feat_out, "feature CSV")->required();
  featurize->add_option("--mode", feat_mode, "motion|box")
      ->check(CLI::IsMember({"motion", "box"}));
  featurize->add_option("--seed", feat_seed, "unused; accepted for uniformity");

  // dataset build / inspect
  auto* dataset_cmd = app.add_subcommand("dataset", "dataset operations");
  dataset_cmd->require_subcommand(1);
  auto* build = dataset_cmd->add_subcommand("build", "build clip dataset");
  std::string manifest_path, dataset_out, build_mode = "motion";
  std::string train_out, test_out;
  double split_ratio = 0.8;
  std::uint64_t build_seed = 0;
  build->add_option("--manifest", manifest_path,
                    "recordings manifest JSON")
      ->required();
  build->add_option("--out", dataset_out, "dataset container");
  build->add_option("--mode", build_mode, "motion|box")
      ->check(CLI::IsMember({"motion", "box"}));
  build->add_option("--train-out", train_out, "training split container");
  build->add_option("--test-out", test_out, "test split container");
  build->add_option("--split", split_ratio, "training fraction (0,1)");
  build->add_option("--seed", build_seed, "split shuffle seed");

  auto* inspect = dataset_cmd->add_subcommand("inspect", "print per-class counts");
  std::string inspect_in;
  inspect->add_option("--in", inspect_in, "dataset container")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "train the classifier");
  std::string train_data, val_data, model_out, net_mode = "two-branch";
  double lr = 0.004, dropout = 0.2;
  int hidden = 64, epochs = 60, batch = 32;
  std::uint64_t train_seed = 0;
  bool lr_set = false, hidden_set = false, dropout_set = false;
  bool epochs_set = false, batch_set = false;
  train_cmd->add_option("--data", train_data, "training dataset")->required();
  train_cmd->add_option("--val", val_data, "validation dataset");
  train_cmd->add_option("--out", model_out, "weight file")->required();
  train_cmd->add_option("--lr", lr, "learning rate")
      ->each([&](const std::string&) { lr_set = true; });
  train_cmd->add_option("--hidden", hidden, "recurrent width per branch")
      ->each([&](const std::string&) { hidden_set = true; });
  train_cmd->add_option("--dropout", dropout, "dropout rate")
      ->each([&](const std::string&) { dropout_set = true; });
  train_cmd->add_option("--epochs", epochs, "training epochs")
      ->each([&](const std::string&) { epochs_set = true; });
  train_cmd->add_option("--batch", batch, "batch size")
      ->each([&](const std::string&) { batch_set = true; });
  train_cmd->add_option("--seed", train_seed, "init and shuffle seed");
  train_cmd->add_option("--mode", net_mode, "two-branch|single-branch|box")
      ->check(CLI::IsMember({"two-branch", "single-branch", "box"}));

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a model on a dataset");
  std::string eval_model, eval_data, eval_csv, eval_report;
  std::optional<std::uint64_t> eval_seed;
  eval_cmd->add_option("--model", eval_model, "weight file")->required();
  eval_cmd->add_option("--data", eval_data, "dataset container")->required();
  eval_cmd->add_option("--csv-out", eval_csv, "confusion matrix CSV");
  eval_cmd->add_option("--report-out", eval_report, "text report copy");
  eval_cmd->add_option("--seed", eval_seed, "unused; accepted for uniformity");

  // infer
  auto* infer_cmd = app.add_subcommand("infer", "online gesture events");
  std::string infer_model, infer_in, infer_out;
  std::optional<std::uint64_t> infer_seed;
  std::optional<double> theta;
  std::optional<int> consecutive, refractory, infer_t_obj;
  infer_cmd->add_option("--model", infer_model, "weight file")->required();
  infer_cmd->add_option("--in", infer_in, "detection stream JSONL")->required();
  infer_cmd->add_option("--out", infer_out, "gesture event JSONL")->required();
  infer_cmd->add_option("--theta", theta, "trigger probability threshold");
  infer_cmd->add_option("--consecutive", consecutive, "trigger streak length");
  infer_cmd->add_option("--refractory", refractory, "frames suppressed after an event");
  infer_cmd->add_option("--t-obj", infer_t_obj, "window length");
  infer_cmd->add_option("--seed", infer_seed, "unused; accepted for uniformity");

  std::vector<const char*> argv;
  argv.push_back("lehgr");
  for (const std::string& arg : args) {
    argv.push_back(arg.c_str());
  }

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);
    }
    app.exit(e);
    return 1;
  }

  try {
    const PipelineConfig config = resolve_config(config_path);

    if (*simulate) {
      SceneConfig scene = scene_from_json(
          parse_json(read_text_file(scene_path), scene_path));
      if (simulate_seed) {
        scene.noise.seed = *simulate_seed;
      }
      const SceneOutput output =
          synth_scene(scene.scripts, scene.noise, scene.n_frames,
                      config.skeleton);
      std::ofstream out = open_out(stream_out);
      write_detection_stream(out, output.frames);
      if (!annotations_out.empty()) {
        save_annotations({scene.recording_id, output.segments},
                         annotations_out);
      }
      return 0;
    }

    if (*track) {
      std::ifstream in = open_in(track_in);
      const std::vector<FrameObservation> frames =
          read_detection_stream(in, config.skeleton);
      std::ofstream out = open_out(track_out);
      write_trace_stream(out, track_stream(frames, config.tracking));
      return 0;
    }

    if (*featurize) {
      std::ifstream in = open_in(feat_in);
      const std::vector<TraceFrame> trace_frames =
          read_trace_stream(in, config.skeleton);
      const FeatureMode mode = parse_mode(feat_mode);
      std::vector<std::pair<std::int64_t, MotionFeatureSequence>> rows;
      for (const auto& [trace_id, trace] : traces_from_stream(trace_frames)) {
        for (MotionFeatureSequence& run :
             featurize_runs(trace, mode, config.skeleton)) {
          rows.emplace_back(trace_id, std::move(run));
        }
      }
      std::ofstream out = open_out(feat_out);
      write_feature_csv(out, rows);
      return 0;
    }

    if (*build) {
      const json manifest = parse_json(read_text_file(manifest_path),
                                       manifest_path);
      const fs::path base = fs::path(manifest_path).parent_path();
      const FeatureMode mode = parse_mode(build_mode);
      std::vector<Recording> recordings;
      try {
        for (const json& entry : manifest.at("recordings")) {
          const std::string id = entry.at("id").get<std::string>();
          const std::string traces =
              (base / entry.at("traces").get<std::string>()).string();
          std::string annotations;
          if (entry.contains("annotations")) {
            annotations =
                (base / entry.at("annotations").get<std::string>()).string();
          }
          recordings.push_back(load_recording(id, traces, annotations,
                                              config.skeleton, mode));
        }
      } catch (const json::exception& e) {
        throw Error(ErrorCode::Schema,
                    std::string("bad manifest: ") + e.what());
      }

      Dataset dataset;
      dataset.skeleton = config.skeleton;
      dataset.mode = mode;
      dataset.t_obj = config.augmentation.t_obj;
      dataset.frame_width = dataset_frame_width(config.skeleton, mode);
      dataset.labels = config.labels;
      dataset.clips =
          generate_clips(recordings, config.augmentation, config.thresholds);

      if (!dataset_out.empty()) {
        save_dataset(dataset, dataset_out);
      }
      if (!train_out.empty() || !test_out.empty()) {
        if (train_out.empty() || test_out.empty()) {
          throw Error(ErrorCode::Usage,
                      "--train-out and --test-out must be given together");
        }
        const auto [train_split, test_split] =
            split_dataset(dataset, split_ratio, build_seed);
        save_dataset(train_split, train_out);
        save_dataset(test_split, test_out);
      }
      if (dataset_out.empty() && train_out.empty()) {
        throw Error(ErrorCode::Usage,
                    "dataset build needs --out or --train-out/--test-out");
      }
      return 0;
    }

    if (*inspect) {
      const Dataset dataset = load_dataset(inspect_in);
      std::cout << "clips: " << dataset.clips.size()
                << "  t_obj: " << dataset.t_obj
                << "  width: " << dataset.frame_width << "  mode: "
                << (dataset.mode == FeatureMode::Motion ? "motion" : "box")
                << '\n';
      for (const auto& [class_id, count] : dataset.class_counts()) {
        std::cout << class_id << " " << dataset.labels.name_of(class_id)
                  << ": " << count << '\n';
      }
      return 0;
    }

    if (*train_cmd) {
      const Dataset dataset = load_dataset(train_data);
      std::optional<Dataset> val;
      if (!val_data.empty()) {
        val = load_dataset(val_data);
      }
      PipelineConfig effective = config;
      if (hidden_set) effective.hidden = hidden;
      if (dropout_set) effective.dropout = dropout;
      if (lr_set) effective.learning_rate = lr;
      if (epochs_set) effective.epochs = epochs;
      if (batch_set) effective.batch_size = batch;

      const NetConfig net_config = net_config_for(dataset, net_mode, effective);
      TraceSeqModel model = init_network(net_config, train_seed);
      TrainOptions options;
      options.epochs = effective.epochs;
      options.batch_size = effective.batch_size;
      options.learning_rate = effective.learning_rate;
      options.seed = train_seed;
      const std::vector<EpochStats> history =
          train(model, dataset, val ? &*val : nullptr, options);
      for (const EpochStats& stats : history) {
        std::cout << "epoch " << stats.epoch << " loss " << stats.mean_loss
                  << " train_acc " << stats.train_accuracy;
        if (stats.val_accuracy) {
          std::cout << " val_acc " << *stats.val_accuracy;
        }
        std::cout << '\n';
      }
      save_model(model, model_out);
      return 0;
    }

    if (*eval_cmd) {
      const TraceSeqModel model = load_model(eval_model);
      const Dataset dataset = load_dataset(eval_data);
      std::vector<int> truths;
      truths.reserve(dataset.clips.size());
      for (const SequenceClip& clip : dataset.clips) {
        truths.push_back(clip.label);
      }
      const std::vector<int> predictions = predict_labels(model, dataset);
      const MetricsReport report =
          metrics(predictions, truths, dataset.labels.count());
      const std::string text = format_report(report, &dataset.labels);
      std::cout << text;
      if (!eval_report.empty()) {
        write_text_file(eval_report, text);
      }
      if (!eval_csv.empty()) {
        std::ofstream out = open_out(eval_csv);
        write_confusion_csv(out, report);
      }
      return 0;
    }

    if (*infer_cmd) {
      const TraceSeqModel model = load_model(infer_model);
      std::ifstream in = open_in(infer_in);
      const std::vector<FrameObservation> frames =
          read_detection_stream(in, config.skeleton);

      const FeatureMode mode =
          (model.config.mode == BranchMode::SingleBranch &&
           model.config.frame_width() == 4)
              ? FeatureMode::Box
              : FeatureMode::Motion;
      if (mode == FeatureMode::Motion &&
          model.config.frame_width() !=
              dataset_frame_width(config.skeleton, mode)) {
        throw Error(ErrorCode::Config,
                    "model width does not match the configured skeleton");
      }
      TriggerConfig trigger = config.trigger;
      if (theta) trigger.prob_threshold = *theta;
      if (consecutive) trigger.consecutive = *consecutive;
      if (refractory) trigger.refractory = *refractory;
      const int t_obj = infer_t_obj.value_or(config.augmentation.t_obj);

      StreamPredictor predictor(model, config.tracking, trigger,
                                config.skeleton, mode, t_obj);
      std::ofstream out = open_out(infer_out);
      for (const FrameObservation& frame : frames) {
        for (const GestureEvent& event : predictor.step(frame)) {
          json line{{"frame", event.frame_index},
                    {"trace", event.trace_id},
                    {"class", event.class_id},
                    {"prob", event.probability}};
          if (event.class_id < config.labels.count()) {
            line["name"] = config.labels.name_of(event.class_id);
          }
          out << line.dump() << '\n';
        }
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::Usage ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args;
  args.reserve(static_cast<std::size_t>(argc > 0 ? argc - 1 : 0));
  for (int i = 1; i < argc; ++i) {
    args.emplace_back(argv[i]);
  }
  return run_cli(args);
}

}  // namespace lehgr
