#include "lehgr/config.hpp"

#include <set>

#include <json.hpp>

#include "lehgr/error.hpp"
#include "lehgr/stream_io.hpp"

namespace lehgr {

using nlohmann::json;

PipelineConfig default_pipeline_config() { return PipelineConfig{}; }

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known,
                    const std::string& context) {
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) {
      throw Error(ErrorCode::Config,
                  "unknown key \"" + key + "\" in " + context);
    }
  }
}

}  // namespace

PipelineConfig pipeline_config_from_json(const json& j) {
  PipelineConfig config;
  reject_unknown(j,
                 {"skeleton", "labels", "tracking", "dataset", "net",
                  "training", "trigger"},
                 "config");
  try {
    if (j.contains("skeleton")) {
      config.skeleton = skeleton_from_json(j.at("skeleton"));
    }
    if (j.contains("labels")) {
      config.labels = labels_from_json(j.at("labels"));
    }
    if (j.contains("tracking")) {
      const json& t = j.at("tracking");
      reject_unknown(t, {"w_loc", "w_iou", "w_area", "gate", "max_misses",
                         "history_capacity"},
                     "tracking");
      config.tracking.weights.w_loc =
          t.value("w_loc", config.tracking.weights.w_loc);
      config.tracking.weights.w_iou =
          t.value("w_iou", config.tracking.weights.w_iou);
      config.tracking.weights.w_area =
          t.value("w_area", config.tracking.weights.w_area);
      config.tracking.weights.gate =
          t.value("gate", config.tracking.weights.gate);
      config.tracking.max_misses =
          t.value("max_misses", config.tracking.max_misses);
      config.tracking.history_capacity = t.value(
          "history_capacity", config.tracking.history_capacity);
      if (config.tracking.weights.w_loc < 0.0 ||
          config.tracking.weights.w_iou < 0.0 ||
          config.tracking.weights.w_area < 0.0 ||
          config.tracking.weights.w_loc + config.tracking.weights.w_iou +
                  config.tracking.weights.w_area <=
              0.0 ||
          config.tracking.weights.gate <= 0.0) {
        throw Error(ErrorCode::Config, "bad tracking weights");
      }
    }
    if (j.contains("dataset")) {
      const json& d = j.at("dataset");
      reject_unknown(
          d, {"t_min", "delta_t", "t_obj", "stride", "delta_ios", "delta_ioa"},
          "dataset");
      config.augmentation.t_min = d.value("t_min", config.augmentation.t_min);
      config.augmentation.delta_t =
          d.value("delta_t", config.augmentation.delta_t);
      config.augmentation.t_obj = d.value("t_obj", config.augmentation.t_obj);
      config.augmentation.stride =
          d.value("stride", config.augmentation.stride);
      config.thresholds.delta_ios =
          d.value("delta_ios", config.thresholds.delta_ios);
      config.thresholds.delta_ioa =
          d.value("delta_ioa", config.thresholds.delta_ioa);
    }
    if (j.contains("net")) {
      const json& n = j.at("net");
      reject_unknown(n, {"hidden", "depth", "dropout", "fc_hidden"}, "net");
      config.hidden = n.value("hidden", config.hidden);
      config.depth = n.value("depth", config.depth);
      config.dropout = n.value("dropout", config.dropout);
      config.fc_hidden = n.value("fc_hidden", config.fc_hidden);
    }
    if (j.contains("training")) {
      const json& t = j.at("training");
      reject_unknown(t, {"lr", "epochs", "batch"}, "training");
      config.learning_rate = t.value("lr", config.learning_rate);
      config.epochs = t.value("epochs", config.epochs);
      config.batch_size = t.value("batch", config.batch_size);
    }
    if (j.contains("trigger")) {
      const json& t = j.at("trigger");
      reject_unknown(t, {"theta", "consecutive", "refractory"}, "trigger");
      config.trigger.prob_threshold =
          t.value("theta", config.trigger.prob_threshold);
      config.trigger.consecutive =
          t.value("consecutive", config.trigger.consecutive);
      config.trigger.refractory =
          t.value("refractory", config.trigger.refractory);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, std::string("bad config: ") + e.what());
  }
  return config;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  return pipeline_config_from_json(parse_json(read_text_file(path), path));
}

}  // namespace lehgr
