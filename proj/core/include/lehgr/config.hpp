#pragma once

#include <string>

#include <json.hpp>

#include "lehgr/dataset.hpp"
#include "lehgr/net.hpp"
#include "lehgr/tracking.hpp"
#include "lehgr/types.hpp"

namespace lehgr {

// All tunables of the pipeline with their defaults. A single JSON config
// file can override any subset; unknown keys are rejected.
struct PipelineConfig {
  SkeletonSpec skeleton = star_skeleton();
  LabelSet labels = default_labels();
  TrackingConfig tracking;
  AugmentationConfig augmentation;
  LabelingThresholds thresholds;
  TriggerConfig trigger;
  double learning_rate = 0.004;
  int hidden = 64;
  int depth = 1;
  double dropout = 0.2;
  int fc_hidden = 0;
  int epochs = 60;
  int batch_size = 32;
};

PipelineConfig default_pipeline_config();

// Loads overrides from a JSON file on top of the defaults.
PipelineConfig load_pipeline_config(const std::string& path);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);

}  // namespace lehgr
