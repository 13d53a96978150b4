#include "lehgr/types.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "lehgr/error.hpp"

namespace lehgr {

namespace {

double clamp_center(double c) { return std::clamp(c, -0.5, 1.5); }

double clamp_extent(double e) { return std::min(e, 1.0); }

}  // namespace

SkeletonSpec validate_skeleton(SkeletonSpec spec) {
  if (spec.keypoint_count <= 0) {
    throw Error(ErrorCode::Schema, "keypoint_count must be positive");
  }
  if (spec.keypoint_count >= 2 && spec.edges.empty()) {
    throw Error(ErrorCode::Schema, "empty edge set");
  }
  std::set<std::pair<int, int>> seen;
  for (const auto& [pi, pj] : spec.edges) {
    if (pi < 0 || pi >= spec.keypoint_count) {
      throw Error(ErrorCode::Schema,
                  "edge index " + std::to_string(pi) + " out of range");
    }
    if (pj < 0 || pj >= spec.keypoint_count) {
      throw Error(ErrorCode::Schema,
                  "edge index " + std::to_string(pj) + " out of range");
    }
    if (pi == pj) {
      throw Error(ErrorCode::Schema,
                  "degenerate edge (" + std::to_string(pi) + "," +
                      std::to_string(pj) + ")");
    }
    const auto key = std::minmax(pi, pj);
    if (!seen.insert(key).second) {
      throw Error(ErrorCode::Schema,
                  "duplicate edge (" + std::to_string(pi) + "," +
                      std::to_string(pj) + ")");
    }
  }
  return spec;
}

SkeletonSpec star_skeleton() {
  SkeletonSpec spec;
  spec.name = "synthetic_star";
  spec.keypoint_count = 5;
  spec.edges = {{0, 1}, {0, 2}, {0, 3}, {0, 4}};
  return spec;
}

double BoundingBox::diagonal() const { return std::sqrt(w * w + h * h); }

HandDetection normalize_detection(const PixelDetection& raw, int image_width,
                                  int image_height) {
  if (image_width <= 0 || image_height <= 0) {
    throw Error(ErrorCode::InvalidInput,
                "image size must be positive, got " +
                    std::to_string(image_width) + "x" +
                    std::to_string(image_height));
  }
  if (!(raw.x1 > raw.x0) || !(raw.y1 > raw.y0)) {
    throw Error(ErrorCode::InvalidInput, "box corners must span a positive area");
  }
  const double iw = static_cast<double>(image_width);
  const double ih = static_cast<double>(image_height);

  HandDetection det;
  det.box.cx = clamp_center((raw.x0 + raw.x1) / 2.0 / iw);
  det.box.cy = clamp_center((raw.y0 + raw.y1) / 2.0 / ih);
  det.box.w = clamp_extent((raw.x1 - raw.x0) / iw);
  det.box.h = clamp_extent((raw.y1 - raw.y0) / ih);
  det.keypoints.reserve(raw.keypoints.size());
  for (const Vec2& kpt : raw.keypoints) {
    det.keypoints.push_back({kpt.u / iw, kpt.v / ih});
  }
  det.confidence = std::clamp(raw.confidence, 0.0, 1.0);
  det.frame_index = raw.frame_index;
  det.source_id = raw.source_id;
  return det;
}

const std::string& LabelSet::name_of(int class_id) const {
  if (class_id < 0 || class_id >= count()) {
    throw Error(ErrorCode::InvalidInput,
                "class id " + std::to_string(class_id) + " out of range");
  }
  return labels[static_cast<std::size_t>(class_id)].name;
}

LabelSet validate_labels(LabelSet labels) {
  if (labels.labels.size() < 2) {
    throw Error(ErrorCode::Schema, "label set needs at least two classes");
  }
  std::set<std::string> names;
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    const GestureLabel& label = labels.labels[i];
    if (label.class_id != static_cast<int>(i)) {
      throw Error(ErrorCode::Schema,
                  "label ids must be dense, expected " + std::to_string(i) +
                      " got " + std::to_string(label.class_id));
    }
    if (!names.insert(label.name).second) {
      throw Error(ErrorCode::Schema, "duplicate label name " + label.name);
    }
  }
  if (labels.labels[0].name != "negative") {
    throw Error(ErrorCode::Schema, "class 0 must be named \"negative\"");
  }
  return labels;
}

LabelSet default_labels() {
  return LabelSet{{{0, "negative"}, {1, "lwave"}, {2, "rwave"}}};
}

const HandDetection& HandTrace::latest() const {
  if (history_.empty()) {
    throw Error(ErrorCode::Logic, "trace has no history");
  }
  return history_.back();
}

void HandTrace::append(const HandDetection& detection) {
  if (state_ == TraceState::Terminated) {
    throw Error(ErrorCode::Logic, "terminated trace receives no updates");
  }
  if (!history_.empty() &&
      detection.frame_index <= history_.back().frame_index) {
    throw Error(ErrorCode::Logic, "trace history must advance in frame index");
  }
  history_.push_back(detection);
  if (history_.size() > capacity_) {
    history_.pop_front();
  }
  misses_ = 0;
}

}  // namespace lehgr
