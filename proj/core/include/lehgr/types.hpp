#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace lehgr {

// Normalized image coordinate pair (u horizontal, v vertical).
struct Vec2 {
  double u = 0.0;
  double v = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

// Hand skeleton layout: keypoint count plus the undirected edge list that
// defines which keypoint pairs form shape features. Edge order is part of
// the contract; downstream feature vectors follow declaration order.
struct SkeletonSpec {
  std::string name = "hand";
  int keypoint_count = 0;
  std::vector<std::pair<int, int>> edges;

  friend bool operator==(const SkeletonSpec&, const SkeletonSpec&) = default;
};

// Validates indices, duplicates (unordered), and non-emptiness.
// Throws Error(Schema) naming the offending field.
SkeletonSpec validate_skeleton(SkeletonSpec spec);

// Default synthetic skeleton: wrist plus four fingertips, star edges
// from the wrist.
SkeletonSpec star_skeleton();

// Axis-aligned box in normalized image coordinates, center/extent form.
struct BoundingBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  double area() const { return w * h; }
  double diagonal() const;
  double left() const { return cx - 0.5 * w; }
  double right() const { return cx + 0.5 * w; }
  double top() const { return cy - 0.5 * h; }
  double bottom() const { return cy + 0.5 * h; }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

// One frame's observation of one hand, already normalized to [0,1]
// image coordinates. source_id carries the ground-truth hand identity in
// synthetic streams and is absent on real data.
struct HandDetection {
  BoundingBox box;
  std::vector<Vec2> keypoints;
  double confidence = 1.0;
  std::int64_t frame_index = 0;
  std::optional<int> source_id;

  friend bool operator==(const HandDetection&, const HandDetection&) = default;
};

// Raw detector output in pixel space; corner-form box.
struct PixelDetection {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;
  std::vector<Vec2> keypoints;
  double confidence = 1.0;
  std::int64_t frame_index = 0;
  std::optional<int> source_id;
};

// Divides all coordinates by the image size and converts the box to
// center/extent form. Centers are clamped to [-0.5, 1.5] and extents to
// (0, 1]. Throws Error(InvalidInput) on a non-positive image size or a
// degenerate box.
HandDetection normalize_detection(const PixelDetection& raw, int image_width,
                                  int image_height);

struct FrameObservation {
  std::int64_t frame_index = 0;
  std::int64_t timestamp_ms = 0;
  int image_width = 0;
  int image_height = 0;
  std::vector<HandDetection> detections;

  friend bool operator==(const FrameObservation&,
                         const FrameObservation&) = default;
};

struct GestureLabel {
  int class_id = 0;
  std::string name;

  friend bool operator==(const GestureLabel&, const GestureLabel&) = default;
};

// Dense label set; class 0 is reserved for "negative".
struct LabelSet {
  std::vector<GestureLabel> labels;

  int count() const { return static_cast<int>(labels.size()); }
  const std::string& name_of(int class_id) const;

  friend bool operator==(const LabelSet&, const LabelSet&) = default;
};

// Throws Error(Schema) unless ids are dense 0..C-1 and class 0 is named
// "negative".
LabelSet validate_labels(LabelSet labels);

// Default three-class set: negative, lwave, rwave.
LabelSet default_labels();

enum class TraceState { Active, Terminated };

// Persistent per-hand identity. History is a bounded ring of matched
// detections in strictly increasing frame order.
class HandTrace {
 public:
  HandTrace() = default;
  HandTrace(std::int64_t trace_id, std::size_t capacity)
      : trace_id_(trace_id), capacity_(capacity) {}

  std::int64_t trace_id() const { return trace_id_; }
  int misses() const { return misses_; }
  TraceState state() const { return state_; }
  std::size_t size() const { return history_.size(); }
  std::size_t capacity() const { return capacity_; }

  const std::deque<HandDetection>& history() const { return history_; }
  const HandDetection& latest() const;
  const HandDetection& at(std::size_t i) const { return history_[i]; }

  // Appends a matched detection and resets the miss counter. Throws
  // Error(Logic) if the trace is terminated or frame order regresses.
  void append(const HandDetection& detection);

  void record_miss() { ++misses_; }
  void terminate() { state_ = TraceState::Terminated; }

 private:
  std::int64_t trace_id_ = 0;
  std::size_t capacity_ = 64;
  std::deque<HandDetection> history_;
  int misses_ = 0;
  TraceState state_ = TraceState::Active;
};

}  // namespace lehgr
