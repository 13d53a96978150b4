#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "lehgr/tracking.hpp"
#include "lehgr/types.hpp"

namespace lehgr {

enum class FeatureMode { Motion, Box };

// One frame of temporal motion features. Motion mode: x_v holds the
// per-keypoint velocity pairs (2K values, (du, dv) interleaved) and x_e the
// skeleton edge vectors (2|E| values). Box mode: x_v holds (cx, cy, w, h)
// and x_e is empty.
struct MotionFrame {
  std::int64_t frame_index = 0;
  std::vector<double> x_v;
  std::vector<double> x_e;

  std::size_t width() const { return x_v.size() + x_e.size(); }
  // x_v followed by x_e.
  std::vector<double> stacked() const;

  friend bool operator==(const MotionFrame&, const MotionFrame&) = default;
};

struct MotionFeatureSequence {
  FeatureMode mode = FeatureMode::Motion;
  int keypoint_count = 0;
  int edge_count = 0;
  std::vector<MotionFrame> frames;

  std::size_t length() const { return frames.size(); }
  std::size_t frame_width() const;
  std::size_t velocity_width() const;
  std::size_t shape_width() const;

  friend bool operator==(const MotionFeatureSequence&,
                         const MotionFeatureSequence&) = default;
};

// Per-keypoint coordinate difference, current minus previous, for the
// window entry at position t. Throws Error(Logic) when t has no
// predecessor.
std::vector<double> velocity_features(std::span<const HandDetection> window,
                                      std::size_t t);

// Edge vectors x_pi - x_pj in skeleton declaration order.
std::vector<double> edge_features(const HandDetection& detection,
                                  const SkeletonSpec& skeleton);

// T motion frames over the trace's last T+1 detections (the velocity
// difference consumes one). The covered history must be gap-free in frame
// index. Throws WindowUnderflowError when history is too short.
MotionFeatureSequence motion_sequence(const HandTrace& trace, std::size_t T,
                                      const SkeletonSpec& skeleton);

// T frames of (cx, cy, w, h) over the trace's last T detections.
MotionFeatureSequence box_sequence(const HandTrace& trace, std::size_t T);

// Splits a trace history into maximal gap-free runs and featurizes each in
// full. Runs too short to produce a frame are dropped.
std::vector<MotionFeatureSequence> featurize_runs(const HandTrace& trace,
                                                  FeatureMode mode,
                                                  const SkeletonSpec& skeleton);

// CSV with one row per feature frame: trace_id, frame, then columns
// kpt{i}_vu, kpt{i}_vv and edge{i}_du, edge{i}_dv (motion mode) or
// box_cx, box_cy, box_w, box_h (box mode).
void write_feature_csv(
    std::ostream& out,
    const std::vector<std::pair<std::int64_t, MotionFeatureSequence>>& rows);

}  // namespace lehgr
