#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lehgr/dataset.hpp"
#include "lehgr/rng.hpp"
#include "lehgr/types.hpp"

namespace lehgr {

// Parametric hand trajectories. Waves are horizontal sinusoids (left
// starts toward negative u, right toward positive u); negatives hold,
// drift slowly, or bob vertically. NegativeAuto picks one of the three at
// generation time.
enum class TrajectoryKind {
  WaveLeft,
  WaveRight,
  NegativeHold,
  NegativeDrift,
  NegativeBob,
  NegativeAuto,
};

struct GestureScript {
  TrajectoryKind kind = TrajectoryKind::NegativeHold;
  int class_id = 0;  // annotated category; 0 emits no annotation
  int source_id = 0;
  std::int64_t start = 0;
  std::int64_t end = 0;  // [start, end)
  double amplitude = 0.15;
  int period = 20;
  std::optional<Vec2> base;  // absent: chain from the same hand's last position
  double scale = 0.12;
};

struct NoiseConfig {
  double keypoint_jitter = 0.0;
  double box_jitter = 0.0;
  double dropout = 0.0;
  double false_positive_rate = 0.0;
  int false_positive_persistence = 1;
  std::uint64_t seed = 0;
};

// Noise-free detections for one script over [start, end). The palm follows
// the scripted trajectory; keypoints are rigid offsets scaled by the hand
// scale; the box bounds the keypoints with a 10% margin per side.
std::vector<HandDetection> synth_gesture_trace(const GestureScript& script,
                                               const SkeletonSpec& skeleton,
                                               Rng& rng);

struct SceneOutput {
  std::vector<FrameObservation> frames;
  std::vector<AnnotatedSegment> segments;
};

// Composes scripts into a jittered detection stream with dropouts and
// false positives. Scripted detections carry their source_id; clutter
// carries none. Deterministic per NoiseConfig::seed.
SceneOutput synth_scene(const std::vector<GestureScript>& scripts,
                        const NoiseConfig& noise, std::int64_t n_frames,
                        const SkeletonSpec& skeleton);

}  // namespace lehgr
