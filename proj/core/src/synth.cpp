#include "lehgr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include "lehgr/error.hpp"

namespace lehgr {

namespace {

// Canonical rigid hand layout around the palm center: index 0 is the
// wrist below the palm, the rest are fingertips fanned above it. Offsets
// are zero-mean so the keypoint centroid coincides with the palm under
// any rigid rotation.
std::vector<Vec2> keypoint_offsets(int keypoint_count) {
  std::vector<Vec2> offsets(static_cast<std::size_t>(keypoint_count));
  if (keypoint_count == 1) {
    offsets[0] = {0.0, 0.0};
    return offsets;
  }
  if (keypoint_count == 5) {
    offsets[0] = {0.0, 0.74};
    offsets[1] = {-0.4, -0.11};
    offsets[2] = {-0.15, -0.26};
    offsets[3] = {0.15, -0.26};
    offsets[4] = {0.4, -0.11};
    return offsets;
  }
  const int tips = keypoint_count - 1;
  offsets[0] = {0.0, 0.74};
  for (int i = 1; i <= tips; ++i) {
    const double span = tips > 1
                            ? -0.4 + 0.8 * static_cast<double>(i - 1) /
                                  static_cast<double>(tips - 1)
                            : 0.0;
    offsets[static_cast<std::size_t>(i)] = {span,
                                            -0.74 / static_cast<double>(tips)};
  }
  return offsets;
}

std::vector<Vec2> rotated(const std::vector<Vec2>& offsets, double angle) {
  if (angle == 0.0) return offsets;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  std::vector<Vec2> out;
  out.reserve(offsets.size());
  for (const Vec2& o : offsets) {
    out.push_back({c * o.u - s * o.v, s * o.u + c * o.v});
  }
  return out;
}

HandDetection detection_at(const Vec2& palm, double scale,
                           const std::vector<Vec2>& offsets,
                           std::int64_t frame_index,
                           std::optional<int> source_id) {
  HandDetection det;
  det.frame_index = frame_index;
  det.source_id = source_id;
  det.confidence = 1.0;
  det.keypoints.reserve(offsets.size());
  double min_u = palm.u, max_u = palm.u, min_v = palm.v, max_v = palm.v;
  for (const Vec2& offset : offsets) {
    const Vec2 kpt{palm.u + offset.u * scale, palm.v + offset.v * scale};
    min_u = std::min(min_u, kpt.u);
    max_u = std::max(max_u, kpt.u);
    min_v = std::min(min_v, kpt.v);
    max_v = std::max(max_v, kpt.v);
    det.keypoints.push_back(kpt);
  }
  double extent_u = std::max(max_u - min_u, 0.1 * scale);
  double extent_v = std::max(max_v - min_v, 0.1 * scale);
  det.box.cx = (min_u + max_u) / 2.0;
  det.box.cy = (min_v + max_v) / 2.0;
  det.box.w = extent_u * 1.2;
  det.box.h = extent_v * 1.2;
  return det;
}

void validate_script(const GestureScript& script) {
  if (script.start >= script.end) {
    throw Error(ErrorCode::Script, "script span must satisfy start < end");
  }
  if (script.amplitude < 0.0) {
    throw Error(ErrorCode::Script, "amplitude must be >= 0");
  }
  if (script.period < 2) {
    throw Error(ErrorCode::Script, "period must be >= 2");
  }
  if (!(script.scale > 0.0)) {
    throw Error(ErrorCode::Script, "hand scale must be positive");
  }
}

struct ScriptTrace {
  std::vector<HandDetection> detections;
  Vec2 final_palm;
};

ScriptTrace generate_script_trace(const GestureScript& script,
                                  const SkeletonSpec& skeleton, Rng& rng) {
  validate_script(script);
  const Vec2 base = script.base.value_or(Vec2{0.5, 0.5});
  const std::vector<Vec2> offsets = keypoint_offsets(skeleton.keypoint_count);

  TrajectoryKind kind = script.kind;
  if (kind == TrajectoryKind::NegativeAuto) {
    switch (rng.below(3)) {
      case 0: kind = TrajectoryKind::NegativeHold; break;
      case 1: kind = TrajectoryKind::NegativeDrift; break;
      default: kind = TrajectoryKind::NegativeBob; break;
    }
  }
  Vec2 drift_velocity{0.0, 0.0};
  if (kind == TrajectoryKind::NegativeDrift) {
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double speed =
        script.amplitude / static_cast<double>(script.period);
    drift_velocity = {speed * std::cos(angle), speed * std::sin(angle)};
  }

  auto palm_at = [&](std::int64_t rel) -> Vec2 {
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(rel) /
                         static_cast<double>(script.period);
    switch (kind) {
      case TrajectoryKind::WaveLeft:
        return {base.u - script.amplitude * std::sin(phase), base.v};
      case TrajectoryKind::WaveRight:
        return {base.u + script.amplitude * std::sin(phase), base.v};
      case TrajectoryKind::NegativeDrift:
        return {base.u + drift_velocity.u * static_cast<double>(rel),
                base.v + drift_velocity.v * static_cast<double>(rel)};
      case TrajectoryKind::NegativeBob:
        return {base.u, base.v + script.amplitude * std::sin(phase)};
      default:
        return base;
    }
  };

  // Waving hands lean into the wave direction: a rigid tilt with a signed
  // steady part plus an oscillation, scaled by the amplitude and ramped
  // over three frames at each end of the gesture.
  const bool is_wave = kind == TrajectoryKind::WaveLeft ||
                       kind == TrajectoryKind::WaveRight;
  const double tilt_sign = kind == TrajectoryKind::WaveLeft ? -1.0 : 1.0;
  const std::int64_t span = script.end - script.start;
  auto tilt_at = [&](std::int64_t rel) -> double {
    if (!is_wave) return 0.0;
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(rel) /
                         static_cast<double>(script.period);
    const double envelope = std::clamp(
        static_cast<double>(std::min(rel, span - 1 - rel)) / 3.0, 0.0, 1.0);
    return tilt_sign * envelope * script.amplitude *
           (1.4 + 0.8 * std::sin(phase));
  };

  ScriptTrace trace;
  trace.detections.reserve(static_cast<std::size_t>(span));
  for (std::int64_t frame = script.start; frame < script.end; ++frame) {
    const std::int64_t rel = frame - script.start;
    const Vec2 palm = palm_at(rel);
    trace.detections.push_back(detection_at(
        palm, script.scale, rotated(offsets, tilt_at(rel)), frame,
        script.source_id));
  }
  trace.final_palm = palm_at(span - 1);
  return trace;
}

}  // namespace

std::vector<HandDetection> synth_gesture_trace(const GestureScript& script,
                                               const SkeletonSpec& skeleton,
                                               Rng& rng) {
  return generate_script_trace(script, skeleton, rng).detections;
}

SceneOutput synth_scene(const std::vector<GestureScript>& scripts,
                        const NoiseConfig& noise, std::int64_t n_frames,
                        const SkeletonSpec& skeleton) {
  if (noise.dropout < 0.0 || noise.dropout > 1.0 ||
      noise.false_positive_rate < 0.0 || noise.false_positive_rate >= 1.0 ||
      noise.keypoint_jitter < 0.0 || noise.box_jitter < 0.0 ||
      noise.false_positive_persistence < 1) {
    throw Error(ErrorCode::Script, "bad noise configuration");
  }

  // Scripts ordered by (source, start); spans of one hand must not overlap
  // and must fit the stream.
  std::vector<std::size_t> order(scripts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::make_pair(scripts[a].source_id, scripts[a].start) <
           std::make_pair(scripts[b].source_id, scripts[b].start);
  });
  for (std::size_t i = 0; i < order.size(); ++i) {
    const GestureScript& script = scripts[order[i]];
    validate_script(script);
    if (script.start < 0 || script.end > n_frames) {
      throw Error(ErrorCode::Script,
                  "script for hand " + std::to_string(script.source_id) +
                      " exceeds the stream bounds");
    }
    if (i > 0) {
      const GestureScript& prev = scripts[order[i - 1]];
      if (prev.source_id == script.source_id && script.start < prev.end) {
        throw Error(ErrorCode::Script,
                    "overlapping scripts for hand " +
                        std::to_string(script.source_id));
      }
    }
  }

  Rng rng(noise.seed);

  // Script trajectories, chaining each hand's base from its previous
  // script's final position.
  std::vector<ScriptTrace> traces(scripts.size());
  std::map<int, Vec2> last_palm;
  for (std::size_t idx : order) {
    GestureScript script = scripts[idx];
    if (!script.base) {
      auto it = last_palm.find(script.source_id);
      script.base = it != last_palm.end() ? it->second : Vec2{0.5, 0.5};
    }
    traces[idx] = generate_script_trace(script, skeleton, rng);
    last_palm[script.source_id] = traces[idx].final_palm;
  }

  const std::vector<Vec2> offsets = keypoint_offsets(skeleton.keypoint_count);

  struct Clutter {
    Vec2 base;
    Vec2 velocity;
    double scale;
    std::int64_t born;
    std::int64_t expires;
  };
  std::vector<Clutter> clutter;

  auto apply_jitter = [&](HandDetection det) {
    if (noise.keypoint_jitter > 0.0) {
      for (Vec2& kpt : det.keypoints) {
        kpt.u += rng.normal(0.0, noise.keypoint_jitter);
        kpt.v += rng.normal(0.0, noise.keypoint_jitter);
      }
    }
    if (noise.box_jitter > 0.0) {
      det.box.cx = std::clamp(det.box.cx + rng.normal(0.0, noise.box_jitter),
                              -0.5, 1.5);
      det.box.cy = std::clamp(det.box.cy + rng.normal(0.0, noise.box_jitter),
                              -0.5, 1.5);
      det.box.w = std::clamp(
          det.box.w * std::max(0.2, 1.0 + rng.normal(0.0, noise.box_jitter)),
          1e-3, 1.0);
      det.box.h = std::clamp(
          det.box.h * std::max(0.2, 1.0 + rng.normal(0.0, noise.box_jitter)),
          1e-3, 1.0);
    }
    return det;
  };

  SceneOutput output;
  output.frames.reserve(static_cast<std::size_t>(n_frames));

  for (std::int64_t frame = 0; frame < n_frames; ++frame) {
    // New clutter first so it emits this frame.
    if (noise.false_positive_rate > 0.0 &&
        rng.bernoulli(noise.false_positive_rate)) {
      Clutter fp;
      fp.base = {rng.uniform(0.15, 0.85), rng.uniform(0.15, 0.85)};
      fp.scale = rng.uniform(0.08, 0.18);
      const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double speed = rng.uniform(0.0, 0.004);
      fp.velocity = {speed * std::cos(angle), speed * std::sin(angle)};
      fp.born = frame;
      fp.expires = frame + noise.false_positive_persistence;
      clutter.push_back(fp);
    }

    FrameObservation observation;
    observation.frame_index = frame;
    observation.timestamp_ms = frame * 1000 / 30;
    observation.image_width = 640;
    observation.image_height = 480;

    for (std::size_t idx : order) {
      const GestureScript& script = scripts[idx];
      if (frame < script.start || frame >= script.end) continue;
      if (noise.dropout > 0.0 && rng.bernoulli(noise.dropout)) continue;
      const HandDetection& det =
          traces[idx].detections[static_cast<std::size_t>(frame - script.start)];
      observation.detections.push_back(apply_jitter(det));
    }

    for (const Clutter& fp : clutter) {
      if (frame >= fp.expires) continue;
      const double age = static_cast<double>(frame - fp.born);
      const Vec2 palm{fp.base.u + fp.velocity.u * age,
                      fp.base.v + fp.velocity.v * age};
      HandDetection det =
          detection_at(palm, fp.scale, offsets, frame, std::nullopt);
      observation.detections.push_back(apply_jitter(det));
    }
    std::erase_if(clutter,
                  [&](const Clutter& fp) { return frame + 1 >= fp.expires; });

    output.frames.push_back(std::move(observation));
  }

  for (std::size_t idx : order) {
    const GestureScript& script = scripts[idx];
    if (script.class_id >= 1) {
      output.segments.push_back({script.start, script.end, script.class_id});
    }
  }
  std::sort(output.segments.begin(), output.segments.end(),
            [](const AnnotatedSegment& a, const AnnotatedSegment& b) {
              return std::tie(a.start, a.end, a.class_id) <
                     std::tie(b.start, b.end, b.class_id);
            });
  return output;
}

}  // namespace lehgr
