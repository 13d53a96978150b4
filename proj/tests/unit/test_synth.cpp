#include <doctest.h>

#include <cmath>
#include <numbers>

#include "lehgr/error.hpp"
#include "lehgr/features.hpp"
#include "lehgr/synth.hpp"
#include "lehgr/tracking.hpp"
#include "test_support.hpp"

using namespace lehgr;

TEST_CASE("zero amplitude is a stationary hand") {
  const SkeletonSpec skeleton = star_skeleton();
  GestureScript script;
  script.kind = TrajectoryKind::WaveLeft;
  script.amplitude = 0.0;
  script.start = 0;
  script.end = 20;
  script.base = Vec2{0.5, 0.5};
  Rng rng(1);
  const std::vector<HandDetection> trace =
      synth_gesture_trace(script, skeleton, rng);
  REQUIRE(trace.size() == 20);
  for (const HandDetection& det : trace) {
    CHECK(det.box == trace.front().box);
    CHECK(det.keypoints == trace.front().keypoints);
  }
}

namespace {

double palm_u(const HandDetection& det) {
  // Keypoint offsets are zero-mean, so the centroid is the palm under any
  // rigid pose.
  double sum = 0.0;
  for (const Vec2& kpt : det.keypoints) {
    sum += kpt.u;
  }
  return sum / static_cast<double>(det.keypoints.size());
}

}  // namespace

TEST_CASE("left wave follows the closed-form sinusoid") {
  const SkeletonSpec skeleton = star_skeleton();
  GestureScript script;
  script.kind = TrajectoryKind::WaveLeft;
  script.amplitude = 0.2;
  script.period = 20;
  script.start = 0;
  script.end = 20;
  script.base = Vec2{0.5, 0.5};
  Rng rng(1);
  const std::vector<HandDetection> trace =
      synth_gesture_trace(script, skeleton, rng);

  // Palm u at frame 5 is base_u - 0.2 * sin(2*pi*5/20) = base_u - 0.2.
  CHECK(palm_u(trace[5]) == doctest::Approx(0.5 - 0.2).epsilon(1e-12));
  for (std::int64_t f = 0; f < 20; ++f) {
    const double expected =
        0.5 - 0.2 * std::sin(2.0 * std::numbers::pi * static_cast<double>(f) / 20.0);
    CHECK(palm_u(trace[static_cast<std::size_t>(f)]) ==
          doctest::Approx(expected).epsilon(1e-12));
  }
  // Right wave mirrors it.
  script.kind = TrajectoryKind::WaveRight;
  Rng rng2(1);
  const std::vector<HandDetection> right =
      synth_gesture_trace(script, skeleton, rng2);
  CHECK(palm_u(right[5]) == doctest::Approx(0.5 + 0.2).epsilon(1e-12));
}

TEST_CASE("waves lean into their direction, negatives stay upright") {
  const SkeletonSpec skeleton = star_skeleton();
  GestureScript script;
  script.kind = TrajectoryKind::WaveLeft;
  script.amplitude = 0.2;
  script.period = 20;
  script.start = 0;
  script.end = 20;
  script.base = Vec2{0.5, 0.5};
  Rng rng(1);
  const std::vector<HandDetection> left =
      synth_gesture_trace(script, skeleton, rng);
  script.kind = TrajectoryKind::WaveRight;
  Rng rng2(1);
  const std::vector<HandDetection> right =
      synth_gesture_trace(script, skeleton, rng2);
  script.kind = TrajectoryKind::NegativeHold;
  Rng rng3(1);
  const std::vector<HandDetection> hold =
      synth_gesture_trace(script, skeleton, rng3);

  // The wrist sits above the palm; a signed tilt moves its u-offset.
  const double left_wrist = left[10].keypoints[0].u - palm_u(left[10]);
  const double right_wrist = right[10].keypoints[0].u - palm_u(right[10]);
  const double hold_wrist = hold[10].keypoints[0].u - palm_u(hold[10]);
  CHECK(hold_wrist == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(left_wrist > 0.01);   // leaning left tips the wrist rightward
  CHECK(right_wrist < -0.01);
}

TEST_CASE("scenes are bit-identical per seed") {
  const SkeletonSpec skeleton = star_skeleton();
  std::vector<GestureScript> scripts(2);
  scripts[0].kind = TrajectoryKind::WaveLeft;
  scripts[0].class_id = 1;
  scripts[0].source_id = 0;
  scripts[0].start = 5;
  scripts[0].end = 45;
  scripts[1].kind = TrajectoryKind::NegativeAuto;
  scripts[1].source_id = 1;
  scripts[1].start = 0;
  scripts[1].end = 60;
  scripts[1].base = Vec2{0.3, 0.6};

  NoiseConfig noise;
  noise.keypoint_jitter = 0.01;
  noise.box_jitter = 0.01;
  noise.dropout = 0.1;
  noise.false_positive_rate = 0.05;
  noise.seed = 31337;

  const SceneOutput a = synth_scene(scripts, noise, 60, skeleton);
  const SceneOutput b = synth_scene(scripts, noise, 60, skeleton);
  CHECK(a.frames == b.frames);
  CHECK(a.segments == b.segments);

  NoiseConfig other = noise;
  other.seed = 31338;
  const SceneOutput c = synth_scene(scripts, other, 60, skeleton);
  CHECK(a.frames != c.frames);
}

TEST_CASE("one script with zero noise gives one detection per frame") {
  const SkeletonSpec skeleton = star_skeleton();
  GestureScript script;
  script.kind = TrajectoryKind::NegativeHold;
  script.start = 0;
  script.end = 40;
  const SceneOutput scene = synth_scene({script}, {}, 40, skeleton);
  REQUIRE(scene.frames.size() == 40);
  for (const FrameObservation& frame : scene.frames) {
    CHECK(frame.detections.size() == 1);
    CHECK(frame.detections[0].source_id == 0);
  }
}

TEST_CASE("dropout probability one empties the stream") {
  const SkeletonSpec skeleton = star_skeleton();
  GestureScript script;
  script.kind = TrajectoryKind::NegativeHold;
  script.start = 0;
  script.end = 10;
  NoiseConfig noise;
  noise.dropout = 1.0;
  const SceneOutput scene = synth_scene({script}, noise, 10, skeleton);
  for (const FrameObservation& frame : scene.frames) {
    CHECK(frame.detections.empty());
  }
}

TEST_CASE("annotations stay inside the stream and overlap checks fire") {
  const SkeletonSpec skeleton = star_skeleton();
  GestureScript script;
  script.kind = TrajectoryKind::WaveRight;
  script.class_id = 2;
  script.start = 10;
  script.end = 50;

  const SceneOutput scene = synth_scene({script}, {}, 60, skeleton);
  REQUIRE(scene.segments.size() == 1);
  CHECK(scene.segments[0].start >= 0);
  CHECK(scene.segments[0].end <= 60);
  CHECK(scene.segments[0].class_id == 2);

  GestureScript overflow = script;
  overflow.end = 100;
  CHECK_THROWS_AS(synth_scene({overflow}, {}, 60, skeleton), Error);

  GestureScript clash = script;
  clash.start = 20;
  clash.end = 30;
  CHECK_THROWS_AS(synth_scene({script, clash}, {}, 60, skeleton), Error);
}

TEST_CASE("noise-free single hand round trips through tracking and features") {
  // A bob is a pure translation, so every keypoint velocity equals the
  // closed-form palm displacement.
  const SkeletonSpec skeleton = star_skeleton();
  GestureScript script;
  script.kind = TrajectoryKind::NegativeBob;
  script.amplitude = 0.15;
  script.period = 24;
  script.start = 0;
  script.end = 48;
  script.base = Vec2{0.5, 0.5};
  const SceneOutput scene = synth_scene({script}, {}, 48, skeleton);

  TraceStore store;
  for (const FrameObservation& frame : scene.frames) {
    store.step(frame);
  }
  REQUIRE(store.active().size() == 1);
  const HandTrace& trace = store.active().begin()->second;
  const MotionFeatureSequence seq = motion_sequence(trace, 47, skeleton);

  for (std::size_t f = 0; f < seq.frames.size(); ++f) {
    const auto t = static_cast<double>(f + 1);
    const double expected_dv =
        0.15 * (std::sin(2.0 * std::numbers::pi * t / 24.0) -
                std::sin(2.0 * std::numbers::pi * (t - 1.0) / 24.0));
    for (std::size_t k = 0; k < seq.frames[f].x_v.size(); k += 2) {
      CHECK(seq.frames[f].x_v[k] == doctest::Approx(0.0).epsilon(1e-12));
      CHECK(seq.frames[f].x_v[k + 1] ==
            doctest::Approx(expected_dv).epsilon(1e-9));
    }
  }
}

TEST_CASE("false positives carry no source id and can persist") {
  const SkeletonSpec skeleton = star_skeleton();
  GestureScript script;
  script.kind = TrajectoryKind::NegativeHold;
  script.start = 0;
  script.end = 30;
  script.base = Vec2{0.2, 0.2};

  NoiseConfig noise;
  noise.false_positive_rate = 0.5;
  noise.false_positive_persistence = 3;
  noise.seed = 4;

  const SceneOutput scene = synth_scene({script}, noise, 30, skeleton);
  std::size_t clutter = 0;
  for (const FrameObservation& frame : scene.frames) {
    for (const HandDetection& det : frame.detections) {
      if (!det.source_id) ++clutter;
    }
  }
  CHECK(clutter > 0);
}
