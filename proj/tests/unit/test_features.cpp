#include <doctest.h>

#include <sstream>

#include "lehgr/error.hpp"
#include "lehgr/features.hpp"
#include "lehgr/rng.hpp"
#include "lehgr/synth.hpp"
#include "test_support.hpp"

using namespace lehgr;
using lehgr::testing::make_detection;
using lehgr::testing::make_trace;

namespace {

HandDetection star_detection(double palm_u, double palm_v, std::int64_t frame) {
  return make_detection(palm_u, palm_v, 0.12, 0.12,
                        {{palm_u, palm_v + 0.06},
                         {palm_u - 0.045, palm_v - 0.05},
                         {palm_u - 0.015, palm_v - 0.06},
                         {palm_u + 0.015, palm_v - 0.06},
                         {palm_u + 0.045, palm_v - 0.05}},
                        frame);
}

}  // namespace

TEST_CASE("velocity of a stationary hand is zero") {
  const std::vector<HandDetection> window{star_detection(0.5, 0.5, 0),
                                          star_detection(0.5, 0.5, 1)};
  const std::vector<double> v = velocity_features(window, 1);
  for (double value : v) {
    CHECK(value == 0.0);
  }
}

TEST_CASE("velocity is the direct coordinate difference") {
  const std::vector<HandDetection> window{
      make_detection(0.5, 0.5, 0.2, 0.2, {{0.1, 0.1}}, 0),
      make_detection(0.5, 0.5, 0.2, 0.2, {{0.3, 0.4}}, 1)};
  const std::vector<double> v = velocity_features(window, 1);
  REQUIRE(v.size() == 2);
  CHECK(v[0] == doctest::Approx(0.2));
  CHECK(v[1] == doctest::Approx(0.3));
}

TEST_CASE("uniform translation gives a uniform velocity") {
  const double du = 0.07, dv = -0.03;
  HandDetection next = star_detection(0.5, 0.5, 1);
  for (Vec2& kpt : next.keypoints) {
    kpt.u += du;
    kpt.v += dv;
  }
  const std::vector<HandDetection> window{star_detection(0.5, 0.5, 0), next};
  const std::vector<double> v = velocity_features(window, 1);
  for (std::size_t k = 0; k < v.size(); k += 2) {
    CHECK(v[k] == doctest::Approx(du));
    CHECK(v[k + 1] == doctest::Approx(dv));
  }
}

TEST_CASE("the first window entry has no predecessor") {
  const std::vector<HandDetection> window{star_detection(0.5, 0.5, 0)};
  CHECK_THROWS_AS(velocity_features(window, 0), Error);
}

TEST_CASE("edge vectors follow declaration order and direction") {
  SkeletonSpec skeleton;
  skeleton.keypoint_count = 2;
  skeleton.edges = {{1, 0}};  // fingertip minus wrist
  const HandDetection det =
      make_detection(0.5, 0.4, 0.2, 0.3, {{0.5, 0.5}, {0.5, 0.3}});
  const std::vector<double> e = edge_features(det, skeleton);
  REQUIRE(e.size() == 2);
  CHECK(e[0] == doctest::Approx(0.0));
  CHECK(e[1] == doctest::Approx(-0.2));
}

TEST_CASE("edge vectors ignore translation") {
  const SkeletonSpec skeleton = star_skeleton();
  HandDetection det = star_detection(0.4, 0.4, 0);
  const std::vector<double> before = edge_features(det, skeleton);
  for (Vec2& kpt : det.keypoints) {
    kpt.u += 0.21;
    kpt.v -= 0.13;
  }
  const std::vector<double> after = edge_features(det, skeleton);
  for (std::size_t i = 0; i < before.size(); ++i) {
    CHECK(after[i] == doctest::Approx(before[i]).epsilon(1e-12));
  }
}

TEST_CASE("star skeleton edge features have width 2|E| = 8") {
  const SkeletonSpec skeleton = star_skeleton();
  const std::vector<double> e =
      edge_features(star_detection(0.5, 0.5, 0), skeleton);
  CHECK(e.size() == 8);
}

TEST_CASE("edge_features validates the skeleton") {
  const SkeletonSpec skeleton = star_skeleton();
  const HandDetection two_points =
      make_detection(0.5, 0.5, 0.2, 0.2, {{0.5, 0.5}, {0.5, 0.3}});
  CHECK_THROWS_AS(edge_features(two_points, skeleton), Error);
}

TEST_CASE("motion_sequence consumes one frame for velocity") {
  const SkeletonSpec skeleton = star_skeleton();
  std::vector<HandDetection> history;
  for (int f = 0; f < 14; ++f) {
    history.push_back(star_detection(0.5, 0.5, f));
  }
  const HandTrace trace = make_trace(0, history);
  const MotionFeatureSequence seq = motion_sequence(trace, 13, skeleton);
  CHECK(seq.length() == 13);
  CHECK(seq.frame_width() == 18);  // 2K + 2|E|
  for (const MotionFrame& frame : seq.frames) {
    for (double value : frame.x_v) {
      CHECK(value == 0.0);
    }
    CHECK(frame.x_e == seq.frames.front().x_e);
  }
}

TEST_CASE("motion_sequence underflow carries the shortfall") {
  const SkeletonSpec skeleton = star_skeleton();
  const HandTrace trace = make_trace(0, {star_detection(0.5, 0.5, 0),
                                         star_detection(0.5, 0.5, 1)});
  try {
    motion_sequence(trace, 13, skeleton);
    FAIL("expected WindowUnderflowError");
  } catch (const WindowUnderflowError& e) {
    CHECK(e.needed() == 14);
    CHECK(e.available() == 2);
    CHECK(e.shortfall() == 12);
  }
}

TEST_CASE("motion windows refuse frame gaps") {
  const SkeletonSpec skeleton = star_skeleton();
  HandTrace trace(0, 64);
  trace.append(star_detection(0.5, 0.5, 0));
  trace.append(star_detection(0.5, 0.5, 1));
  trace.append(star_detection(0.5, 0.5, 3));  // gap at 2
  CHECK_THROWS_AS(motion_sequence(trace, 2, skeleton), Error);
}

TEST_CASE("left wave has negative mean horizontal velocity while swinging out") {
  const SkeletonSpec skeleton = star_skeleton();
  GestureScript script;
  script.kind = TrajectoryKind::WaveLeft;
  script.start = 0;
  script.end = 6;  // first quarter of a period-20 wave: monotone leftward
  script.amplitude = 0.2;
  script.period = 20;
  script.base = Vec2{0.5, 0.5};
  Rng rng(1);
  const HandTrace trace = make_trace(0, synth_gesture_trace(script, skeleton, rng));
  const MotionFeatureSequence seq = motion_sequence(trace, 5, skeleton);

  double mean_du = 0.0;
  for (const MotionFrame& frame : seq.frames) {
    for (std::size_t k = 0; k < frame.x_v.size(); k += 2) {
      mean_du += frame.x_v[k];
    }
  }
  CHECK(mean_du < 0.0);
}

TEST_CASE("adjacent windows with one shared frame reproduce the union") {
  const SkeletonSpec skeleton = star_skeleton();
  Rng rng(7);
  std::vector<HandDetection> history;
  for (int f = 0; f < 21; ++f) {
    history.push_back(star_detection(0.3 + 0.01 * f, 0.5 - 0.005 * f, f));
  }

  const HandTrace full = make_trace(0, history);
  const MotionFeatureSequence whole = motion_sequence(full, 20, skeleton);

  const HandTrace first_half = make_trace(
      0, std::vector<HandDetection>(history.begin(), history.begin() + 11));
  const HandTrace second_half = make_trace(
      0, std::vector<HandDetection>(history.begin() + 10, history.end()));
  const MotionFeatureSequence a = motion_sequence(first_half, 10, skeleton);
  const MotionFeatureSequence b = motion_sequence(second_half, 10, skeleton);

  MotionFeatureSequence joined = a;
  joined.frames.insert(joined.frames.end(), b.frames.begin(), b.frames.end());
  CHECK(joined == whole);
}

TEST_CASE("translation invariance of motion-mode features") {
  // Dyadic coordinates keep the translation exact, so the invariance is
  // checked bit-for-bit rather than within a tolerance.
  const SkeletonSpec skeleton = star_skeleton();
  std::vector<HandDetection> history, shifted;
  const double du = 0.125, dv = -0.0625;
  for (int f = 0; f < 10; ++f) {
    const double palm_u = 0.25 + static_cast<double>(f) / 64.0;
    HandDetection det = make_detection(palm_u, 0.5, 0.125, 0.125,
                                       {{palm_u, 0.5 + 0.0625},
                                        {palm_u - 0.046875, 0.5 - 0.0625},
                                        {palm_u - 0.015625, 0.5 - 0.078125},
                                        {palm_u + 0.015625, 0.5 - 0.078125},
                                        {palm_u + 0.046875, 0.5 - 0.0625}},
                                       f);
    history.push_back(det);
    for (Vec2& kpt : det.keypoints) {
      kpt.u += du;
      kpt.v += dv;
    }
    det.box.cx += du;
    det.box.cy += dv;
    shifted.push_back(det);
  }
  const MotionFeatureSequence base =
      motion_sequence(make_trace(0, history), 9, skeleton);
  const MotionFeatureSequence moved =
      motion_sequence(make_trace(0, shifted), 9, skeleton);
  for (std::size_t f = 0; f < base.frames.size(); ++f) {
    CHECK(base.frames[f].x_v == moved.frames[f].x_v);
    CHECK(base.frames[f].x_e == moved.frames[f].x_e);
  }
}

TEST_CASE("box_sequence basics") {
  std::vector<HandDetection> history;
  for (int f = 0; f < 13; ++f) {
    history.push_back(make_detection(0.5, 0.5, 0.2, 0.2, {}, f));
  }
  const HandTrace trace = make_trace(0, history);
  const MotionFeatureSequence seq = box_sequence(trace, 13);
  CHECK(seq.length() == 13);
  CHECK(seq.frame_width() == 4);
  for (const MotionFrame& frame : seq.frames) {
    CHECK(frame.x_v == std::vector<double>{0.5, 0.5, 0.2, 0.2});
  }

  const HandTrace tiny = make_trace(1, {history[0]});
  CHECK_THROWS_AS(box_sequence(tiny, 13), WindowUnderflowError);
}

TEST_CASE("a drifting box yields an arithmetic progression in cx") {
  std::vector<HandDetection> history;
  for (int f = 0; f < 10; ++f) {
    history.push_back(make_detection(0.3 + 0.01 * f, 0.5, 0.2, 0.2, {}, f));
  }
  const MotionFeatureSequence seq = box_sequence(make_trace(0, history), 10);
  for (std::size_t f = 1; f < seq.frames.size(); ++f) {
    CHECK(seq.frames[f].x_v[0] - seq.frames[f - 1].x_v[0] ==
          doctest::Approx(0.01).epsilon(1e-9));
  }
}

TEST_CASE("feature CSV header and rows") {
  const SkeletonSpec skeleton = star_skeleton();
  std::vector<HandDetection> history;
  for (int f = 0; f < 3; ++f) {
    history.push_back(star_detection(0.5 + 0.01 * f, 0.5, f));
  }
  const MotionFeatureSequence seq =
      motion_sequence(make_trace(4, history), 2, skeleton);

  std::stringstream out;
  write_feature_csv(out, {{4, seq}});
  std::string header;
  std::getline(out, header);
  CHECK(header ==
        "trace_id,frame,kpt0_vu,kpt0_vv,kpt1_vu,kpt1_vv,kpt2_vu,kpt2_vv,"
        "kpt3_vu,kpt3_vv,kpt4_vu,kpt4_vv,edge0_du,edge0_dv,edge1_du,edge1_dv,"
        "edge2_du,edge2_dv,edge3_du,edge3_dv");
  std::string row;
  std::getline(out, row);
  CHECK(row.rfind("4,1,", 0) == 0);
  int rows = 1;
  while (std::getline(out, row)) {
    if (!row.empty()) ++rows;
  }
  CHECK(rows == 2);
}

TEST_CASE("featurize_runs splits histories at gaps") {
  const SkeletonSpec skeleton = star_skeleton();
  HandTrace trace(0, 64);
  for (int f : {0, 1, 2, 5, 6, 7, 8}) {
    trace.append(star_detection(0.5, 0.5, f));
  }
  const std::vector<MotionFeatureSequence> runs =
      featurize_runs(trace, FeatureMode::Motion, skeleton);
  REQUIRE(runs.size() == 2);
  CHECK(runs[0].length() == 2);  // frames 1..2
  CHECK(runs[1].length() == 3);  // frames 6..8
  CHECK(runs[1].frames.front().frame_index == 6);
}
