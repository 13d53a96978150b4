#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "lehgr/error.hpp"
#include "lehgr/rng.hpp"
#include "lehgr/stream_io.hpp"
#include "lehgr/types.hpp"
#include "test_support.hpp"

using namespace lehgr;

TEST_CASE("normalize_detection divides by the image size") {
  PixelDetection raw;
  raw.x0 = 0;
  raw.y0 = 0;
  raw.x1 = 320;
  raw.y1 = 240;
  raw.keypoints = {{160, 120}, {80, 180}};

  const HandDetection det = normalize_detection(raw, 320, 240);
  CHECK(det.keypoints[0].u == doctest::Approx(0.5));
  CHECK(det.keypoints[0].v == doctest::Approx(0.5));
  CHECK(det.keypoints[1].u == doctest::Approx(0.25));
  CHECK(det.keypoints[1].v == doctest::Approx(0.75));
  CHECK(det.box.cx == doctest::Approx(0.5));
  CHECK(det.box.cy == doctest::Approx(0.5));
  CHECK(det.box.w == doctest::Approx(1.0));
  CHECK(det.box.h == doctest::Approx(1.0));
}

TEST_CASE("normalize_detection rejects bad input") {
  PixelDetection raw;
  raw.x0 = 0;
  raw.y0 = 0;
  raw.x1 = 10;
  raw.y1 = 10;
  CHECK_THROWS_AS(normalize_detection(raw, 0, 240), Error);
  CHECK_THROWS_AS(normalize_detection(raw, 320, -1), Error);
  raw.x1 = 0;  // degenerate box
  CHECK_THROWS_AS(normalize_detection(raw, 320, 240), Error);
}

TEST_CASE("normalize_detection is idempotent on normalized data") {
  Rng rng(17);
  for (int i = 0; i < 50; ++i) {
    PixelDetection raw;
    raw.x0 = rng.uniform(0.0, 0.4);
    raw.y0 = rng.uniform(0.0, 0.4);
    raw.x1 = raw.x0 + rng.uniform(0.05, 0.5);
    raw.y1 = raw.y0 + rng.uniform(0.05, 0.5);
    for (int k = 0; k < 5; ++k) {
      raw.keypoints.push_back({rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)});
    }
    const HandDetection once = normalize_detection(raw, 1, 1);

    PixelDetection again;
    again.x0 = once.box.cx - once.box.w / 2;
    again.x1 = once.box.cx + once.box.w / 2;
    again.y0 = once.box.cy - once.box.h / 2;
    again.y1 = once.box.cy + once.box.h / 2;
    again.keypoints = once.keypoints;
    const HandDetection twice = normalize_detection(again, 1, 1);

    CHECK(std::abs(twice.box.cx - once.box.cx) < 1e-12);
    CHECK(std::abs(twice.box.cy - once.box.cy) < 1e-12);
    CHECK(std::abs(twice.box.w - once.box.w) < 1e-12);
    CHECK(std::abs(twice.box.h - once.box.h) < 1e-12);
    for (std::size_t k = 0; k < once.keypoints.size(); ++k) {
      CHECK(std::abs(twice.keypoints[k].u - once.keypoints[k].u) < 1e-12);
      CHECK(std::abs(twice.keypoints[k].v - once.keypoints[k].v) < 1e-12);
    }
  }
}

TEST_CASE("normalize_detection clamps jittered boxes on ingest") {
  PixelDetection raw;
  raw.x0 = -400;
  raw.y0 = -400;
  raw.x1 = 1000;
  raw.y1 = 1000;
  const HandDetection det = normalize_detection(raw, 320, 240);
  CHECK(det.box.cx >= -0.5);
  CHECK(det.box.cx <= 1.5);
  CHECK(det.box.w <= 1.0);
  CHECK(det.box.w > 0.0);
}

TEST_CASE("validate_skeleton accepts the default star") {
  const SkeletonSpec spec = validate_skeleton(star_skeleton());
  CHECK(spec.keypoint_count == 5);
  CHECK(spec.edges.size() == 4);
}

TEST_CASE("validate_skeleton names the offending field") {
  SkeletonSpec spec;
  spec.keypoint_count = 3;
  spec.edges = {{0, 3}};
  CHECK_THROWS_WITH_AS(validate_skeleton(spec), "edge index 3 out of range",
                       Error);

  spec.keypoint_count = 2;
  spec.edges = {};
  CHECK_THROWS_WITH_AS(validate_skeleton(spec), "empty edge set", Error);

  spec.keypoint_count = 0;
  CHECK_THROWS_AS(validate_skeleton(spec), Error);

  spec.keypoint_count = 3;
  spec.edges = {{0, 1}, {1, 0}};
  CHECK_THROWS_AS(validate_skeleton(spec), Error);  // unordered duplicate

  spec.edges = {{1, 1}};
  CHECK_THROWS_AS(validate_skeleton(spec), Error);
}

TEST_CASE("label sets are dense with a reserved negative class") {
  CHECK_NOTHROW(validate_labels(default_labels()));

  LabelSet bad{{{0, "negative"}, {2, "lwave"}}};
  CHECK_THROWS_AS(validate_labels(bad), Error);

  LabelSet wrong_zero{{{0, "lwave"}, {1, "rwave"}}};
  CHECK_THROWS_AS(validate_labels(wrong_zero), Error);
}

TEST_CASE("trace history is bounded and ordered") {
  HandTrace trace(7, 3);
  for (int f = 0; f < 5; ++f) {
    trace.append(testing::make_detection(0.5, 0.5, 0.1, 0.1, {}, f));
  }
  CHECK(trace.size() == 3);
  CHECK(trace.at(0).frame_index == 2);
  CHECK(trace.latest().frame_index == 4);

  CHECK_THROWS_AS(
      trace.append(testing::make_detection(0.5, 0.5, 0.1, 0.1, {}, 4)), Error);
  trace.terminate();
  CHECK_THROWS_AS(
      trace.append(testing::make_detection(0.5, 0.5, 0.1, 0.1, {}, 9)), Error);
}

TEST_CASE("detection stream round trips through JSONL") {
  const SkeletonSpec skeleton = star_skeleton();
  std::vector<FrameObservation> frames;
  Rng rng(3);
  for (int f = 0; f < 4; ++f) {
    FrameObservation frame;
    frame.frame_index = f;
    frame.timestamp_ms = f * 33;
    frame.image_width = 640;
    frame.image_height = 480;
    HandDetection det;
    det.box = {rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), 0.2, 0.25};
    for (int k = 0; k < 5; ++k) {
      det.keypoints.push_back({rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)});
    }
    det.confidence = 0.9;
    det.frame_index = f;
    det.source_id = 1;
    frame.detections.push_back(det);
    frames.push_back(frame);
  }

  std::stringstream buffer;
  write_detection_stream(buffer, frames);
  const std::vector<FrameObservation> again =
      read_detection_stream(buffer, skeleton);
  CHECK(again == frames);
}

TEST_CASE("detection stream readers enforce order and schema") {
  const SkeletonSpec skeleton = star_skeleton();

  SUBCASE("non-monotonic frames") {
    std::stringstream in(
        R"({"frame":1,"ts_ms":0,"image":[640,480],"hands":[]})"
        "\n"
        R"({"frame":1,"ts_ms":33,"image":[640,480],"hands":[]})"
        "\n");
    CHECK_THROWS_AS(read_detection_stream(in, skeleton), Error);
  }
  SUBCASE("keypoint count mismatch") {
    std::stringstream in(
        R"({"frame":0,"ts_ms":0,"image":[640,480],"hands":[{"box":[0.5,0.5,0.2,0.2],"kpts":[[0.1,0.1]],"conf":1.0}]})"
        "\n");
    CHECK_THROWS_AS(read_detection_stream(in, skeleton), Error);
  }
  SUBCASE("confidence outside the unit interval") {
    std::stringstream in(
        R"({"frame":0,"ts_ms":0,"image":[640,480],"hands":[{"box":[0.5,0.5,0.2,0.2],"kpts":[[0.1,0.1],[0.2,0.2],[0.3,0.3],[0.4,0.4],[0.5,0.5]],"conf":1.5}]})"
        "\n");
    CHECK_THROWS_AS(read_detection_stream(in, skeleton), Error);
  }
  SUBCASE("invalid JSON") {
    std::stringstream in("{not json}\n");
    CHECK_THROWS_AS(read_detection_stream(in, skeleton), Error);
  }
}

TEST_CASE("a valid stream is already sorted by frame index") {
  const SkeletonSpec skeleton = star_skeleton();
  std::stringstream buffer;
  std::vector<FrameObservation> frames;
  for (int f = 0; f < 10; ++f) {
    FrameObservation frame;
    frame.frame_index = f * 2;  // gaps are fine, order is what matters
    frame.image_width = 640;
    frame.image_height = 480;
    frames.push_back(frame);
  }
  write_detection_stream(buffer, frames);
  std::vector<FrameObservation> loaded = read_detection_stream(buffer, skeleton);
  std::vector<FrameObservation> sorted = loaded;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const FrameObservation& a, const FrameObservation& b) {
                     return a.frame_index < b.frame_index;
                   });
  CHECK(loaded == sorted);
}
