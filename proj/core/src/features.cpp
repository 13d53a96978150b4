#include "lehgr/features.hpp"

#include <charconv>
#include <cmath>
#include <ostream>
#include <string>

#include "lehgr/error.hpp"

namespace lehgr {

namespace {

void append_double(std::string& line, double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  line.append(buf, res.ptr);
}

}  // namespace

std::vector<double> MotionFrame::stacked() const {
  std::vector<double> out;
  out.reserve(width());
  out.insert(out.end(), x_v.begin(), x_v.end());
  out.insert(out.end(), x_e.begin(), x_e.end());
  return out;
}

std::size_t MotionFeatureSequence::frame_width() const {
  return velocity_width() + shape_width();
}

std::size_t MotionFeatureSequence::velocity_width() const {
  if (mode == FeatureMode::Box) return 4;
  return 2 * static_cast<std::size_t>(keypoint_count);
}

std::size_t MotionFeatureSequence::shape_width() const {
  if (mode == FeatureMode::Box) return 0;
  return 2 * static_cast<std::size_t>(edge_count);
}

std::vector<double> velocity_features(std::span<const HandDetection> window,
                                      std::size_t t) {
  if (t >= window.size()) {
    throw Error(ErrorCode::InvalidInput, "window position out of range");
  }
  if (t == 0) {
    throw Error(ErrorCode::Logic,
                "velocity needs a predecessor frame; position 0 has none");
  }
  const HandDetection& cur = window[t];
  const HandDetection& prev = window[t - 1];
  if (cur.keypoints.size() != prev.keypoints.size()) {
    throw Error(ErrorCode::Schema, "keypoint count changes inside a window");
  }
  std::vector<double> out;
  out.reserve(2 * cur.keypoints.size());
  for (std::size_t i = 0; i < cur.keypoints.size(); ++i) {
    out.push_back(cur.keypoints[i].u - prev.keypoints[i].u);
    out.push_back(cur.keypoints[i].v - prev.keypoints[i].v);
  }
  return out;
}

std::vector<double> edge_features(const HandDetection& detection,
                                  const SkeletonSpec& skeleton) {
  if (static_cast<int>(detection.keypoints.size()) != skeleton.keypoint_count) {
    throw Error(ErrorCode::Schema,
                "detection has " + std::to_string(detection.keypoints.size()) +
                    " keypoints, skeleton declares " +
                    std::to_string(skeleton.keypoint_count));
  }
  std::vector<double> out;
  out.reserve(2 * skeleton.edges.size());
  for (const auto& [pi, pj] : skeleton.edges) {
    const Vec2& a = detection.keypoints[static_cast<std::size_t>(pi)];
    const Vec2& b = detection.keypoints[static_cast<std::size_t>(pj)];
    out.push_back(a.u - b.u);
    out.push_back(a.v - b.v);
  }
  return out;
}

namespace {

// The last `count` entries of a trace history as a contiguous span copy.
std::vector<HandDetection> tail(const HandTrace& trace, std::size_t count) {
  std::vector<HandDetection> out;
  out.reserve(count);
  const std::size_t start = trace.size() - count;
  for (std::size_t i = start; i < trace.size(); ++i) {
    out.push_back(trace.at(i));
  }
  return out;
}

void require_gap_free(std::span<const HandDetection> window) {
  for (std::size_t i = 1; i < window.size(); ++i) {
    if (window[i].frame_index != window[i - 1].frame_index + 1) {
      throw Error(ErrorCode::InvalidInput,
                  "feature window spans a frame gap at frame " +
                      std::to_string(window[i].frame_index));
    }
  }
}

MotionFeatureSequence motion_frames_of(std::span<const HandDetection> window,
                                       const SkeletonSpec& skeleton) {
  MotionFeatureSequence seq;
  seq.mode = FeatureMode::Motion;
  seq.keypoint_count = skeleton.keypoint_count;
  seq.edge_count = static_cast<int>(skeleton.edges.size());
  seq.frames.reserve(window.size() - 1);
  for (std::size_t t = 1; t < window.size(); ++t) {
    MotionFrame frame;
    frame.frame_index = window[t].frame_index;
    frame.x_v = velocity_features(window, t);
    frame.x_e = edge_features(window[t], skeleton);
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

MotionFeatureSequence box_frames_of(std::span<const HandDetection> window) {
  MotionFeatureSequence seq;
  seq.mode = FeatureMode::Box;
  seq.frames.reserve(window.size());
  for (const HandDetection& det : window) {
    MotionFrame frame;
    frame.frame_index = det.frame_index;
    frame.x_v = {det.box.cx, det.box.cy, det.box.w, det.box.h};
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

}  // namespace

MotionFeatureSequence motion_sequence(const HandTrace& trace, std::size_t T,
                                      const SkeletonSpec& skeleton) {
  if (T == 0) {
    throw Error(ErrorCode::InvalidInput, "motion window length must be positive");
  }
  if (trace.size() < T + 1) {
    throw WindowUnderflowError(
        T + 1, trace.size(),
        "motion window needs " + std::to_string(T + 1) + " detections, trace has " +
            std::to_string(trace.size()));
  }
  const std::vector<HandDetection> window = tail(trace, T + 1);
  require_gap_free(window);
  return motion_frames_of(window, skeleton);
}

MotionFeatureSequence box_sequence(const HandTrace& trace, std::size_t T) {
  if (T == 0) {
    throw Error(ErrorCode::InvalidInput, "box window length must be positive");
  }
  if (trace.size() < T) {
    throw WindowUnderflowError(
        T, trace.size(),
        "box window needs " + std::to_string(T) + " detections, trace has " +
            std::to_string(trace.size()));
  }
  const std::vector<HandDetection> window = tail(trace, T);
  require_gap_free(window);
  return box_frames_of(window);
}

std::vector<MotionFeatureSequence> featurize_runs(const HandTrace& trace,
                                                  FeatureMode mode,
                                                  const SkeletonSpec& skeleton) {
  std::vector<MotionFeatureSequence> out;
  std::vector<HandDetection> run;
  auto flush = [&] {
    if (mode == FeatureMode::Motion) {
      if (run.size() >= 2) {
        out.push_back(motion_frames_of(run, skeleton));
      }
    } else if (!run.empty()) {
      out.push_back(box_frames_of(run));
    }
    run.clear();
  };
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const HandDetection& det = trace.at(i);
    if (!run.empty() && det.frame_index != run.back().frame_index + 1) {
      flush();
    }
    run.push_back(det);
  }
  flush();
  return out;
}

void write_feature_csv(
    std::ostream& out,
    const std::vector<std::pair<std::int64_t, MotionFeatureSequence>>& rows) {
  std::string line;
  bool header_written = false;
  for (const auto& [trace_id, seq] : rows) {
    if (!header_written) {
      line = "trace_id,frame";
      if (seq.mode == FeatureMode::Box) {
        line += ",box_cx,box_cy,box_w,box_h";
      } else {
        for (int i = 0; i < seq.keypoint_count; ++i) {
          line += ",kpt" + std::to_string(i) + "_vu,kpt" + std::to_string(i) + "_vv";
        }
        for (int i = 0; i < seq.edge_count; ++i) {
          line += ",edge" + std::to_string(i) + "_du,edge" + std::to_string(i) + "_dv";
        }
      }
      out << line << '\n';
      header_written = true;
    }
    for (const MotionFrame& frame : seq.frames) {
      line.clear();
      line += std::to_string(trace_id);
      line += ',';
      line += std::to_string(frame.frame_index);
      for (double v : frame.x_v) {
        line += ',';
        append_double(line, v);
      }
      for (double v : frame.x_e) {
        line += ',';
        append_double(line, v);
      }
      out << line << '\n';
    }
  }
}

}  // namespace lehgr
