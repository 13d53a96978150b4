#include "lehgr/stream_io.hpp"

#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "lehgr/error.hpp"

namespace lehgr {

using nlohmann::json;

nlohmann::json skeleton_to_json(const SkeletonSpec& skeleton) {
  json edges = json::array();
  for (const auto& [pi, pj] : skeleton.edges) {
    edges.push_back(json::array({pi, pj}));
  }
  return json{{"name", skeleton.name},
              {"keypoints", skeleton.keypoint_count},
              {"edges", edges}};
}

SkeletonSpec skeleton_from_json(const nlohmann::json& j) {
  SkeletonSpec skeleton;
  try {
    skeleton.name = j.value("name", std::string("hand"));
    skeleton.keypoint_count = j.at("keypoints").get<int>();
    for (const auto& edge : j.at("edges")) {
      skeleton.edges.emplace_back(edge.at(0).get<int>(), edge.at(1).get<int>());
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("bad skeleton: ") + e.what());
  }
  return validate_skeleton(std::move(skeleton));
}

nlohmann::json labels_to_json(const LabelSet& labels) {
  json out = json::array();
  for (const GestureLabel& label : labels.labels) {
    out.push_back(json{{"id", label.class_id}, {"name", label.name}});
  }
  return out;
}

LabelSet labels_from_json(const nlohmann::json& j) {
  LabelSet labels;
  try {
    for (const auto& entry : j) {
      labels.labels.push_back(
          {entry.at("id").get<int>(), entry.at("name").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("bad label set: ") + e.what());
  }
  return validate_labels(std::move(labels));
}

namespace {

json box_to_json(const BoundingBox& box) {
  return json::array({box.cx, box.cy, box.w, box.h});
}

BoundingBox box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) {
    throw Error(ErrorCode::Schema, "box must be [cx,cy,w,h]");
  }
  BoundingBox box{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                  j[3].get<double>()};
  if (!(box.w > 0.0) || !(box.h > 0.0)) {
    throw Error(ErrorCode::Schema, "box extents must be positive");
  }
  return box;
}

json keypoints_to_json(const std::vector<Vec2>& keypoints) {
  json out = json::array();
  for (const Vec2& kpt : keypoints) {
    out.push_back(json::array({kpt.u, kpt.v}));
  }
  return out;
}

std::vector<Vec2> keypoints_from_json(const json& j, int expected) {
  if (!j.is_array() || static_cast<int>(j.size()) != expected) {
    throw Error(ErrorCode::Schema,
                "expected " + std::to_string(expected) + " keypoints, got " +
                    std::to_string(j.size()));
  }
  std::vector<Vec2> out;
  out.reserve(j.size());
  for (const auto& kpt : j) {
    if (!kpt.is_array() || kpt.size() != 2) {
      throw Error(ErrorCode::Schema, "keypoint must be [u,v]");
    }
    out.push_back({kpt[0].get<double>(), kpt[1].get<double>()});
  }
  return out;
}

}  // namespace

nlohmann::json frame_to_json(const FrameObservation& frame) {
  json hands = json::array();
  for (const HandDetection& det : frame.detections) {
    json hand{{"box", box_to_json(det.box)},
              {"kpts", keypoints_to_json(det.keypoints)},
              {"conf", det.confidence}};
    if (det.source_id) {
      hand["src_id"] = *det.source_id;
    }
    hands.push_back(std::move(hand));
  }
  return json{{"frame", frame.frame_index},
              {"ts_ms", frame.timestamp_ms},
              {"image", json::array({frame.image_width, frame.image_height})},
              {"hands", std::move(hands)}};
}

FrameObservation frame_from_json(const nlohmann::json& j,
                                 const SkeletonSpec& skeleton) {
  FrameObservation frame;
  try {
    frame.frame_index = j.at("frame").get<std::int64_t>();
    frame.timestamp_ms = j.at("ts_ms").get<std::int64_t>();
    const auto& image = j.at("image");
    frame.image_width = image.at(0).get<int>();
    frame.image_height = image.at(1).get<int>();
    for (const auto& hand : j.at("hands")) {
      HandDetection det;
      det.box = box_from_json(hand.at("box"));
      det.keypoints =
          keypoints_from_json(hand.at("kpts"), skeleton.keypoint_count);
      det.confidence = hand.at("conf").get<double>();
      if (det.confidence < 0.0 || det.confidence > 1.0) {
        throw Error(ErrorCode::Schema, "confidence outside [0,1]");
      }
      if (hand.contains("src_id")) {
        det.source_id = hand.at("src_id").get<int>();
      }
      det.frame_index = frame.frame_index;
      frame.detections.push_back(std::move(det));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("bad frame: ") + e.what());
  }
  return frame;
}

void write_detection_stream(std::ostream& out,
                            const std::vector<FrameObservation>& frames) {
  for (const FrameObservation& frame : frames) {
    out << frame_to_json(frame).dump() << '\n';
  }
}

std::vector<FrameObservation> read_detection_stream(
    std::istream& in, const SkeletonSpec& skeleton) {
  std::vector<FrameObservation> frames;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    FrameObservation frame = frame_from_json(
        parse_json(line, "detection stream line " + std::to_string(line_no)),
        skeleton);
    if (!frames.empty() && frame.frame_index <= frames.back().frame_index) {
      throw Error(ErrorCode::StreamOrder,
                  "frame indices must strictly increase (line " +
                      std::to_string(line_no) + ")");
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

void write_trace_stream(std::ostream& out,
                        const std::vector<TraceFrame>& frames) {
  for (const TraceFrame& frame : frames) {
    json traces = json::array();
    for (const TraceFrameEntry& entry : frame.traces) {
      traces.push_back(json{{"id", entry.trace_id},
                            {"box", box_to_json(entry.box)},
                            {"kpts", keypoints_to_json(entry.keypoints)},
                            {"misses", entry.misses}});
    }
    json line{{"frame", frame.frame_index},
              {"traces", std::move(traces)},
              {"events",
               json{{"created", frame.created},
                    {"terminated", frame.terminated}}}};
    out << line.dump() << '\n';
  }
}

std::vector<TraceFrame> read_trace_stream(std::istream& in,
                                          const SkeletonSpec& skeleton) {
  std::vector<TraceFrame> frames;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json j =
        parse_json(line, "trace stream line " + std::to_string(line_no));
    TraceFrame frame;
    try {
      frame.frame_index = j.at("frame").get<std::int64_t>();
      for (const auto& entry : j.at("traces")) {
        TraceFrameEntry out_entry;
        out_entry.trace_id = entry.at("id").get<std::int64_t>();
        out_entry.box = box_from_json(entry.at("box"));
        out_entry.keypoints =
            keypoints_from_json(entry.at("kpts"), skeleton.keypoint_count);
        out_entry.misses = entry.at("misses").get<int>();
        frame.traces.push_back(std::move(out_entry));
      }
      const auto& events = j.at("events");
      frame.created = events.at("created").get<std::vector<std::int64_t>>();
      frame.terminated =
          events.at("terminated").get<std::vector<std::int64_t>>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::Schema,
                  "bad trace frame (line " + std::to_string(line_no) +
                      "): " + e.what());
    }
    if (!frames.empty() && frame.frame_index <= frames.back().frame_index) {
      throw Error(ErrorCode::StreamOrder,
                  "trace stream frames must strictly increase (line " +
                      std::to_string(line_no) + ")");
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

std::vector<std::pair<std::int64_t, HandTrace>> traces_from_stream(
    const std::vector<TraceFrame>& frames) {
  std::map<std::int64_t, HandTrace> traces;
  for (const TraceFrame& frame : frames) {
    for (const TraceFrameEntry& entry : frame.traces) {
      if (entry.misses != 0) continue;
      auto [it, inserted] = traces.try_emplace(
          entry.trace_id,
          HandTrace(entry.trace_id, std::numeric_limits<std::size_t>::max()));
      HandDetection det;
      det.box = entry.box;
      det.keypoints = entry.keypoints;
      det.frame_index = frame.frame_index;
      it->second.append(det);
    }
  }
  std::vector<std::pair<std::int64_t, HandTrace>> out;
  out.reserve(traces.size());
  for (auto& [id, trace] : traces) {
    out.emplace_back(id, std::move(trace));
  }
  return out;
}

std::vector<TraceFrame> track_stream(const std::vector<FrameObservation>& frames,
                                     const TrackingConfig& tracking) {
  TraceStore store(tracking);
  std::vector<TraceFrame> out;
  out.reserve(frames.size());
  for (const FrameObservation& frame : frames) {
    const TraceEvents events = store.step(frame);
    TraceFrame trace_frame;
    trace_frame.frame_index = frame.frame_index;
    for (const auto& [id, trace] : store.active()) {
      TraceFrameEntry entry;
      entry.trace_id = id;
      entry.box = trace.latest().box;
      entry.keypoints = trace.latest().keypoints;
      entry.misses = trace.misses();
      trace_frame.traces.push_back(std::move(entry));
    }
    trace_frame.created = events.created;
    trace_frame.terminated = events.terminated;
    out.push_back(std::move(trace_frame));
  }
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::Io, "cannot open " + path);
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorCode::Io, "cannot write " + path);
  }
  out << content;
}

nlohmann::json parse_json(const std::string& text, const std::string& context) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    throw Error(ErrorCode::Schema, "invalid JSON in " + context);
  }
  return j;
}

}  // namespace lehgr
