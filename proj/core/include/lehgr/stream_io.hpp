#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "lehgr/tracking.hpp"
#include "lehgr/types.hpp"

namespace lehgr {

// JSON helpers shared by the stream, config, dataset and weight formats.
nlohmann::json skeleton_to_json(const SkeletonSpec& skeleton);
SkeletonSpec skeleton_from_json(const nlohmann::json& j);
nlohmann::json labels_to_json(const LabelSet& labels);
LabelSet labels_from_json(const nlohmann::json& j);

// Detection stream line:
//   {"frame":i,"ts_ms":t,"image":[w,h],
//    "hands":[{"box":[cx,cy,w,h],"kpts":[[u,v],...],"conf":c,"src_id":s?}]}
nlohmann::json frame_to_json(const FrameObservation& frame);
FrameObservation frame_from_json(const nlohmann::json& j,
                                 const SkeletonSpec& skeleton);

void write_detection_stream(std::ostream& out,
                            const std::vector<FrameObservation>& frames);
// Validates keypoint counts against the skeleton and strictly increasing
// frame indices. Throws Error(Schema) or Error(StreamOrder).
std::vector<FrameObservation> read_detection_stream(
    std::istream& in, const SkeletonSpec& skeleton);

// Trace stream line:
//   {"frame":i,"traces":[{"id":n,"box":[...],"kpts":[[u,v],...],"misses":m}],
//    "events":{"created":[...],"terminated":[...]}}
struct TraceFrameEntry {
  std::int64_t trace_id = 0;
  BoundingBox box;
  std::vector<Vec2> keypoints;
  int misses = 0;

  friend bool operator==(const TraceFrameEntry&,
                         const TraceFrameEntry&) = default;
};

struct TraceFrame {
  std::int64_t frame_index = 0;
  std::vector<TraceFrameEntry> traces;
  std::vector<std::int64_t> created;
  std::vector<std::int64_t> terminated;

  friend bool operator==(const TraceFrame&, const TraceFrame&) = default;
};

void write_trace_stream(std::ostream& out,
                        const std::vector<TraceFrame>& frames);
std::vector<TraceFrame> read_trace_stream(std::istream& in,
                                          const SkeletonSpec& skeleton);

// Rebuilds unbounded per-trace histories from a trace stream. An entry
// with misses == 0 carries that frame's matched detection; entries with
// misses > 0 only mark liveness and add no history.
std::vector<std::pair<std::int64_t, HandTrace>> traces_from_stream(
    const std::vector<TraceFrame>& frames);

// Runs the tracker over a detection stream and emits one TraceFrame per
// input frame (the `track` subcommand body).
std::vector<TraceFrame> track_stream(const std::vector<FrameObservation>& frames,
                                     const TrackingConfig& tracking);

// File helpers (throw Error(Io) on failure).
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
nlohmann::json parse_json(const std::string& text, const std::string& context);

}  // namespace lehgr
