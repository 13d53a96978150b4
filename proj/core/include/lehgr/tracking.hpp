#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "lehgr/types.hpp"

namespace lehgr {

// Weights of the association cost: keypoint location, IoU and box-area
// terms, plus the admissibility gate.
struct MatchWeights {
  double w_loc = 0.5;
  double w_iou = 0.3;
  double w_area = 0.2;
  double gate = 0.6;
};

struct TrackingConfig {
  MatchWeights weights;
  int max_misses = 5;
  std::size_t history_capacity = 64;
};

struct AssignmentPair {
  int detection_index = -1;
  std::int64_t trace_id = -1;
  double loss = 0.0;

  friend bool operator==(const AssignmentPair&,
                         const AssignmentPair&) = default;
};

// One frame's association result. Pairs are sorted by detection index and
// every pair loss is <= gate.
struct Assignment {
  std::vector<AssignmentPair> pairs;
  std::vector<int> unmatched_detections;
  std::vector<std::int64_t> unmatched_traces;

  // Sum of pair losses in stored (ascending detection index) order.
  double total_loss() const;
};

struct TraceEvents {
  std::vector<std::int64_t> created;
  std::vector<std::int64_t> updated;
  std::vector<std::int64_t> terminated;

  friend bool operator==(const TraceEvents&, const TraceEvents&) = default;
};

// Intersection over union of two boxes. Throws Error(InvalidInput) on a
// zero-area box.
double iou(const BoundingBox& a, const BoundingBox& b);

// Association cost of a detection against a trace's most recent detection:
//   w_loc * L_loc + w_iou * L_iou + w_area * L_area
// with L_iou = 1 - IoU, L_area = |A_d - A_t| / max(A_d, A_t) and L_loc the
// mean keypoint distance divided by the trace box diagonal. Zero exactly
// when the detection equals the latest trace entry.
double match_loss(const HandDetection& detection, const HandTrace& trace,
                  const MatchWeights& weights);

// Minimum-cost one-to-one matching on an explicit cost matrix
// (rows = detections, cols = trace slots; trace_ids maps a column to its
// id). Maximizes matched pairs among pairs with cost <= gate, then
// minimizes total cost, then prefers the lexicographically smallest
// (detection_index, trace_id) pair list. Exact by depth-first enumeration
// for min(rows, cols) <= 8, gated greedy above.
Assignment solve_assignment(const std::vector<std::vector<double>>& cost,
                            const std::vector<std::int64_t>& trace_ids,
                            double gate);

// Maintains the live trace set; single writer per stream.
class TraceStore {
 public:
  explicit TraceStore(TrackingConfig config = {}) : config_(config) {}

  const TrackingConfig& config() const { return config_; }
  const std::map<std::int64_t, HandTrace>& active() const { return active_; }
  std::int64_t next_id() const { return next_id_; }

  // Associates one frame's detections with the active traces.
  Assignment associate(const std::vector<HandDetection>& detections) const;

  // Applies one frame: matched traces append and reset misses, unmatched
  // traces age out (terminated when misses exceed max_misses), unmatched
  // detections spawn new traces. Frame indices must strictly increase.
  TraceEvents step(const FrameObservation& frame);

 private:
  TrackingConfig config_;
  std::map<std::int64_t, HandTrace> active_;
  std::int64_t next_id_ = 0;
  std::int64_t last_frame_ = -1;
  bool stepped_ = false;
};

}  // namespace lehgr
