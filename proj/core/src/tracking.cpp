#include "lehgr/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>

#include "lehgr/error.hpp"

namespace lehgr {

double Assignment::total_loss() const {
  double total = 0.0;
  for (const AssignmentPair& pair : pairs) {
    total += pair.loss;
  }
  return total;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  if (!(a.area() > 0.0) || !(b.area() > 0.0)) {
    throw Error(ErrorCode::InvalidInput, "iou needs boxes with positive area");
  }
  // Areas are derived from the same corner values as the intersection so
  // identical boxes give exactly 1.
  const double area_a = (a.right() - a.left()) * (a.bottom() - a.top());
  const double area_b = (b.right() - b.left()) * (b.bottom() - b.top());
  const double iw = std::min(a.right(), b.right()) - std::max(a.left(), b.left());
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top());
  if (iw <= 0.0 || ih <= 0.0) {
    return 0.0;
  }
  const double inter = iw * ih;
  return inter / (area_a + area_b - inter);
}

double match_loss(const HandDetection& detection, const HandTrace& trace,
                  const MatchWeights& weights) {
  if (trace.size() == 0) {
    throw Error(ErrorCode::Logic, "match_loss against a trace with empty history");
  }
  const HandDetection& last = trace.latest();
  if (detection.keypoints.size() != last.keypoints.size()) {
    throw Error(ErrorCode::Schema,
                "keypoint count mismatch: detection has " +
                    std::to_string(detection.keypoints.size()) + ", trace has " +
                    std::to_string(last.keypoints.size()));
  }

  const double loss_iou = 1.0 - iou(detection.box, last.box);

  const double area_d = detection.box.area();
  const double area_t = last.box.area();
  const double loss_area = std::abs(area_d - area_t) / std::max(area_d, area_t);

  double loss_loc = 0.0;
  if (!detection.keypoints.empty()) {
    double sum = 0.0;
    for (std::size_t i = 0; i < detection.keypoints.size(); ++i) {
      const double du = detection.keypoints[i].u - last.keypoints[i].u;
      const double dv = detection.keypoints[i].v - last.keypoints[i].v;
      sum += std::sqrt(du * du + dv * dv);
    }
    loss_loc = sum / static_cast<double>(detection.keypoints.size()) /
               last.box.diagonal();
  }

  return weights.w_loc * loss_loc + weights.w_iou * loss_iou +
         weights.w_area * loss_area;
}

namespace {

// Depth-first search for the best matching of exactly `target` pairs.
// Costs are non-negative, so any partial total above the incumbent can be
// pruned. Ties on total prefer the lexicographically smallest pair list.
class AssignmentSearch {
 public:
  AssignmentSearch(const std::vector<std::vector<double>>& cost, double gate,
                   int rows, int cols)
      : cost_(cost), gate_(gate), rows_(rows), cols_(cols), used_(cols, 0) {}

  bool solve(int target) {
    target_ = target;
    found_ = false;
    current_.clear();
    dfs(0, 0, 0.0);
    return found_;
  }

  double best_total() const { return best_total_; }
  const std::vector<std::pair<int, int>>& best_pairs() const { return best_; }

 private:
  void dfs(int row, int matched, double total) {
    if (matched == target_) {
      if (!found_ || total < best_total_ ||
          (total == best_total_ && current_ < best_)) {
        found_ = true;
        best_total_ = total;
        best_ = current_;
      }
      return;
    }
    if (row == rows_) return;
    if (matched + (rows_ - row) < target_) return;
    if (found_ && total > best_total_) return;

    for (int col = 0; col < cols_; ++col) {
      if (used_[col]) continue;
      const double c = cost_[row][col];
      if (!(c <= gate_)) continue;
      used_[col] = 1;
      current_.emplace_back(row, col);
      dfs(row + 1, matched + 1, total + c);
      current_.pop_back();
      used_[col] = 0;
    }
    dfs(row + 1, matched, total);
  }

  const std::vector<std::vector<double>>& cost_;
  double gate_;
  int rows_;
  int cols_;
  int target_ = 0;
  std::vector<char> used_;
  std::vector<std::pair<int, int>> current_;
  std::vector<std::pair<int, int>> best_;
  double best_total_ = 0.0;
  bool found_ = false;
};

std::vector<std::pair<int, int>> greedy_pairs(
    const std::vector<std::vector<double>>& cost, double gate, int rows,
    int cols) {
  std::vector<std::tuple<double, int, int>> admissible;
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      if (cost[i][j] <= gate) {
        admissible.emplace_back(cost[i][j], i, j);
      }
    }
  }
  std::sort(admissible.begin(), admissible.end());
  std::vector<char> row_used(rows, 0), col_used(cols, 0);
  std::vector<std::pair<int, int>> pairs;
  for (const auto& [c, i, j] : admissible) {
    if (row_used[i] || col_used[j]) continue;
    row_used[i] = 1;
    col_used[j] = 1;
    pairs.emplace_back(i, j);
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

}  // namespace

Assignment solve_assignment(const std::vector<std::vector<double>>& cost,
                            const std::vector<std::int64_t>& trace_ids,
                            double gate) {
  const int rows = static_cast<int>(cost.size());
  const int cols = static_cast<int>(trace_ids.size());
  for (const auto& row : cost) {
    if (static_cast<int>(row.size()) != cols) {
      throw Error(ErrorCode::InvalidInput, "cost matrix is ragged");
    }
    for (double c : row) {
      if (c < 0.0) {
        throw Error(ErrorCode::InvalidInput, "assignment costs must be non-negative");
      }
    }
  }

  std::vector<std::pair<int, int>> chosen;
  if (std::min(rows, cols) <= 8) {
    AssignmentSearch search(cost, gate, rows, cols);
    for (int target = std::min(rows, cols); target >= 0; --target) {
      if (search.solve(target)) {
        chosen = search.best_pairs();
        break;
      }
    }
  } else {
    chosen = greedy_pairs(cost, gate, rows, cols);
  }

  Assignment result;
  std::vector<char> det_used(rows, 0), col_used(cols, 0);
  for (const auto& [i, j] : chosen) {
    result.pairs.push_back({i, trace_ids[j], cost[i][j]});
    det_used[i] = 1;
    col_used[j] = 1;
  }
  for (int i = 0; i < rows; ++i) {
    if (!det_used[i]) result.unmatched_detections.push_back(i);
  }
  for (int j = 0; j < cols; ++j) {
    if (!col_used[j]) result.unmatched_traces.push_back(trace_ids[j]);
  }
  return result;
}

Assignment TraceStore::associate(
    const std::vector<HandDetection>& detections) const {
  for (const HandDetection& det : detections) {
    if (det.frame_index != detections.front().frame_index) {
      throw Error(ErrorCode::InvalidInput,
                  "associate expects detections from a single frame");
    }
  }
  std::vector<std::int64_t> ids;
  ids.reserve(active_.size());
  for (const auto& [id, trace] : active_) {
    ids.push_back(id);
  }
  std::vector<std::vector<double>> cost(detections.size(),
                                        std::vector<double>(ids.size(), 0.0));
  for (std::size_t i = 0; i < detections.size(); ++i) {
    std::size_t j = 0;
    for (const auto& [id, trace] : active_) {
      cost[i][j] = match_loss(detections[i], trace, config_.weights);
      ++j;
    }
  }
  return solve_assignment(cost, ids, config_.weights.gate);
}

TraceEvents TraceStore::step(const FrameObservation& frame) {
  if (stepped_ && frame.frame_index <= last_frame_) {
    throw Error(ErrorCode::StreamOrder,
                "frame index " + std::to_string(frame.frame_index) +
                    " does not advance past " + std::to_string(last_frame_));
  }
  for (const HandDetection& det : frame.detections) {
    if (det.frame_index != frame.frame_index) {
      throw Error(ErrorCode::InvalidInput,
                  "detection frame index disagrees with its frame");
    }
  }

  const Assignment assignment = associate(frame.detections);
  TraceEvents events;

  for (const AssignmentPair& pair : assignment.pairs) {
    active_.at(pair.trace_id)
        .append(frame.detections[static_cast<std::size_t>(pair.detection_index)]);
    events.updated.push_back(pair.trace_id);
  }

  for (std::int64_t id : assignment.unmatched_traces) {
    HandTrace& trace = active_.at(id);
    trace.record_miss();
    if (trace.misses() > config_.max_misses) {
      trace.terminate();
      events.terminated.push_back(id);
    }
  }
  for (std::int64_t id : events.terminated) {
    active_.erase(id);
  }

  for (int index : assignment.unmatched_detections) {
    const std::int64_t id = next_id_++;
    HandTrace trace(id, config_.history_capacity);
    trace.append(frame.detections[static_cast<std::size_t>(index)]);
    active_.emplace(id, std::move(trace));
    events.created.push_back(id);
  }

  std::sort(events.created.begin(), events.created.end());
  std::sort(events.updated.begin(), events.updated.end());
  std::sort(events.terminated.begin(), events.terminated.end());

  last_frame_ = frame.frame_index;
  stepped_ = true;
  return events;
}

}  // namespace lehgr
