#pragma once

#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

#include "lehgr/dataset.hpp"
#include "lehgr/features.hpp"
#include "lehgr/net.hpp"
#include "lehgr/rng.hpp"
#include "lehgr/stream_io.hpp"
#include "lehgr/synth.hpp"
#include "lehgr/tracking.hpp"
#include "lehgr/types.hpp"

namespace lehgr::testing {

// --- geometry helpers -------------------------------------------------

inline HandDetection make_detection(double cx, double cy, double w, double h,
                                    std::vector<Vec2> keypoints = {},
                                    std::int64_t frame = 0) {
  HandDetection det;
  det.box = {cx, cy, w, h};
  det.keypoints = std::move(keypoints);
  det.frame_index = frame;
  return det;
}

inline HandTrace make_trace(std::int64_t id,
                            const std::vector<HandDetection>& history,
                            std::size_t capacity = 64) {
  HandTrace trace(id, capacity);
  for (const HandDetection& det : history) {
    trace.append(det);
  }
  return trace;
}

// --- independent assignment enumerator --------------------------------
//
// Odometer over every mapping detection -> {unmatched, trace column},
// filtered for injectivity and the gate; best by maximum cardinality,
// then minimum total (summed in ascending detection order), then the
// lexicographically smallest (detection, trace) pair list.

struct OracleAssignment {
  std::vector<std::pair<int, int>> pairs;  // (detection, column)
  double total = 0.0;
  int cardinality = 0;
  bool valid = false;
};

inline OracleAssignment brute_force_assignment(
    const std::vector<std::vector<double>>& cost, double gate) {
  const int n = static_cast<int>(cost.size());
  const int m = n > 0 ? static_cast<int>(cost[0].size()) : 0;
  std::vector<int> choice(static_cast<std::size_t>(n), -1);
  OracleAssignment best;

  auto consider = [&]() {
    std::vector<char> used(static_cast<std::size_t>(m), 0);
    std::vector<std::pair<int, int>> pairs;
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      const int j = choice[static_cast<std::size_t>(i)];
      if (j < 0) continue;
      if (used[static_cast<std::size_t>(j)]) return;  // not injective
      if (!(cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] <=
            gate)) {
        return;
      }
      used[static_cast<std::size_t>(j)] = 1;
      pairs.emplace_back(i, j);
      total += cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    const int cardinality = static_cast<int>(pairs.size());
    const bool better =
        !best.valid || cardinality > best.cardinality ||
        (cardinality == best.cardinality &&
         (total < best.total || (total == best.total && pairs < best.pairs)));
    if (better) {
      best = {pairs, total, cardinality, true};
    }
  };

  // Odometer across (m+1)^n mappings.
  while (true) {
    consider();
    int pos = n - 1;
    while (pos >= 0) {
      if (choice[static_cast<std::size_t>(pos)] + 1 < m) {
        ++choice[static_cast<std::size_t>(pos)];
        break;
      }
      choice[static_cast<std::size_t>(pos)] = -1;
      --pos;
    }
    if (pos < 0) break;
  }
  if (n == 0) {
    best.valid = true;
  }
  return best;
}

// --- direct transcription of the overlap labeling rule ----------------

inline int direct_label(std::int64_t phi_s, std::int64_t phi_e,
                        std::int64_t psi_s, std::int64_t psi_e, int category,
                        double delta_ios, double delta_ioa) {
  double overlap = static_cast<double>(std::min(phi_e, psi_e) -
                                       std::max(phi_s, psi_s));
  if (overlap < 0.0) overlap = 0.0;
  const double r_ioa = overlap / static_cast<double>(phi_e - phi_s);
  const double r_ios = overlap / static_cast<double>(psi_e - psi_s);
  if (r_ios < delta_ios || r_ioa < delta_ioa) {
    return 0;
  }
  return category;
}

// Positive-clip count by looping over all (length, start) windows of a
// run, entirely apart from generate_clips.
inline std::size_t enumerate_positive_windows(
    const MotionFeatureSequence& run,
    const std::vector<AnnotatedSegment>& segments,
    const AugmentationConfig& config, const LabelingThresholds& thresholds) {
  std::size_t positives = 0;
  const int len = static_cast<int>(run.length());
  for (int window = config.t_min; window <= len; window += config.delta_t) {
    for (int start = 0; start + window <= len; start += config.stride) {
      const std::int64_t psi_s =
          run.frames[static_cast<std::size_t>(start)].frame_index;
      const std::int64_t psi_e =
          run.frames[static_cast<std::size_t>(start + window - 1)].frame_index + 1;
      // Pick the segment with maximal intersection-over-annotation.
      int label = 0;
      double best_ioa = -1.0;
      for (const AnnotatedSegment& segment : segments) {
        double overlap = static_cast<double>(
            std::min(segment.end, psi_e) - std::max(segment.start, psi_s));
        if (overlap < 0.0) overlap = 0.0;
        const double ioa =
            overlap / static_cast<double>(segment.end - segment.start);
        if (ioa > best_ioa) {
          best_ioa = ioa;
          label = direct_label(segment.start, segment.end, psi_s, psi_e,
                               segment.class_id, thresholds.delta_ios,
                               thresholds.delta_ioa);
        }
      }
      if (label >= 1) ++positives;
    }
  }
  return positives;
}

// --- network test helpers ----------------------------------------------

inline SequenceClip random_clip(const NetConfig& config, Rng& rng, int label,
                                int timesteps = 13) {
  SequenceClip clip;
  clip.timesteps = timesteps;
  clip.frame_width = config.frame_width();
  clip.label = label;
  clip.features.resize(static_cast<std::size_t>(timesteps) *
                       static_cast<std::size_t>(clip.frame_width));
  for (float& value : clip.features) {
    value = static_cast<float>(rng.uniform(-0.3, 0.3));
  }
  return clip;
}

// Central finite differences against the analytic gradients, with the
// effective step taken from the actually-stored float values so weight
// quantization cancels out. Dropout must be disabled in the model config.
inline double finite_difference_max_error(
    TraceSeqModel model, const std::vector<SequenceClip>& batch,
    double step = 1e-4) {
  Rng rng(0);
  Gradients analytic;
  const double base_loss [[maybe_unused]] =
      loss_and_gradients(model, batch, rng, analytic).mean_loss;

  auto loss_at = [&](const TraceSeqModel& m) {
    Rng local(0);
    Gradients scratch;
    return loss_and_gradients(m, batch, local, scratch).mean_loss;
  };

  double max_error = 0.0;
  const std::vector<Tensor*> params = model.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    std::vector<float>& data = params[k]->data;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const float original = data[i];
      const float plus = static_cast<float>(static_cast<double>(original) + step);
      const float minus = static_cast<float>(static_cast<double>(original) - step);
      data[i] = plus;
      const double loss_plus = loss_at(model);
      data[i] = minus;
      const double loss_minus = loss_at(model);
      data[i] = original;
      const double denom =
          static_cast<double>(plus) - static_cast<double>(minus);
      const double fd = (loss_plus - loss_minus) / denom;
      const double g = analytic.tensors[k][i];
      const double scale = std::max({std::abs(fd), std::abs(g), 1e-6});
      max_error = std::max(max_error, std::abs(fd - g) / scale);
    }
  }
  return max_error;
}

// --- scene-to-recording pipeline helper --------------------------------

inline Recording recording_from_scene(const std::string& id,
                                      const SceneOutput& scene,
                                      const SkeletonSpec& skeleton,
                                      const TrackingConfig& tracking,
                                      FeatureMode mode) {
  const std::vector<TraceFrame> trace_frames =
      track_stream(scene.frames, tracking);
  Recording recording;
  recording.id = id;
  for (const auto& [trace_id, trace] : traces_from_stream(trace_frames)) {
    for (MotionFeatureSequence& run : featurize_runs(trace, mode, skeleton)) {
      recording.traces.emplace_back(trace_id, std::move(run));
    }
  }
  recording.segments = scene.segments;
  return recording;
}

}  // namespace lehgr::testing
