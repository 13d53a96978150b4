#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lehgr/features.hpp"
#include "lehgr/types.hpp"

namespace lehgr {

// Annotated gesture span [start, end) in frame indices; class >= 1.
struct AnnotatedSegment {
  std::int64_t start = 0;
  std::int64_t end = 0;
  int class_id = 1;

  friend bool operator==(const AnnotatedSegment&,
                         const AnnotatedSegment&) = default;
};

// Clipped window span [start, end) in frame indices.
struct ClipSpan {
  std::int64_t start = 0;
  std::int64_t end = 0;
};

struct LabelingThresholds {
  double delta_ios = 0.3;
  double delta_ioa = 0.3;
};

// Window-length augmentation: lengths t_min + n * delta_t up to the trace
// length, slid with `stride`, all resampled to t_obj.
struct AugmentationConfig {
  int t_min = 8;
  int delta_t = 5;
  int t_obj = 13;
  int stride = 3;
};

struct OverlapRatios {
  double ioa = 0.0;  // intersection over the annotation
  double ios = 0.0;  // intersection over the sample
};

struct ClipProvenance {
  std::string recording_id;
  std::int64_t trace_id = 0;
  std::int64_t psi_s = 0;
  std::int64_t psi_e = 0;
  int original_length = 0;

  friend bool operator==(const ClipProvenance&,
                         const ClipProvenance&) = default;
};

// Fixed-length feature sequence with its label; features are row-major
// t_obj x frame_width, quantized to 32-bit floats (the stored precision).
struct SequenceClip {
  std::vector<float> features;
  int timesteps = 0;
  int frame_width = 0;
  int label = 0;
  ClipProvenance provenance;

  friend bool operator==(const SequenceClip&, const SequenceClip&) = default;
};

// A featurized recording: per-trace gap-free feature runs plus the
// annotated segments, all sharing one frame-index timeline.
struct Recording {
  std::string id;
  std::vector<std::pair<std::int64_t, MotionFeatureSequence>> traces;
  std::vector<AnnotatedSegment> segments;
};

struct Dataset {
  SkeletonSpec skeleton;
  FeatureMode mode = FeatureMode::Motion;
  int t_obj = 13;
  int frame_width = 0;
  LabelSet labels;
  std::vector<SequenceClip> clips;

  std::map<int, std::size_t> class_counts() const;
};

// Overlap of a segment and a clip: I = min(phi_e, psi_e) - max(phi_s, psi_s)
// clamped below at zero; ioa = I / |segment|, ios = I / |clip|.
OverlapRatios overlap_ratios(const AnnotatedSegment& segment,
                             const ClipSpan& clip);

// 0 when either ratio falls below its threshold, else the segment class.
int clip_label(const OverlapRatios& ratios, int segment_class,
               const LabelingThresholds& thresholds);

// Label of a clip against a whole segment list: the segment with maximal
// ioa is evaluated (ties prefer the earlier segment); no segments -> 0.
int label_clip(const std::vector<AnnotatedSegment>& segments,
               const ClipSpan& clip, const LabelingThresholds& thresholds);

// Ascending window lengths {t_min + n*delta_t} intersected with
// [t_min, max_len]; empty when max_len < t_min.
std::vector<int> timestep_set(const AugmentationConfig& config, int max_len);

// Channel-wise piecewise-linear resampling at t_obj uniformly spaced
// positions over [0, T-1]. T == t_obj is the identity; first and last
// frames are preserved exactly. Throws WindowUnderflowError when T < 2.
MotionFeatureSequence resample_clip(const MotionFeatureSequence& sequence,
                                    int t_obj);

// Harvests labeled fixed-length clips from featurized recordings: every
// trace run, every admissible window length, slid with the stride, labeled
// per the overlap rule and resampled to t_obj. Output is sorted by
// (recording id, trace id, window length, psi_s).
std::vector<SequenceClip> generate_clips(const std::vector<Recording>& recordings,
                                         const AugmentationConfig& config,
                                         const LabelingThresholds& thresholds);

// Splits clips by recording id (no recording straddles the split),
// deterministic per seed. Throws Error(CannotSplit) with fewer than two
// recordings.
std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, double ratio,
                                          std::uint64_t seed);

// Binary container: magic, 64-bit little-endian header length, JSON header
// (skeleton, mode, t_obj, labels, per-clip provenance), then row-major
// little-endian float32 tensors per clip.
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

// Annotation sidecar: {"recording_id": ..., "segments": [{start,end,class}]}.
struct RecordingAnnotations {
  std::string recording_id;
  std::vector<AnnotatedSegment> segments;
};

void save_annotations(const RecordingAnnotations& annotations,
                      const std::string& path);
RecordingAnnotations load_annotations(const std::string& path);

}  // namespace lehgr
