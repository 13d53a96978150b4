#include "lehgr/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <tuple>

#include <json.hpp>

#include "lehgr/error.hpp"
#include "lehgr/parallel.hpp"
#include "lehgr/rng.hpp"
#include "lehgr/stream_io.hpp"

static_assert(std::endian::native == std::endian::little,
              "dataset container assumes a little-endian host");

namespace lehgr {

using nlohmann::json;

namespace {

void validate_span(std::int64_t start, std::int64_t end, const char* what) {
  if (start >= end) {
    throw Error(ErrorCode::Schema,
                std::string(what) + " span must satisfy start < end");
  }
}

void validate_config(const AugmentationConfig& config) {
  if (config.t_min < 2 || config.delta_t < 1 || config.t_obj < 2 ||
      config.stride < 1) {
    throw Error(ErrorCode::Config,
                "augmentation config needs t_min >= 2, delta_t >= 1, "
                "t_obj >= 2, stride >= 1");
  }
}

void validate_thresholds(const LabelingThresholds& thresholds) {
  if (!(thresholds.delta_ios > 0.0) || thresholds.delta_ios > 1.0 ||
      !(thresholds.delta_ioa > 0.0) || thresholds.delta_ioa > 1.0) {
    throw Error(ErrorCode::Config, "labeling thresholds must lie in (0,1]");
  }
}

}  // namespace

std::map<int, std::size_t> Dataset::class_counts() const {
  std::map<int, std::size_t> counts;
  for (int c = 0; c < labels.count(); ++c) {
    counts[c] = 0;
  }
  for (const SequenceClip& clip : clips) {
    ++counts[clip.label];
  }
  return counts;
}

OverlapRatios overlap_ratios(const AnnotatedSegment& segment,
                             const ClipSpan& clip) {
  validate_span(segment.start, segment.end, "annotation");
  validate_span(clip.start, clip.end, "clip");
  const std::int64_t overlap =
      std::min(segment.end, clip.end) - std::max(segment.start, clip.start);
  const double clamped =
      overlap > 0 ? static_cast<double>(overlap) : 0.0;
  OverlapRatios ratios;
  ratios.ioa = clamped / static_cast<double>(segment.end - segment.start);
  ratios.ios = clamped / static_cast<double>(clip.end - clip.start);
  return ratios;
}

int clip_label(const OverlapRatios& ratios, int segment_class,
               const LabelingThresholds& thresholds) {
  if (ratios.ios < thresholds.delta_ios || ratios.ioa < thresholds.delta_ioa) {
    return 0;
  }
  return segment_class;
}

int label_clip(const std::vector<AnnotatedSegment>& segments,
               const ClipSpan& clip, const LabelingThresholds& thresholds) {
  if (segments.empty()) {
    return 0;
  }
  // Segment with maximal intersection-over-annotation wins; ties keep the
  // earlier segment.
  std::vector<const AnnotatedSegment*> ordered;
  ordered.reserve(segments.size());
  for (const AnnotatedSegment& segment : segments) {
    ordered.push_back(&segment);
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const AnnotatedSegment* a, const AnnotatedSegment* b) {
              return std::tie(a->start, a->end, a->class_id) <
                     std::tie(b->start, b->end, b->class_id);
            });
  const AnnotatedSegment* best = nullptr;
  OverlapRatios best_ratios;
  for (const AnnotatedSegment* segment : ordered) {
    const OverlapRatios ratios = overlap_ratios(*segment, clip);
    if (best == nullptr || ratios.ioa > best_ratios.ioa) {
      best = segment;
      best_ratios = ratios;
    }
  }
  return clip_label(best_ratios, best->class_id, thresholds);
}

std::vector<int> timestep_set(const AugmentationConfig& config, int max_len) {
  validate_config(config);
  std::vector<int> lengths;
  for (int length = config.t_min; length <= max_len; length += config.delta_t) {
    lengths.push_back(length);
  }
  return lengths;
}

MotionFeatureSequence resample_clip(const MotionFeatureSequence& sequence,
                                    int t_obj) {
  const int length = static_cast<int>(sequence.length());
  if (length < 2) {
    throw WindowUnderflowError(2, static_cast<std::size_t>(length),
                               "resampling needs at least two frames");
  }
  if (t_obj < 2) {
    throw Error(ErrorCode::Config, "objective timestep must be >= 2");
  }
  if (length == t_obj) {
    return sequence;
  }

  const std::size_t v_width = sequence.frames.front().x_v.size();
  const std::size_t e_width = sequence.frames.front().x_e.size();
  MotionFeatureSequence out;
  out.mode = sequence.mode;
  out.keypoint_count = sequence.keypoint_count;
  out.edge_count = sequence.edge_count;
  out.frames.resize(static_cast<std::size_t>(t_obj));

  for (int j = 0; j < t_obj; ++j) {
    // Exact at the endpoints: j*(length-1) is an integer product, so the
    // division yields precisely 0 and length-1 there.
    const double position = static_cast<double>(j) *
                            static_cast<double>(length - 1) /
                            static_cast<double>(t_obj - 1);
    int lower = static_cast<int>(std::floor(position));
    if (lower > length - 2) lower = length - 2;
    const double frac = position - static_cast<double>(lower);
    const MotionFrame& a = sequence.frames[static_cast<std::size_t>(lower)];
    const MotionFrame& b = sequence.frames[static_cast<std::size_t>(lower + 1)];

    MotionFrame frame;
    frame.frame_index = j;
    frame.x_v.resize(v_width);
    frame.x_e.resize(e_width);
    for (std::size_t c = 0; c < v_width; ++c) {
      frame.x_v[c] = (1.0 - frac) * a.x_v[c] + frac * b.x_v[c];
    }
    for (std::size_t c = 0; c < e_width; ++c) {
      frame.x_e[c] = (1.0 - frac) * a.x_e[c] + frac * b.x_e[c];
    }
    out.frames[static_cast<std::size_t>(j)] = std::move(frame);
  }
  return out;
}

namespace {

struct ClipJob {
  const Recording* recording;
  const MotionFeatureSequence* sequence;
  std::int64_t trace_id;
};

SequenceClip make_clip(const Recording& recording, std::int64_t trace_id,
                       const MotionFeatureSequence& sequence, std::size_t start,
                       int length, const AugmentationConfig& config,
                       const LabelingThresholds& thresholds) {
  ClipSpan span;
  span.start = sequence.frames[start].frame_index;
  span.end = sequence.frames[start + static_cast<std::size_t>(length) - 1]
                 .frame_index +
             1;

  MotionFeatureSequence window;
  window.mode = sequence.mode;
  window.keypoint_count = sequence.keypoint_count;
  window.edge_count = sequence.edge_count;
  window.frames.assign(
      sequence.frames.begin() + static_cast<std::ptrdiff_t>(start),
      sequence.frames.begin() + static_cast<std::ptrdiff_t>(start) + length);

  const MotionFeatureSequence resampled = resample_clip(window, config.t_obj);

  SequenceClip clip;
  clip.timesteps = config.t_obj;
  clip.frame_width = static_cast<int>(resampled.frame_width());
  clip.label = label_clip(recording.segments, span, thresholds);
  clip.provenance = {recording.id, trace_id, span.start, span.end, length};
  clip.features.reserve(static_cast<std::size_t>(clip.timesteps) *
                        static_cast<std::size_t>(clip.frame_width));
  for (const MotionFrame& frame : resampled.frames) {
    for (double v : frame.x_v) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::NumericInput, "non-finite feature value");
      }
      clip.features.push_back(static_cast<float>(v));
    }
    for (double v : frame.x_e) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::NumericInput, "non-finite feature value");
      }
      clip.features.push_back(static_cast<float>(v));
    }
  }
  return clip;
}

}  // namespace

std::vector<SequenceClip> generate_clips(const std::vector<Recording>& recordings,
                                         const AugmentationConfig& config,
                                         const LabelingThresholds& thresholds) {
  validate_config(config);
  validate_thresholds(thresholds);

  std::set<std::string> ids;
  for (const Recording& recording : recordings) {
    if (!ids.insert(recording.id).second) {
      throw Error(ErrorCode::Schema,
                  "duplicate recording id " + recording.id);
    }
    for (const AnnotatedSegment& segment : recording.segments) {
      validate_span(segment.start, segment.end, "annotation");
      if (segment.class_id < 1) {
        throw Error(ErrorCode::Schema, "annotated class must be >= 1");
      }
    }
  }

  std::vector<ClipJob> jobs;
  const MotionFeatureSequence* reference = nullptr;
  for (const Recording& recording : recordings) {
    for (const auto& [trace_id, sequence] : recording.traces) {
      if (sequence.frames.empty()) continue;
      if (reference == nullptr) {
        reference = &sequence;
      } else if (sequence.mode != reference->mode ||
                 sequence.frame_width() != reference->frame_width()) {
        throw Error(ErrorCode::Schema,
                    "feature mode or width differs across recordings");
      }
      jobs.push_back({&recording, &sequence, trace_id});
    }
  }

  std::vector<std::vector<SequenceClip>> slots(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    const ClipJob& job = jobs[i];
    const int length = static_cast<int>(job.sequence->length());
    for (int window : timestep_set(config, length)) {
      for (std::size_t start = 0;
           start + static_cast<std::size_t>(window) <=
           static_cast<std::size_t>(length);
           start += static_cast<std::size_t>(config.stride)) {
        slots[i].push_back(make_clip(*job.recording, job.trace_id,
                                     *job.sequence, start, window, config,
                                     thresholds));
      }
    }
  });

  std::vector<SequenceClip> clips;
  for (std::vector<SequenceClip>& slot : slots) {
    for (SequenceClip& clip : slot) {
      clips.push_back(std::move(clip));
    }
  }
  std::sort(clips.begin(), clips.end(),
            [](const SequenceClip& a, const SequenceClip& b) {
              return std::tie(a.provenance.recording_id, a.provenance.trace_id,
                              a.provenance.original_length,
                              a.provenance.psi_s) <
                     std::tie(b.provenance.recording_id, b.provenance.trace_id,
                              b.provenance.original_length,
                              b.provenance.psi_s);
            });
  return clips;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, double ratio,
                                          std::uint64_t seed) {
  if (!(ratio > 0.0) || !(ratio < 1.0)) {
    throw Error(ErrorCode::InvalidInput, "split ratio must lie in (0,1)");
  }
  std::set<std::string> id_set;
  for (const SequenceClip& clip : dataset.clips) {
    id_set.insert(clip.provenance.recording_id);
  }
  if (id_set.size() < 2) {
    throw Error(ErrorCode::CannotSplit,
                "splitting by recording needs at least two recordings");
  }
  std::vector<std::string> recording_ids(id_set.begin(), id_set.end());
  Rng rng(seed);
  rng.shuffle(recording_ids);

  const auto total = static_cast<std::int64_t>(recording_ids.size());
  std::int64_t n_train = std::llround(ratio * static_cast<double>(total));
  n_train = std::clamp<std::int64_t>(n_train, 1, total - 1);

  std::set<std::string> train_ids(recording_ids.begin(),
                                  recording_ids.begin() + n_train);

  Dataset train = dataset;
  Dataset test = dataset;
  train.clips.clear();
  test.clips.clear();
  for (const SequenceClip& clip : dataset.clips) {
    if (train_ids.count(clip.provenance.recording_id)) {
      train.clips.push_back(clip);
    } else {
      test.clips.push_back(clip);
    }
  }
  return {std::move(train), std::move(test)};
}

namespace {

constexpr char kDatasetMagic[8] = {'L', 'E', 'H', 'G', 'R', 'D', 'S', '1'};

const char* mode_name(FeatureMode mode) {
  return mode == FeatureMode::Motion ? "motion" : "box";
}

FeatureMode mode_from_name(const std::string& name) {
  if (name == "motion") return FeatureMode::Motion;
  if (name == "box") return FeatureMode::Box;
  throw Error(ErrorCode::Schema, "unknown feature mode " + name);
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::string& path) {
  json clips = json::array();
  std::size_t values = 0;
  for (const SequenceClip& clip : dataset.clips) {
    clips.push_back(json{{"label", clip.label},
                         {"rec", clip.provenance.recording_id},
                         {"trace", clip.provenance.trace_id},
                         {"psi_s", clip.provenance.psi_s},
                         {"psi_e", clip.provenance.psi_e},
                         {"orig_len", clip.provenance.original_length}});
    values += clip.features.size();
  }
  const json header{{"version", 1},
                    {"skeleton", skeleton_to_json(dataset.skeleton)},
                    {"mode", mode_name(dataset.mode)},
                    {"t_obj", dataset.t_obj},
                    {"frame_width", dataset.frame_width},
                    {"labels", labels_to_json(dataset.labels)},
                    {"clips", std::move(clips)}};
  const std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorCode::Io, "cannot write " + path);
  }
  out.write(kDatasetMagic, sizeof(kDatasetMagic));
  const std::uint64_t header_size = header_text.size();
  out.write(reinterpret_cast<const char*>(&header_size), sizeof(header_size));
  out.write(header_text.data(),
            static_cast<std::streamsize>(header_text.size()));
  for (const SequenceClip& clip : dataset.clips) {
    out.write(reinterpret_cast<const char*>(clip.features.data()),
              static_cast<std::streamsize>(clip.features.size() * sizeof(float)));
  }
  if (!out) {
    throw Error(ErrorCode::Io, "short write to " + path);
  }
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::Io, "cannot open " + path);
  }
  char magic[sizeof(kDatasetMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kDatasetMagic, sizeof(magic)) != 0) {
    throw Error(ErrorCode::Schema, path + " is not a dataset container");
  }
  std::uint64_t header_size = 0;
  in.read(reinterpret_cast<char*>(&header_size), sizeof(header_size));
  if (!in) {
    throw Error(ErrorCode::Schema, "truncated dataset header");
  }
  std::string header_text(header_size, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_size));
  if (!in) {
    throw Error(ErrorCode::Schema, "truncated dataset header");
  }
  const json header = parse_json(header_text, path + " header");

  Dataset dataset;
  try {
    if (header.at("version").get<int>() != 1) {
      throw Error(ErrorCode::Schema, "unsupported dataset version");
    }
    dataset.skeleton = skeleton_from_json(header.at("skeleton"));
    dataset.mode = mode_from_name(header.at("mode").get<std::string>());
    dataset.t_obj = header.at("t_obj").get<int>();
    dataset.frame_width = header.at("frame_width").get<int>();
    dataset.labels = labels_from_json(header.at("labels"));
    for (const auto& entry : header.at("clips")) {
      SequenceClip clip;
      clip.timesteps = dataset.t_obj;
      clip.frame_width = dataset.frame_width;
      clip.label = entry.at("label").get<int>();
      clip.provenance.recording_id = entry.at("rec").get<std::string>();
      clip.provenance.trace_id = entry.at("trace").get<std::int64_t>();
      clip.provenance.psi_s = entry.at("psi_s").get<std::int64_t>();
      clip.provenance.psi_e = entry.at("psi_e").get<std::int64_t>();
      clip.provenance.original_length = entry.at("orig_len").get<int>();
      dataset.clips.push_back(std::move(clip));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Schema,
                std::string("bad dataset header: ") + e.what());
  }

  const std::size_t per_clip = static_cast<std::size_t>(dataset.t_obj) *
                               static_cast<std::size_t>(dataset.frame_width);
  for (SequenceClip& clip : dataset.clips) {
    clip.features.resize(per_clip);
    in.read(reinterpret_cast<char*>(clip.features.data()),
            static_cast<std::streamsize>(per_clip * sizeof(float)));
    if (!in) {
      throw Error(ErrorCode::Schema, "truncated dataset tensors");
    }
  }
  return dataset;
}

void save_annotations(const RecordingAnnotations& annotations,
                      const std::string& path) {
  json segments = json::array();
  for (const AnnotatedSegment& segment : annotations.segments) {
    segments.push_back(json{{"start", segment.start},
                            {"end", segment.end},
                            {"class", segment.class_id}});
  }
  const json j{{"recording_id", annotations.recording_id},
               {"segments", std::move(segments)}};
  write_text_file(path, j.dump(2) + "\n");
}

RecordingAnnotations load_annotations(const std::string& path) {
  const json j = parse_json(read_text_file(path), path);
  RecordingAnnotations annotations;
  try {
    annotations.recording_id = j.at("recording_id").get<std::string>();
    for (const auto& entry : j.at("segments")) {
      AnnotatedSegment segment;
      segment.start = entry.at("start").get<std::int64_t>();
      segment.end = entry.at("end").get<std::int64_t>();
      segment.class_id = entry.at("class").get<int>();
      validate_span(segment.start, segment.end, "annotation");
      if (segment.class_id < 1) {
        throw Error(ErrorCode::Schema, "annotated class must be >= 1");
      }
      annotations.segments.push_back(segment);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Schema,
                std::string("bad annotations: ") + e.what());
  }
  return annotations;
}

}  // namespace lehgr
