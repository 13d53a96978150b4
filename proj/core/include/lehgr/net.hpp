#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lehgr/dataset.hpp"
#include "lehgr/features.hpp"
#include "lehgr/rng.hpp"
#include "lehgr/tracking.hpp"
#include "lehgr/types.hpp"

namespace lehgr {

enum class BranchMode { TwoBranch, SingleBranch };

// Classifier layout. Two-branch mode splits each frame into its velocity
// part (first input_velocity values) and shape part (remaining
// input_shape values), one recurrent branch each; single-branch mode runs
// the whole frame through one branch. Each branch stacks `depth`
// recurrent layers. fc_hidden = 0 wires the concatenated final states
// straight into the linear output layer.
struct NetConfig {
  BranchMode mode = BranchMode::TwoBranch;
  int hidden = 64;
  int depth = 1;
  int classes = 3;
  double dropout = 0.2;
  int input_velocity = 10;
  int input_shape = 8;
  int fc_hidden = 0;

  int frame_width() const { return input_velocity + input_shape; }
  int concat_width() const {
    return mode == BranchMode::TwoBranch ? 2 * hidden : hidden;
  }

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

// Named parameter tensor, row-major, float32 storage. All arithmetic runs
// in double; float32 is the persisted and in-memory precision so that a
// save/load round trip is exact.
struct Tensor {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;

  std::size_t size() const { return data.size(); }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

// One gated recurrent cell. Gate rows are stacked input, forget, cell,
// output: w_input is [4*hidden x input_width], w_recurrent
// [4*hidden x hidden], bias [4*hidden].
struct LstmLayer {
  int input_width = 0;
  int hidden = 0;
  Tensor w_input;
  Tensor w_recurrent;
  Tensor bias;

  friend bool operator==(const LstmLayer&, const LstmLayer&) = default;
};

// A stack of recurrent layers; layer 0 reads the branch input, upper
// layers read the hidden sequence below them.
struct LstmBranch {
  std::vector<LstmLayer> layers;

  friend bool operator==(const LstmBranch&, const LstmBranch&) = default;
};

struct TraceSeqModel {
  NetConfig config;
  std::uint64_t seed = 0;
  std::vector<LstmBranch> branches;
  Tensor fc_hidden_w;  // [fc_hidden x concat], present when fc_hidden > 0
  Tensor fc_hidden_b;  // [fc_hidden]
  Tensor output_w;     // [classes x (fc_hidden > 0 ? fc_hidden : concat)]
  Tensor output_b;     // [classes]

  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  std::size_t parameter_count() const;

  friend bool operator==(const TraceSeqModel&, const TraceSeqModel&) = default;
};

// Deterministic for a seed: weights uniform in [-s, s] with
// s = 1/sqrt(fan_in), biases zero except the forget gate rows at 1.
TraceSeqModel init_network(const NetConfig& config, std::uint64_t seed);

// Numerically stable softmax; invariant under a constant logit shift.
std::vector<double> softmax(std::span<const double> logits);

struct LayerCache {
  std::vector<double> x;                               // T x input_width
  std::vector<double> gate_i, gate_f, gate_g, gate_o;  // T x hidden
  std::vector<double> cell, tanh_cell, hidden;         // T x hidden
};

struct BranchCache {
  std::vector<LayerCache> layers;
};

struct ForwardCache {
  int timesteps = 0;
  std::vector<BranchCache> branches;
  std::vector<double> concat;
  std::vector<double> dropout_mask;  // empty when inactive
  std::vector<double> dropped;
  std::vector<double> fc_hidden_act;
  std::vector<double> logits;
  std::vector<double> probs;
};

// Class probabilities for a row-major T x frame_width float sequence.
// train_mode applies inverted dropout (needs rng when dropout > 0) and, if
// `cache` is given, records the activations for backpropagation.
std::vector<double> forward(const TraceSeqModel& model, const float* data,
                            int timesteps, bool train_mode, Rng* rng,
                            ForwardCache* cache = nullptr);
std::vector<double> forward(const TraceSeqModel& model,
                            const SequenceClip& clip, bool train_mode,
                            Rng* rng, ForwardCache* cache = nullptr);
// Quantizes the feature sequence to float32 (the trained precision) first.
std::vector<double> forward(const TraceSeqModel& model,
                            const MotionFeatureSequence& sequence,
                            bool train_mode, Rng* rng,
                            ForwardCache* cache = nullptr);

// Gradient buffers parallel to TraceSeqModel::parameters(), double
// precision.
struct Gradients {
  std::vector<std::vector<double>> tensors;

  void init_like(const TraceSeqModel& model);
  void zero();
};

struct BatchResult {
  double mean_loss = 0.0;
  int correct = 0;
};

// Mean cross-entropy over the batch plus gradients via backpropagation
// through time over the full window. One dropout mask per sample per call.
BatchResult loss_and_gradients(const TraceSeqModel& model,
                               std::span<const SequenceClip* const> batch,
                               Rng& rng, Gradients& grads);
BatchResult loss_and_gradients(const TraceSeqModel& model,
                               std::span<const SequenceClip> batch, Rng& rng,
                               Gradients& grads);

struct OptimizerState {
  double learning_rate = 0.004;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  void init_like(const TraceSeqModel& model);
};

// Bias-corrected Adam update; increments the step counter.
void adam_step(TraceSeqModel& model, const Gradients& grads,
               OptimizerState& state);

struct TrainOptions {
  int epochs = 60;
  int batch_size = 32;
  double learning_rate = 0.004;
  std::uint64_t seed = 0;
};

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  double train_accuracy = 0.0;            // from the training-mode passes
  std::optional<double> val_accuracy;
};

// Seeded end-to-end training; deterministic for fixed inputs and seed.
std::vector<EpochStats> train(TraceSeqModel& model, const Dataset& train_set,
                              const Dataset* val_set,
                              const TrainOptions& options);

int predict_class(const TraceSeqModel& model, const SequenceClip& clip);
std::vector<int> predict_labels(const TraceSeqModel& model,
                                const Dataset& dataset);
double evaluate_accuracy(const TraceSeqModel& model, const Dataset& dataset);

// Checks that a dataset's geometry matches the model configuration.
// Throws Error(Config) on any mismatch.
void check_compatible(const NetConfig& config, const Dataset& dataset);

// Weight file: magic, little-endian header length, JSON header (config,
// seed, tensor table), float32 tensor data in declaration order.
void save_model(const TraceSeqModel& model, const std::string& path);
TraceSeqModel load_model(const std::string& path);

struct TriggerConfig {
  double prob_threshold = 0.7;
  int consecutive = 3;
  int refractory = 13;
};

struct GestureEvent {
  std::int64_t frame_index = 0;
  std::int64_t trace_id = 0;
  int class_id = 0;
  double probability = 0.0;

  friend bool operator==(const GestureEvent&, const GestureEvent&) = default;
};

// Online recognition: tracks hands, classifies each eligible trace's
// trailing window every frame, and emits an event when the same
// non-negative class stays above the probability threshold for
// `consecutive` frames; further events on that trace are suppressed for
// `refractory` frames.
class StreamPredictor {
 public:
  StreamPredictor(TraceSeqModel model, TrackingConfig tracking,
                  TriggerConfig trigger, SkeletonSpec skeleton,
                  FeatureMode mode, int t_obj);

  std::vector<GestureEvent> step(const FrameObservation& frame);
  const TraceStore& store() const { return store_; }

 private:
  struct TriggerState {
    int streak_class = 0;
    int streak = 0;
    std::int64_t refractory_until = -1;
  };

  TraceSeqModel model_;
  TraceStore store_;
  TriggerConfig trigger_;
  SkeletonSpec skeleton_;
  FeatureMode mode_;
  int t_obj_;
  std::map<std::int64_t, TriggerState> states_;
};

std::vector<GestureEvent> predict_stream(const TraceSeqModel& model,
                                         const std::vector<FrameObservation>& frames,
                                         const TrackingConfig& tracking,
                                         const TriggerConfig& trigger,
                                         const SkeletonSpec& skeleton,
                                         FeatureMode mode, int t_obj);

}  // namespace lehgr
