#include "lehgr/net.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "lehgr/error.hpp"
#include "lehgr/stream_io.hpp"

static_assert(std::endian::native == std::endian::little,
              "weight file assumes a little-endian host");

namespace lehgr {

using nlohmann::json;

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Tensor make_tensor(std::string name, std::vector<int> shape) {
  Tensor tensor;
  tensor.name = std::move(name);
  tensor.shape = std::move(shape);
  std::size_t total = 1;
  for (int dim : tensor.shape) {
    total *= static_cast<std::size_t>(dim);
  }
  tensor.data.assign(total, 0.0f);
  return tensor;
}

void validate_config(const NetConfig& config) {
  if (config.hidden < 1) {
    throw Error(ErrorCode::Config, "hidden width must be >= 1");
  }
  if (config.depth < 1) {
    throw Error(ErrorCode::Config, "depth must be >= 1");
  }
  if (config.classes < 2) {
    throw Error(ErrorCode::Config, "need at least two classes");
  }
  if (config.dropout < 0.0 || config.dropout >= 1.0) {
    throw Error(ErrorCode::Config, "dropout must lie in [0,1)");
  }
  if (config.input_velocity < 0 || config.input_shape < 0 ||
      config.fc_hidden < 0) {
    throw Error(ErrorCode::Config, "widths must be non-negative");
  }
  if (config.mode == BranchMode::TwoBranch && config.input_velocity < 1) {
    throw Error(ErrorCode::Config,
                "two-branch mode needs a non-empty velocity input");
  }
  if (config.frame_width() < 1) {
    throw Error(ErrorCode::Config, "frame width must be >= 1");
  }
}

// Allocates the tensor skeleton for a configuration, all zeros.
TraceSeqModel build_model(const NetConfig& config) {
  validate_config(config);
  TraceSeqModel model;
  model.config = config;

  auto add_branch = [&](const std::string& name, int input_width) {
    LstmBranch branch;
    for (int l = 0; l < config.depth; ++l) {
      LstmLayer layer;
      layer.input_width = l == 0 ? input_width : config.hidden;
      layer.hidden = config.hidden;
      const std::string prefix = name + ".l" + std::to_string(l);
      layer.w_input = make_tensor(prefix + ".w_input",
                                  {4 * config.hidden, layer.input_width});
      layer.w_recurrent = make_tensor(prefix + ".w_recurrent",
                                      {4 * config.hidden, config.hidden});
      layer.bias = make_tensor(prefix + ".bias", {4 * config.hidden});
      branch.layers.push_back(std::move(layer));
    }
    model.branches.push_back(std::move(branch));
  };

  if (config.mode == BranchMode::TwoBranch) {
    add_branch("velocity", config.input_velocity);
    add_branch("shape", config.input_shape);
  } else {
    add_branch("main", config.frame_width());
  }

  const int concat = config.concat_width();
  if (config.fc_hidden > 0) {
    model.fc_hidden_w =
        make_tensor("fc_hidden.weight", {config.fc_hidden, concat});
    model.fc_hidden_b = make_tensor("fc_hidden.bias", {config.fc_hidden});
    model.output_w =
        make_tensor("output.weight", {config.classes, config.fc_hidden});
  } else {
    model.output_w = make_tensor("output.weight", {config.classes, concat});
  }
  model.output_b = make_tensor("output.bias", {config.classes});
  return model;
}

void fill_uniform(Tensor& tensor, int fan_in, Rng& rng) {
  if (tensor.data.empty() || fan_in <= 0) return;
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (float& value : tensor.data) {
    value = static_cast<float>(rng.uniform(-bound, bound));
  }
}

}  // namespace

std::vector<Tensor*> TraceSeqModel::parameters() {
  std::vector<Tensor*> out;
  for (LstmBranch& branch : branches) {
    for (LstmLayer& layer : branch.layers) {
      out.push_back(&layer.w_input);
      out.push_back(&layer.w_recurrent);
      out.push_back(&layer.bias);
    }
  }
  if (config.fc_hidden > 0) {
    out.push_back(&fc_hidden_w);
    out.push_back(&fc_hidden_b);
  }
  out.push_back(&output_w);
  out.push_back(&output_b);
  return out;
}

std::vector<const Tensor*> TraceSeqModel::parameters() const {
  std::vector<const Tensor*> out;
  for (const LstmBranch& branch : branches) {
    for (const LstmLayer& layer : branch.layers) {
      out.push_back(&layer.w_input);
      out.push_back(&layer.w_recurrent);
      out.push_back(&layer.bias);
    }
  }
  if (config.fc_hidden > 0) {
    out.push_back(&fc_hidden_w);
    out.push_back(&fc_hidden_b);
  }
  out.push_back(&output_w);
  out.push_back(&output_b);
  return out;
}

std::size_t TraceSeqModel::parameter_count() const {
  std::size_t total = 0;
  for (const Tensor* tensor : parameters()) {
    total += tensor->size();
  }
  return total;
}

TraceSeqModel init_network(const NetConfig& config, std::uint64_t seed) {
  TraceSeqModel model = build_model(config);
  model.seed = seed;
  Rng rng(seed);

  for (LstmBranch& branch : model.branches) {
    for (LstmLayer& layer : branch.layers) {
      fill_uniform(layer.w_input, layer.input_width, rng);
      fill_uniform(layer.w_recurrent, layer.hidden, rng);
      // Forget gate bias at 1, the rest at 0.
      for (int r = layer.hidden; r < 2 * layer.hidden; ++r) {
        layer.bias.data[static_cast<std::size_t>(r)] = 1.0f;
      }
    }
  }
  const int concat = config.concat_width();
  if (config.fc_hidden > 0) {
    fill_uniform(model.fc_hidden_w, concat, rng);
    fill_uniform(model.output_w, config.fc_hidden, rng);
  } else {
    fill_uniform(model.output_w, concat, rng);
  }
  return model;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  const double peak = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    sum += out[i];
  }
  for (double& value : out) {
    value /= sum;
  }
  return out;
}

namespace {

// Parameters widened to double once per entry point. Indices follow
// TraceSeqModel::parameters() order.
struct ParamView {
  std::vector<std::vector<double>> tensors;
  int n_branches = 0;
  int depth = 1;
  bool has_fc_hidden = false;

  int w_in(int b, int l) const { return 3 * (b * depth + l); }
  int w_rec(int b, int l) const { return 3 * (b * depth + l) + 1; }
  int bias(int b, int l) const { return 3 * (b * depth + l) + 2; }
  int fch_w() const { return 3 * n_branches * depth; }
  int fch_b() const { return 3 * n_branches * depth + 1; }
  int out_w() const { return 3 * n_branches * depth + (has_fc_hidden ? 2 : 0); }
  int out_b() const { return out_w() + 1; }
};

ParamView widen(const TraceSeqModel& model) {
  ParamView view;
  view.n_branches = static_cast<int>(model.branches.size());
  view.depth = model.config.depth;
  view.has_fc_hidden = model.config.fc_hidden > 0;
  for (const Tensor* tensor : model.parameters()) {
    std::vector<double> wide(tensor->data.begin(), tensor->data.end());
    view.tensors.push_back(std::move(wide));
  }
  return view;
}

void run_layer_forward(const LstmLayer& meta, const ParamView& view,
                       int branch_index, int layer_index, const double* xs,
                       int timesteps, LayerCache& cache) {
  const int in = meta.input_width;
  const int h = meta.hidden;
  const std::vector<double>& W =
      view.tensors[static_cast<std::size_t>(view.w_in(branch_index, layer_index))];
  const std::vector<double>& U =
      view.tensors[static_cast<std::size_t>(view.w_rec(branch_index, layer_index))];
  const std::vector<double>& B =
      view.tensors[static_cast<std::size_t>(view.bias(branch_index, layer_index))];

  const std::size_t th = static_cast<std::size_t>(timesteps) * h;
  cache.x.assign(xs, xs + static_cast<std::size_t>(timesteps) * in);
  cache.gate_i.resize(th);
  cache.gate_f.resize(th);
  cache.gate_g.resize(th);
  cache.gate_o.resize(th);
  cache.cell.resize(th);
  cache.tanh_cell.resize(th);
  cache.hidden.resize(th);

  std::vector<double> z(static_cast<std::size_t>(4) * h);
  std::vector<double> h_prev(static_cast<std::size_t>(h), 0.0);
  std::vector<double> c_prev(static_cast<std::size_t>(h), 0.0);

  for (int t = 0; t < timesteps; ++t) {
    const double* x = xs + static_cast<std::size_t>(t) * in;
    for (int r = 0; r < 4 * h; ++r) {
      double acc = B[static_cast<std::size_t>(r)];
      const double* w_row = W.data() + static_cast<std::size_t>(r) * in;
      for (int c = 0; c < in; ++c) {
        acc += w_row[c] * x[c];
      }
      const double* u_row = U.data() + static_cast<std::size_t>(r) * h;
      for (int c = 0; c < h; ++c) {
        acc += u_row[c] * h_prev[static_cast<std::size_t>(c)];
      }
      z[static_cast<std::size_t>(r)] = acc;
    }
    const std::size_t base = static_cast<std::size_t>(t) * h;
    for (int k = 0; k < h; ++k) {
      const double gi = sigmoid(z[static_cast<std::size_t>(k)]);
      const double gf = sigmoid(z[static_cast<std::size_t>(h + k)]);
      const double gg = std::tanh(z[static_cast<std::size_t>(2 * h + k)]);
      const double go = sigmoid(z[static_cast<std::size_t>(3 * h + k)]);
      const double c_new = gf * c_prev[static_cast<std::size_t>(k)] + gi * gg;
      const double tc = std::tanh(c_new);
      const double h_new = go * tc;
      cache.gate_i[base + static_cast<std::size_t>(k)] = gi;
      cache.gate_f[base + static_cast<std::size_t>(k)] = gf;
      cache.gate_g[base + static_cast<std::size_t>(k)] = gg;
      cache.gate_o[base + static_cast<std::size_t>(k)] = go;
      cache.cell[base + static_cast<std::size_t>(k)] = c_new;
      cache.tanh_cell[base + static_cast<std::size_t>(k)] = tc;
      cache.hidden[base + static_cast<std::size_t>(k)] = h_new;
      c_prev[static_cast<std::size_t>(k)] = c_new;
      h_prev[static_cast<std::size_t>(k)] = h_new;
    }
  }
}

std::vector<double> forward_impl(const TraceSeqModel& model,
                                 const ParamView& view, const float* data,
                                 int timesteps, bool train_mode, Rng* rng,
                                 ForwardCache& cache) {
  const NetConfig& config = model.config;
  if (timesteps < 1) {
    throw Error(ErrorCode::InvalidInput, "sequence must have at least one frame");
  }
  const std::size_t total =
      static_cast<std::size_t>(timesteps) * config.frame_width();
  for (std::size_t i = 0; i < total; ++i) {
    if (!std::isfinite(data[i])) {
      throw Error(ErrorCode::NumericInput, "non-finite network input");
    }
  }

  cache.timesteps = timesteps;
  cache.branches.assign(model.branches.size(), BranchCache{});

  // The reshape stage: slice each frame row into per-branch inputs.
  const int width = config.frame_width();
  std::size_t offset = 0;
  std::vector<std::vector<double>> branch_inputs(model.branches.size());
  for (std::size_t b = 0; b < model.branches.size(); ++b) {
    const int in = model.branches[b].layers.front().input_width;
    std::vector<double>& xs = branch_inputs[b];
    xs.resize(static_cast<std::size_t>(timesteps) * in);
    for (int t = 0; t < timesteps; ++t) {
      const float* row = data + static_cast<std::size_t>(t) * width + offset;
      double* dst = xs.data() + static_cast<std::size_t>(t) * in;
      for (int c = 0; c < in; ++c) {
        dst[c] = static_cast<double>(row[c]);
      }
    }
    offset += static_cast<std::size_t>(in);
  }

  const int h = config.hidden;
  cache.concat.resize(static_cast<std::size_t>(config.concat_width()));
  for (std::size_t b = 0; b < model.branches.size(); ++b) {
    const LstmBranch& branch = model.branches[b];
    cache.branches[b].layers.assign(branch.layers.size(), LayerCache{});
    const double* layer_input = branch_inputs[b].data();
    for (std::size_t l = 0; l < branch.layers.size(); ++l) {
      LayerCache& layer_cache = cache.branches[b].layers[l];
      run_layer_forward(branch.layers[l], view, static_cast<int>(b),
                        static_cast<int>(l), layer_input, timesteps,
                        layer_cache);
      layer_input = layer_cache.hidden.data();
    }
    const double* final_hidden =
        cache.branches[b].layers.back().hidden.data() +
        static_cast<std::size_t>(timesteps - 1) * h;
    std::copy(final_hidden, final_hidden + h,
              cache.concat.begin() + static_cast<std::ptrdiff_t>(b) * h);
  }

  const bool use_dropout = train_mode && config.dropout > 0.0;
  cache.dropout_mask.clear();
  if (use_dropout) {
    if (rng == nullptr) {
      throw Error(ErrorCode::Logic, "training-mode dropout needs an rng");
    }
    const double keep_scale = 1.0 / (1.0 - config.dropout);
    cache.dropout_mask.resize(cache.concat.size());
    for (double& m : cache.dropout_mask) {
      m = rng->bernoulli(config.dropout) ? 0.0 : keep_scale;
    }
  }
  cache.dropped.resize(cache.concat.size());
  for (std::size_t i = 0; i < cache.concat.size(); ++i) {
    cache.dropped[i] =
        use_dropout ? cache.concat[i] * cache.dropout_mask[i] : cache.concat[i];
  }

  const std::vector<double>* fc_input = &cache.dropped;
  cache.fc_hidden_act.clear();
  if (config.fc_hidden > 0) {
    const std::vector<double>& Wh = view.tensors[static_cast<std::size_t>(view.fch_w())];
    const std::vector<double>& Bh = view.tensors[static_cast<std::size_t>(view.fch_b())];
    cache.fc_hidden_act.resize(static_cast<std::size_t>(config.fc_hidden));
    const std::size_t d = cache.dropped.size();
    for (int r = 0; r < config.fc_hidden; ++r) {
      double acc = Bh[static_cast<std::size_t>(r)];
      const double* row = Wh.data() + static_cast<std::size_t>(r) * d;
      for (std::size_t c = 0; c < d; ++c) {
        acc += row[c] * cache.dropped[c];
      }
      cache.fc_hidden_act[static_cast<std::size_t>(r)] = std::tanh(acc);
    }
    fc_input = &cache.fc_hidden_act;
  }

  const std::vector<double>& Wo = view.tensors[static_cast<std::size_t>(view.out_w())];
  const std::vector<double>& Bo = view.tensors[static_cast<std::size_t>(view.out_b())];
  cache.logits.resize(static_cast<std::size_t>(config.classes));
  const std::size_t d = fc_input->size();
  for (int r = 0; r < config.classes; ++r) {
    double acc = Bo[static_cast<std::size_t>(r)];
    const double* row = Wo.data() + static_cast<std::size_t>(r) * d;
    for (std::size_t c = 0; c < d; ++c) {
      acc += row[c] * (*fc_input)[c];
    }
    cache.logits[static_cast<std::size_t>(r)] = acc;
  }
  cache.probs = softmax(cache.logits);
  return cache.probs;
}

// Backward through one recurrent layer. dh_seq carries the external
// gradient arriving at every timestep's hidden output (for the top layer
// that is zero except at the final step); dx_seq, when given, receives the
// gradient w.r.t. the layer's input sequence for the layer below.
void run_layer_backward(const LstmLayer& meta, const ParamView& view,
                        int branch_index, int layer_index,
                        const LayerCache& cache, int timesteps,
                        const std::vector<double>& dh_seq,
                        std::vector<double>* dx_seq, Gradients& grads) {
  const int in = meta.input_width;
  const int h = meta.hidden;
  const std::vector<double>& U =
      view.tensors[static_cast<std::size_t>(view.w_rec(branch_index, layer_index))];
  const std::vector<double>& W =
      view.tensors[static_cast<std::size_t>(view.w_in(branch_index, layer_index))];
  std::vector<double>& gW =
      grads.tensors[static_cast<std::size_t>(view.w_in(branch_index, layer_index))];
  std::vector<double>& gU =
      grads.tensors[static_cast<std::size_t>(view.w_rec(branch_index, layer_index))];
  std::vector<double>& gB =
      grads.tensors[static_cast<std::size_t>(view.bias(branch_index, layer_index))];

  if (dx_seq != nullptr) {
    dx_seq->assign(static_cast<std::size_t>(timesteps) * in, 0.0);
  }
  std::vector<double> dh_next(static_cast<std::size_t>(h), 0.0);
  std::vector<double> dc(static_cast<std::size_t>(h), 0.0);
  std::vector<double> dz(static_cast<std::size_t>(4) * h);

  for (int t = timesteps - 1; t >= 0; --t) {
    const std::size_t base = static_cast<std::size_t>(t) * h;
    const double* c_prev =
        t > 0 ? cache.cell.data() + base - static_cast<std::size_t>(h) : nullptr;
    for (int k = 0; k < h; ++k) {
      const std::size_t idx = base + static_cast<std::size_t>(k);
      const double gi = cache.gate_i[idx];
      const double gf = cache.gate_f[idx];
      const double gg = cache.gate_g[idx];
      const double go = cache.gate_o[idx];
      const double tc = cache.tanh_cell[idx];

      const double dh_total =
          dh_seq[idx] + dh_next[static_cast<std::size_t>(k)];
      const double d_out = dh_total * tc;
      double dck = dc[static_cast<std::size_t>(k)] +
                   dh_total * go * (1.0 - tc * tc);
      const double d_in = dck * gg;
      const double d_cand = dck * gi;
      const double d_forget = dck * (t > 0 ? c_prev[k] : 0.0);

      dz[static_cast<std::size_t>(k)] = d_in * gi * (1.0 - gi);
      dz[static_cast<std::size_t>(h + k)] = d_forget * gf * (1.0 - gf);
      dz[static_cast<std::size_t>(2 * h + k)] = d_cand * (1.0 - gg * gg);
      dz[static_cast<std::size_t>(3 * h + k)] = d_out * go * (1.0 - go);
      dc[static_cast<std::size_t>(k)] = dck * gf;
    }

    const double* x = cache.x.data() + static_cast<std::size_t>(t) * in;
    double* dx = dx_seq != nullptr
                     ? dx_seq->data() + static_cast<std::size_t>(t) * in
                     : nullptr;
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    const double* h_prev =
        t > 0 ? cache.hidden.data() + static_cast<std::size_t>(t - 1) * h
              : nullptr;
    for (int r = 0; r < 4 * h; ++r) {
      const double dzr = dz[static_cast<std::size_t>(r)];
      if (dzr == 0.0) continue;
      double* gw_row = gW.data() + static_cast<std::size_t>(r) * in;
      const double* w_row = W.data() + static_cast<std::size_t>(r) * in;
      for (int c = 0; c < in; ++c) {
        gw_row[c] += dzr * x[c];
        if (dx != nullptr) {
          dx[c] += w_row[c] * dzr;
        }
      }
      gB[static_cast<std::size_t>(r)] += dzr;
      if (t > 0) {
        double* gu_row = gU.data() + static_cast<std::size_t>(r) * h;
        const double* u_row = U.data() + static_cast<std::size_t>(r) * h;
        for (int c = 0; c < h; ++c) {
          gu_row[c] += dzr * h_prev[c];
          dh_next[static_cast<std::size_t>(c)] += u_row[c] * dzr;
        }
      }
    }
  }
}

// Backward through a whole branch stack, seeding only the final hidden
// state of the top layer.
void run_branch_backward(const LstmBranch& branch, const ParamView& view,
                         int branch_index, const BranchCache& cache,
                         int timesteps, const double* dh_final,
                         Gradients& grads) {
  const int h = branch.layers.front().hidden;
  const std::size_t th = static_cast<std::size_t>(timesteps) * h;
  std::vector<double> dh_seq(th, 0.0);
  std::copy(dh_final, dh_final + h,
            dh_seq.begin() + static_cast<std::ptrdiff_t>(th) - h);

  std::vector<double> dx_seq;
  for (int l = static_cast<int>(branch.layers.size()) - 1; l >= 0; --l) {
    const bool need_dx = l > 0;
    run_layer_backward(branch.layers[static_cast<std::size_t>(l)], view,
                       branch_index, l,
                       cache.layers[static_cast<std::size_t>(l)], timesteps,
                       dh_seq, need_dx ? &dx_seq : nullptr, grads);
    if (need_dx) {
      dh_seq = dx_seq;  // layer l's input is layer l-1's hidden sequence
    }
  }
}

}  // namespace

std::vector<double> forward(const TraceSeqModel& model, const float* data,
                            int timesteps, bool train_mode, Rng* rng,
                            ForwardCache* cache) {
  const ParamView view = widen(model);
  ForwardCache local;
  return forward_impl(model, view, data, timesteps, train_mode, rng,
                      cache ? *cache : local);
}

std::vector<double> forward(const TraceSeqModel& model,
                            const SequenceClip& clip, bool train_mode,
                            Rng* rng, ForwardCache* cache) {
  if (clip.frame_width != model.config.frame_width()) {
    throw Error(ErrorCode::Schema,
                "clip width " + std::to_string(clip.frame_width) +
                    " does not match network width " +
                    std::to_string(model.config.frame_width()));
  }
  return forward(model, clip.features.data(), clip.timesteps, train_mode, rng,
                 cache);
}

std::vector<double> forward(const TraceSeqModel& model,
                            const MotionFeatureSequence& sequence,
                            bool train_mode, Rng* rng, ForwardCache* cache) {
  if (static_cast<int>(sequence.frame_width()) !=
      model.config.frame_width()) {
    throw Error(ErrorCode::Schema,
                "sequence width does not match network width");
  }
  std::vector<float> data;
  data.reserve(sequence.length() * sequence.frame_width());
  for (const MotionFrame& frame : sequence.frames) {
    for (double v : frame.x_v) data.push_back(static_cast<float>(v));
    for (double v : frame.x_e) data.push_back(static_cast<float>(v));
  }
  return forward(model, data.data(), static_cast<int>(sequence.length()),
                 train_mode, rng, cache);
}

void Gradients::init_like(const TraceSeqModel& model) {
  tensors.clear();
  for (const Tensor* tensor : model.parameters()) {
    tensors.emplace_back(tensor->size(), 0.0);
  }
}

void Gradients::zero() {
  for (std::vector<double>& tensor : tensors) {
    std::fill(tensor.begin(), tensor.end(), 0.0);
  }
}

BatchResult loss_and_gradients(const TraceSeqModel& model,
                               std::span<const SequenceClip* const> batch,
                               Rng& rng, Gradients& grads) {
  if (batch.empty()) {
    throw Error(ErrorCode::InvalidInput, "empty batch");
  }
  const NetConfig& config = model.config;
  for (const SequenceClip* clip : batch) {
    if (clip->label < 0 || clip->label >= config.classes) {
      throw Error(ErrorCode::InvalidInput,
                  "label " + std::to_string(clip->label) + " outside [0," +
                      std::to_string(config.classes) + ")");
    }
  }
  if (grads.tensors.empty()) {
    grads.init_like(model);
  } else {
    grads.zero();
  }

  const ParamView view = widen(model);
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  const int h = config.hidden;
  BatchResult result;
  ForwardCache cache;

  for (const SequenceClip* clip : batch) {
    if (clip->frame_width != config.frame_width()) {
      throw Error(ErrorCode::Schema, "clip width does not match network width");
    }
    const std::vector<double> probs =
        forward_impl(model, view, clip->features.data(), clip->timesteps,
                     /*train_mode=*/true, &rng, cache);

    const int label = clip->label;
    const int argmax = static_cast<int>(std::distance(
        probs.begin(), std::max_element(probs.begin(), probs.end())));
    if (argmax == label) ++result.correct;
    result.mean_loss +=
        -std::log(std::max(probs[static_cast<std::size_t>(label)], 1e-300)) *
        inv_batch;

    // Output layer backward.
    std::vector<double> dlogits(probs);
    dlogits[static_cast<std::size_t>(label)] -= 1.0;
    for (double& v : dlogits) v *= inv_batch;

    const std::vector<double>& fc_input =
        config.fc_hidden > 0 ? cache.fc_hidden_act : cache.dropped;
    const std::size_t d = fc_input.size();
    std::vector<double>& g_out_w = grads.tensors[static_cast<std::size_t>(view.out_w())];
    std::vector<double>& g_out_b = grads.tensors[static_cast<std::size_t>(view.out_b())];
    const std::vector<double>& Wo = view.tensors[static_cast<std::size_t>(view.out_w())];
    std::vector<double> d_fc_input(d, 0.0);
    for (int r = 0; r < config.classes; ++r) {
      const double dlr = dlogits[static_cast<std::size_t>(r)];
      double* gw_row = g_out_w.data() + static_cast<std::size_t>(r) * d;
      const double* w_row = Wo.data() + static_cast<std::size_t>(r) * d;
      for (std::size_t c = 0; c < d; ++c) {
        gw_row[c] += dlr * fc_input[c];
        d_fc_input[c] += w_row[c] * dlr;
      }
      g_out_b[static_cast<std::size_t>(r)] += dlr;
    }

    std::vector<double> d_dropped;
    if (config.fc_hidden > 0) {
      const std::size_t cw = cache.dropped.size();
      std::vector<double>& g_fch_w = grads.tensors[static_cast<std::size_t>(view.fch_w())];
      std::vector<double>& g_fch_b = grads.tensors[static_cast<std::size_t>(view.fch_b())];
      const std::vector<double>& Wh = view.tensors[static_cast<std::size_t>(view.fch_w())];
      d_dropped.assign(cw, 0.0);
      for (int r = 0; r < config.fc_hidden; ++r) {
        const double act = cache.fc_hidden_act[static_cast<std::size_t>(r)];
        const double dpre =
            d_fc_input[static_cast<std::size_t>(r)] * (1.0 - act * act);
        double* gw_row = g_fch_w.data() + static_cast<std::size_t>(r) * cw;
        const double* w_row = Wh.data() + static_cast<std::size_t>(r) * cw;
        for (std::size_t c = 0; c < cw; ++c) {
          gw_row[c] += dpre * cache.dropped[c];
          d_dropped[c] += w_row[c] * dpre;
        }
        g_fch_b[static_cast<std::size_t>(r)] += dpre;
      }
    } else {
      d_dropped = std::move(d_fc_input);
    }

    // Through dropout into the concatenated final hidden states.
    if (!cache.dropout_mask.empty()) {
      for (std::size_t i = 0; i < d_dropped.size(); ++i) {
        d_dropped[i] *= cache.dropout_mask[i];
      }
    }

    for (std::size_t b = 0; b < model.branches.size(); ++b) {
      run_branch_backward(model.branches[b], view, static_cast<int>(b),
                          cache.branches[b], clip->timesteps,
                          d_dropped.data() + static_cast<std::ptrdiff_t>(b) * h,
                          grads);
    }
  }
  return result;
}

BatchResult loss_and_gradients(const TraceSeqModel& model,
                               std::span<const SequenceClip> batch, Rng& rng,
                               Gradients& grads) {
  std::vector<const SequenceClip*> ptrs;
  ptrs.reserve(batch.size());
  for (const SequenceClip& clip : batch) {
    ptrs.push_back(&clip);
  }
  return loss_and_gradients(model, ptrs, rng, grads);
}

void OptimizerState::init_like(const TraceSeqModel& model) {
  first_moment.clear();
  second_moment.clear();
  for (const Tensor* tensor : model.parameters()) {
    first_moment.emplace_back(tensor->size(), 0.0);
    second_moment.emplace_back(tensor->size(), 0.0);
  }
  step = 0;
}

void adam_step(TraceSeqModel& model, const Gradients& grads,
               OptimizerState& state) {
  std::vector<Tensor*> params = model.parameters();
  if (state.first_moment.empty()) {
    state.init_like(model);
  }
  if (grads.tensors.size() != params.size() ||
      state.first_moment.size() != params.size()) {
    throw Error(ErrorCode::Logic, "optimizer shapes do not match the model");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (grads.tensors[k].size() != params[k]->size() ||
        state.first_moment[k].size() != params[k]->size()) {
      throw Error(ErrorCode::Logic, "gradient shape mismatch on " + params[k]->name);
    }
  }

  ++state.step;
  const double corr1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double corr2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

  for (std::size_t k = 0; k < params.size(); ++k) {
    std::vector<float>& data = params[k]->data;
    const std::vector<double>& g = grads.tensors[k];
    std::vector<double>& m = state.first_moment[k];
    std::vector<double>& v = state.second_moment[k];
    for (std::size_t i = 0; i < data.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / corr1;
      const double v_hat = v[i] / corr2;
      const double updated =
          static_cast<double>(data[i]) -
          state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
      data[i] = static_cast<float>(updated);
    }
  }
}

void check_compatible(const NetConfig& config, const Dataset& dataset) {
  if (dataset.frame_width != config.frame_width()) {
    throw Error(ErrorCode::Config,
                "dataset width " + std::to_string(dataset.frame_width) +
                    " does not match network width " +
                    std::to_string(config.frame_width()));
  }
  if (dataset.labels.count() != config.classes) {
    throw Error(ErrorCode::Config,
                "dataset has " + std::to_string(dataset.labels.count()) +
                    " classes, network expects " +
                    std::to_string(config.classes));
  }
  if (config.mode == BranchMode::TwoBranch) {
    if (dataset.mode != FeatureMode::Motion) {
      throw Error(ErrorCode::Config,
                  "two-branch mode needs motion-mode features");
    }
    if (config.input_velocity != 2 * dataset.skeleton.keypoint_count ||
        config.input_shape !=
            2 * static_cast<int>(dataset.skeleton.edges.size())) {
      throw Error(ErrorCode::Config,
                  "branch widths do not match the dataset skeleton");
    }
  }
}

std::vector<EpochStats> train(TraceSeqModel& model, const Dataset& train_set,
                              const Dataset* val_set,
                              const TrainOptions& options) {
  if (train_set.clips.empty()) {
    throw Error(ErrorCode::InvalidInput, "training set is empty");
  }
  if (options.epochs < 0 || options.batch_size < 1) {
    throw Error(ErrorCode::Config, "epochs must be >= 0 and batch size >= 1");
  }
  check_compatible(model.config, train_set);
  if (val_set != nullptr) {
    check_compatible(model.config, *val_set);
  }

  Rng rng(options.seed);
  OptimizerState optimizer;
  optimizer.learning_rate = options.learning_rate;
  optimizer.init_like(model);
  Gradients grads;
  grads.init_like(model);

  std::vector<std::size_t> order(train_set.clips.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<EpochStats> history;
  history.reserve(static_cast<std::size_t>(options.epochs));
  const std::size_t n = train_set.clips.size();
  const std::size_t batch_size = static_cast<std::size_t>(options.batch_size);

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::size_t count = std::min(batch_size, n - start);
      std::vector<const SequenceClip*> batch;
      batch.reserve(count);
      for (std::size_t i = 0; i < count; ++i) {
        batch.push_back(&train_set.clips[order[start + i]]);
      }
      const BatchResult result = loss_and_gradients(model, batch, rng, grads);
      adam_step(model, grads, optimizer);
      loss_sum += result.mean_loss * static_cast<double>(count);
      correct += static_cast<std::size_t>(result.correct);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = loss_sum / static_cast<double>(n);
    stats.train_accuracy =
        static_cast<double>(correct) / static_cast<double>(n);
    if (val_set != nullptr) {
      stats.val_accuracy = evaluate_accuracy(model, *val_set);
    }
    history.push_back(stats);
  }
  return history;
}

int predict_class(const TraceSeqModel& model, const SequenceClip& clip) {
  const std::vector<double> probs =
      forward(model, clip, /*train_mode=*/false, nullptr);
  return static_cast<int>(std::distance(
      probs.begin(), std::max_element(probs.begin(), probs.end())));
}

std::vector<int> predict_labels(const TraceSeqModel& model,
                                const Dataset& dataset) {
  check_compatible(model.config, dataset);
  std::vector<int> out;
  out.reserve(dataset.clips.size());
  for (const SequenceClip& clip : dataset.clips) {
    out.push_back(predict_class(model, clip));
  }
  return out;
}

double evaluate_accuracy(const TraceSeqModel& model, const Dataset& dataset) {
  if (dataset.clips.empty()) {
    throw Error(ErrorCode::InvalidInput, "cannot evaluate an empty dataset");
  }
  const std::vector<int> predictions = predict_labels(model, dataset);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] == dataset.clips[i].label) ++correct;
  }
  return static_cast<double>(correct) /
         static_cast<double>(dataset.clips.size());
}

namespace {

constexpr char kModelMagic[8] = {'L', 'E', 'H', 'G', 'R', 'N', 'N', '1'};

const char* mode_string(BranchMode mode) {
  return mode == BranchMode::TwoBranch ? "two-branch" : "single-branch";
}

BranchMode mode_from_string(const std::string& name) {
  if (name == "two-branch") return BranchMode::TwoBranch;
  if (name == "single-branch") return BranchMode::SingleBranch;
  throw Error(ErrorCode::Schema, "unknown branch mode " + name);
}

}  // namespace

void save_model(const TraceSeqModel& model, const std::string& path) {
  json tensors = json::array();
  for (const Tensor* tensor : model.parameters()) {
    tensors.push_back(json{{"name", tensor->name}, {"shape", tensor->shape}});
  }
  const json header{
      {"version", 1},
      {"seed", model.seed},
      {"config",
       json{{"mode", mode_string(model.config.mode)},
            {"hidden", model.config.hidden},
            {"depth", model.config.depth},
            {"classes", model.config.classes},
            {"dropout", model.config.dropout},
            {"input_velocity", model.config.input_velocity},
            {"input_shape", model.config.input_shape},
            {"fc_hidden", model.config.fc_hidden}}},
      {"tensors", std::move(tensors)}};
  const std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorCode::Io, "cannot write " + path);
  }
  out.write(kModelMagic, sizeof(kModelMagic));
  const std::uint64_t header_size = header_text.size();
  out.write(reinterpret_cast<const char*>(&header_size), sizeof(header_size));
  out.write(header_text.data(),
            static_cast<std::streamsize>(header_text.size()));
  for (const Tensor* tensor : model.parameters()) {
    out.write(reinterpret_cast<const char*>(tensor->data.data()),
              static_cast<std::streamsize>(tensor->size() * sizeof(float)));
  }
  if (!out) {
    throw Error(ErrorCode::Io, "short write to " + path);
  }
}

TraceSeqModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::Io, "cannot open " + path);
  }
  char magic[sizeof(kModelMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kModelMagic, sizeof(magic)) != 0) {
    throw Error(ErrorCode::Schema, path + " is not a weight file");
  }
  std::uint64_t header_size = 0;
  in.read(reinterpret_cast<char*>(&header_size), sizeof(header_size));
  if (!in) {
    throw Error(ErrorCode::Schema, "truncated weight header");
  }
  std::string header_text(header_size, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_size));
  if (!in) {
    throw Error(ErrorCode::Schema, "truncated weight header");
  }
  const json header = parse_json(header_text, path + " header");

  TraceSeqModel model;
  try {
    if (header.at("version").get<int>() != 1) {
      throw Error(ErrorCode::Schema, "unsupported weight file version");
    }
    const json& cfg = header.at("config");
    NetConfig config;
    config.mode = mode_from_string(cfg.at("mode").get<std::string>());
    config.hidden = cfg.at("hidden").get<int>();
    config.depth = cfg.at("depth").get<int>();
    config.classes = cfg.at("classes").get<int>();
    config.dropout = cfg.at("dropout").get<double>();
    config.input_velocity = cfg.at("input_velocity").get<int>();
    config.input_shape = cfg.at("input_shape").get<int>();
    config.fc_hidden = cfg.at("fc_hidden").get<int>();
    model = build_model(config);
    model.seed = header.at("seed").get<std::uint64_t>();

    const json& tensors = header.at("tensors");
    const std::vector<Tensor*> params = model.parameters();
    if (tensors.size() != params.size()) {
      throw Error(ErrorCode::Schema, "tensor table does not match config");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (tensors[i].at("name").get<std::string>() != params[i]->name ||
          tensors[i].at("shape").get<std::vector<int>>() != params[i]->shape) {
        throw Error(ErrorCode::Schema,
                    "tensor " + params[i]->name + " does not match config");
      }
    }
    for (Tensor* tensor : params) {
      in.read(reinterpret_cast<char*>(tensor->data.data()),
              static_cast<std::streamsize>(tensor->size() * sizeof(float)));
      if (!in) {
        throw Error(ErrorCode::Schema, "truncated weight tensors");
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Schema,
                std::string("bad weight header: ") + e.what());
  }
  return model;
}

StreamPredictor::StreamPredictor(TraceSeqModel model, TrackingConfig tracking,
                                 TriggerConfig trigger, SkeletonSpec skeleton,
                                 FeatureMode mode, int t_obj)
    : model_(std::move(model)),
      store_(tracking),
      trigger_(trigger),
      skeleton_(std::move(skeleton)),
      mode_(mode),
      t_obj_(t_obj) {
  if (trigger_.prob_threshold <= 0.0 || trigger_.prob_threshold >= 1.0 ||
      trigger_.consecutive < 1 || trigger_.refractory < 0) {
    throw Error(ErrorCode::Config, "bad trigger configuration");
  }
  if (t_obj_ < 2) {
    throw Error(ErrorCode::Config, "objective timestep must be >= 2");
  }
}

std::vector<GestureEvent> StreamPredictor::step(const FrameObservation& frame) {
  const TraceEvents events = store_.step(frame);
  for (std::int64_t id : events.terminated) {
    states_.erase(id);
  }

  const std::size_t need = mode_ == FeatureMode::Motion
                               ? static_cast<std::size_t>(t_obj_) + 1
                               : static_cast<std::size_t>(t_obj_);
  std::vector<GestureEvent> out;
  for (const auto& [id, trace] : store_.active()) {
    TriggerState& state = states_[id];
    if (frame.frame_index < state.refractory_until) {
      continue;
    }
    const bool fresh = trace.latest().frame_index == frame.frame_index;
    bool window_ok = fresh && trace.size() >= need;
    if (window_ok) {
      for (std::size_t i = trace.size() - need + 1; i < trace.size(); ++i) {
        if (trace.at(i).frame_index != trace.at(i - 1).frame_index + 1) {
          window_ok = false;
          break;
        }
      }
    }
    if (!window_ok) {
      state.streak = 0;
      continue;
    }

    const MotionFeatureSequence window =
        mode_ == FeatureMode::Motion
            ? motion_sequence(trace, static_cast<std::size_t>(t_obj_), skeleton_)
            : box_sequence(trace, static_cast<std::size_t>(t_obj_));
    const std::vector<double> probs =
        forward(model_, window, /*train_mode=*/false, nullptr);
    const int best = static_cast<int>(std::distance(
        probs.begin(), std::max_element(probs.begin(), probs.end())));
    const double best_prob = probs[static_cast<std::size_t>(best)];

    if (best >= 1 && best_prob > trigger_.prob_threshold) {
      if (state.streak_class == best) {
        ++state.streak;
      } else {
        state.streak_class = best;
        state.streak = 1;
      }
    } else {
      state.streak = 0;
    }

    if (state.streak >= trigger_.consecutive) {
      out.push_back({frame.frame_index, id, best, best_prob});
      state.streak = 0;
      state.refractory_until = frame.frame_index + trigger_.refractory + 1;
    }
  }
  return out;
}

std::vector<GestureEvent> predict_stream(const TraceSeqModel& model,
                                         const std::vector<FrameObservation>& frames,
                                         const TrackingConfig& tracking,
                                         const TriggerConfig& trigger,
                                         const SkeletonSpec& skeleton,
                                         FeatureMode mode, int t_obj) {
  StreamPredictor predictor(model, tracking, trigger, skeleton, mode, t_obj);
  std::vector<GestureEvent> out;
  for (const FrameObservation& frame : frames) {
    std::vector<GestureEvent> events = predictor.step(frame);
    out.insert(out.end(), events.begin(), events.end());
  }
  return out;
}

}  // namespace lehgr
