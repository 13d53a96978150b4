#include <benchmark/benchmark.h>

#include "lehgr/net.hpp"
#include "lehgr/rng.hpp"

namespace {

using namespace lehgr;

SequenceClip random_clip(const NetConfig& config, Rng& rng, int label) {
  SequenceClip clip;
  clip.timesteps = 13;
  clip.frame_width = config.frame_width();
  clip.label = label;
  clip.features.resize(static_cast<std::size_t>(clip.timesteps) *
                       static_cast<std::size_t>(clip.frame_width));
  for (float& v : clip.features) {
    v = static_cast<float>(rng.uniform(-0.2, 0.2));
  }
  return clip;
}

void BM_Forward(benchmark::State& state) {
  NetConfig config;
  config.hidden = static_cast<int>(state.range(0));
  const TraceSeqModel model = init_network(config, 11);
  Rng rng(5);
  const SequenceClip clip = random_clip(config, rng, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward(model, clip, false, nullptr));
  }
}
BENCHMARK(BM_Forward)->Arg(16)->Arg(64);

void BM_BatchGradients(benchmark::State& state) {
  NetConfig config;
  config.hidden = static_cast<int>(state.range(0));
  const TraceSeqModel model = init_network(config, 11);
  Rng rng(5);
  std::vector<SequenceClip> batch;
  for (int i = 0; i < 32; ++i) {
    batch.push_back(random_clip(config, rng, i % config.classes));
  }
  Gradients grads;
  grads.init_like(model);
  Rng train_rng(9);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        loss_and_gradients(model, batch, train_rng, grads));
  }
}
BENCHMARK(BM_BatchGradients)->Arg(16)->Arg(64);

}  // namespace
