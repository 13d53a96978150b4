#include <benchmark/benchmark.h>

#include <vector>

#include "lehgr/rng.hpp"
#include "lehgr/tracking.hpp"
#include "lehgr/types.hpp"

namespace {

using namespace lehgr;

std::vector<HandDetection> random_detections(int count, Rng& rng,
                                             std::int64_t frame) {
  std::vector<HandDetection> dets;
  for (int i = 0; i < count; ++i) {
    HandDetection det;
    det.box = {rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8),
               rng.uniform(0.05, 0.2), rng.uniform(0.05, 0.2)};
    for (int k = 0; k < 5; ++k) {
      det.keypoints.push_back({rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)});
    }
    det.frame_index = frame;
    dets.push_back(std::move(det));
  }
  return dets;
}

void BM_Associate(benchmark::State& state) {
  const int hands = static_cast<int>(state.range(0));
  Rng rng(42);
  TraceStore store;
  FrameObservation seed_frame;
  seed_frame.frame_index = 0;
  seed_frame.detections = random_detections(hands, rng, 0);
  store.step(seed_frame);
  const std::vector<HandDetection> dets = random_detections(hands, rng, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(store.associate(dets));
  }
}
BENCHMARK(BM_Associate)->Arg(2)->Arg(4)->Arg(8);

void BM_TrackerStep(benchmark::State& state) {
  const int hands = static_cast<int>(state.range(0));
  Rng rng(7);
  std::int64_t frame = 0;
  TraceStore store;
  for (auto _ : state) {
    FrameObservation obs;
    obs.frame_index = frame;
    obs.detections = random_detections(hands, rng, frame);
    store.step(obs);
    ++frame;
  }
}
BENCHMARK(BM_TrackerStep)->Arg(2)->Arg(4);

}  // namespace
