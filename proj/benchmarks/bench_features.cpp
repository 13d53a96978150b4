#include <benchmark/benchmark.h>

#include "lehgr/dataset.hpp"
#include "lehgr/features.hpp"
#include "lehgr/rng.hpp"
#include "lehgr/synth.hpp"

namespace {

using namespace lehgr;

MotionFeatureSequence wave_sequence(int frames) {
  const SkeletonSpec skeleton = star_skeleton();
  GestureScript script;
  script.kind = TrajectoryKind::WaveLeft;
  script.start = 0;
  script.end = frames + 1;
  Rng rng(3);
  HandTrace trace = [&] {
    HandTrace t(0, static_cast<std::size_t>(frames) + 1);
    for (const HandDetection& det : synth_gesture_trace(script, skeleton, rng)) {
      t.append(det);
    }
    return t;
  }();
  return motion_sequence(trace, static_cast<std::size_t>(frames), skeleton);
}

void BM_MotionSequence(benchmark::State& state) {
  const int frames = static_cast<int>(state.range(0));
  const SkeletonSpec skeleton = star_skeleton();
  GestureScript script;
  script.kind = TrajectoryKind::WaveLeft;
  script.start = 0;
  script.end = frames + 1;
  Rng rng(3);
  HandTrace trace(0, static_cast<std::size_t>(frames) + 1);
  for (const HandDetection& det : synth_gesture_trace(script, skeleton, rng)) {
    trace.append(det);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        motion_sequence(trace, static_cast<std::size_t>(frames), skeleton));
  }
}
BENCHMARK(BM_MotionSequence)->Arg(13)->Arg(48);

void BM_ResampleClip(benchmark::State& state) {
  const MotionFeatureSequence seq = wave_sequence(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(resample_clip(seq, 13));
  }
}
BENCHMARK(BM_ResampleClip)->Arg(8)->Arg(23)->Arg(48);

}  // namespace
