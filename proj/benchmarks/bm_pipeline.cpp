#include <benchmark/benchmark.h>

#include "flowsynth/flowsynth.hpp"

using namespace flowsynth;

namespace {

constexpr int kHeight = 544;
constexpr int kWidth = 1280;

const Image& source() {
  static const Image img = procedural_texture(kHeight, kWidth, 11);
  return img;
}

const Image& auxiliary() {
  static const Image img = procedural_texture(kHeight, kWidth, 12);
  return img;
}

const SegmentationStack& stack() {
  static const SegmentationStack s = build_segmentation_stack(source(), SynthesisConfig{}.component_counts);
  return s;
}

TpsWarp random_warp(int grid, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return fit_tps(sample_control_grid(kHeight, kWidth, grid, 25.0, rng));
}

}  // namespace

static void bm_bilinear_sample(benchmark::State& state) {
  const CoordGrid grid = evaluate_warp_box(random_warp(4, 1), source().bounds());
  for (auto _ : state) benchmark::DoNotOptimize(bilinear_sample(source(), grid));
  state.SetItemsProcessed(state.iterations() * kHeight * kWidth);
}
BENCHMARK(bm_bilinear_sample)->Unit(benchmark::kMillisecond);

static void bm_tps_fit(benchmark::State& state) {
  Rng rng = make_rng(2);
  const ControlGrid cg = sample_control_grid(kHeight, kWidth, int(state.range(0)), 25.0, rng);
  for (auto _ : state) benchmark::DoNotOptimize(fit_tps(cg));
}
BENCHMARK(bm_tps_fit)->Arg(3)->Arg(5);

// Dense evaluation over the full frame; cost grows with the control count.
static void bm_tps_dense(benchmark::State& state) {
  const TpsWarp warp = random_warp(int(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_warp_box(warp, source().bounds()));
  state.SetItemsProcessed(state.iterations() * kHeight * kWidth);
}
BENCHMARK(bm_tps_dense)->Arg(3)->Arg(4)->Arg(5)->Unit(benchmark::kMillisecond);

static void bm_slic(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(slic_segment(source(), int(state.range(0))));
}
BENCHMARK(bm_slic)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

static void bm_generate_sample(benchmark::State& state) {
  const SynthesisConfig cfg;
  stack();
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(generate_sample(source(), auxiliary(), stack(), cfg, seed++));
}
BENCHMARK(bm_generate_sample)->Unit(benchmark::kMillisecond);

static void bm_augment(benchmark::State& state) {
  const SceneSample base = generate_sample(source(), auxiliary(), stack(), SynthesisConfig{}, 5);
  const AugmentConfig cfg;
  Rng rng = make_rng(6);
  for (auto _ : state) {
    state.PauseTiming();
    SceneSample s = base;
    state.ResumeTiming();
    benchmark::DoNotOptimize(augment(std::move(s), cfg, rng));
  }
}
BENCHMARK(bm_augment)->Unit(benchmark::kMillisecond);

static void bm_encode_png(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(encode_png(source()));
  state.SetBytesProcessed(state.iterations() * kHeight * kWidth * 3);
}
BENCHMARK(bm_encode_png)->Unit(benchmark::kMillisecond);

static void bm_encode_flo(benchmark::State& state) {
  const FlowField flow = displacement_field(random_warp(4, 7), kHeight, kWidth);
  for (auto _ : state) benchmark::DoNotOptimize(encode_flo(flow));
}
BENCHMARK(bm_encode_flo)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
