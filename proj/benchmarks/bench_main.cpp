#include <benchmark/benchmark.h>

#include "pstnet/context.hpp"
#include "pstnet/s2r.hpp"
#include "pstnet/synthgen.hpp"
#include "pstnet/trainer.hpp"

namespace pstnet {
namespace {

void BM_ForwardDesk(benchmark::State& state) {
  const auto side = static_cast<int>(state.range(0));
  auto model = build_model(TrainConfig::desk().model, 0);
  model->eval();
  torch::NoGradGuard g;
  const auto frames = torch::rand({1, 3, side, side});
  const auto flow = torch::zeros({1, 2, side, side});
  for (auto _ : state) benchmark::DoNotOptimize(model->forward(frames, flow).r_final);
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ForwardDesk)->Arg(96)->Arg(192)->Unit(benchmark::kMillisecond);

void BM_TrainStepDesk(benchmark::State& state) {
  auto model = build_model(TrainConfig::desk().model, 0);
  torch::optim::Adam opt(model->parameters(), torch::optim::AdamOptions(1e-4));
  const auto frames = torch::rand({4, 3, 96, 96});
  const auto flow = torch::zeros({4, 2, 96, 96});
  for (auto _ : state) {
    opt.zero_grad();
    model->forward(frames, flow).r_final_raw.mean().backward();
    opt.step();
  }
}
BENCHMARK(BM_TrainStepDesk)->Unit(benchmark::kMillisecond);

void BM_Fda(benchmark::State& state) {
  const auto side = state.range(0);
  const Frame src(torch::rand({3, side, side}));
  const Frame tgt(torch::rand({3, side, side}));
  for (auto _ : state) benchmark::DoNotOptimize(fda(src, tgt, 0.1).tensor());
}
BENCHMARK(BM_Fda)->Arg(96)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_BlockMatching(benchmark::State& state) {
  const auto side = state.range(0);
  const Frame a(torch::rand({3, side, side}));
  const Frame b(torch::roll(a.tensor(), {1, 2}, {1, 2}));
  for (auto _ : state) benchmark::DoNotOptimize(block_matching_flow(a, b).tensor());
}
BENCHMARK(BM_BlockMatching)->Arg(96)->Arg(192)->Unit(benchmark::kMillisecond);

void BM_GenerateClip(benchmark::State& state) {
  const auto spec = synth::random_scene_spec(1, 10, 96, 96);
  for (auto _ : state) benchmark::DoNotOptimize(synth::generate_clip(spec, 2).size());
}
BENCHMARK(BM_GenerateClip)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace pstnet

BENCHMARK_MAIN();
