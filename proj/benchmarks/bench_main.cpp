#include <benchmark/benchmark.h>

#include "corticarve/distance.hpp"
#include "corticarve/metrics.hpp"
#include "corticarve/nnet.hpp"
#include "corticarve/phantom.hpp"
#include "corticarve/synthesis.hpp"
#include "corticarve/train.hpp"

using namespace corticarve;

namespace {

BinaryMask ball(int n) {
  BinaryMask m(Grid::make({n, n, n}));
  const double c = (n - 1) / 2.0, r = n / 3.0;
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) m.at(x, y, z) = (x - c) * (x - c) + (y - c) * (y - c) + (z - c) * (z - c) <= r * r;
  return m;
}

UNetConfig desk_network() {
  UNetConfig c;
  c.levels = 3;
  c.filters = {16, 32, 64};
  c.input_dims = {32, 32, 32};
  c.voxel_size_mm = 4.0;
  return c;
}

}  // namespace

static void BM_SignedDistance(benchmark::State& state) {
  const BinaryMask m = ball(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(signed_distance_transform(m));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m.size()));
}
BENCHMARK(BM_SignedDistance)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_SurfaceDistances(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const BinaryMask a = ball(n);
  BinaryMask b = a;
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 1; x < n; ++x) b.at(x, y, z) = a.at(x - 1, y, z);
  for (auto _ : state) benchmark::DoNotOptimize(surface_distances(a, b));
}
BENCHMARK(BM_SurfaceDistances)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_Synthesize(benchmark::State& state) {
  const LabelVolume labels = make_phantom(PhantomConfig{}, 1);
  const SynthesisConfig cfg;
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(synthesize_sample(labels, cfg, ++seed));
}
BENCHMARK(BM_Synthesize)->Unit(benchmark::kMillisecond);

static void BM_UNetForward(benchmark::State& state) {
  const UNet<float> net(desk_network(), 1);
  Tensor<float> x(1, net.config().input_dims, 0.5f);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
}
BENCHMARK(BM_UNetForward)->Unit(benchmark::kMillisecond);

static void BM_TrainStep(benchmark::State& state) {
  UNet<float> net(desk_network(), 1);
  const SynthSample s = synthesize_sample(make_phantom(PhantomConfig{}, 1), SynthesisConfig{}, 3);
  const Tensor<float> x = to_tensor<float>(s.image);
  UNet<float>::Cache cache;
  for (auto _ : state) {
    net.forward(x, &cache);
    const LossResult l = sample_loss(Head::sdt, cache.output, s);
    Tensor<float> g(1, x.dims);
    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] = static_cast<float>(l.gradient[i]);
    const std::vector<float> grads = net.backward(cache, g);
    adam_step<float>(net, grads, 1e-4);
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
