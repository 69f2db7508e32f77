#include <benchmark/benchmark.h>

#include <random>

#include "coordsr/denoise.hpp"
#include "coordsr/fft.hpp"
#include "coordsr/metrics.hpp"
#include "coordsr/models.hpp"
#include "coordsr/ops.hpp"
#include "coordsr/phantom.hpp"
#include "coordsr/resample.hpp"
#include "coordsr/tape.hpp"

using namespace coordsr;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = u(rng);
  return t;
}

}  // namespace

static void BM_Conv2dForwardBackward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int ch = 16;
  const Tensor x = random_tensor({1, ch, n, n}, 1);
  Tensor w = random_tensor({ch, ch, 3, 3}, 2);
  Tensor b = random_tensor({ch}, 3);
  w.set_requires_grad(true);
  b.set_requires_grad(true);
  for (auto _ : state) {
    Tape tape;
    Var wv = tape.leaf(w);
    Var y = ops::conv2d(tape.constant(x), wv, tape.leaf(b));
    tape.backward(ops::sum(y));
    benchmark::DoNotOptimize(tape.grad(wv).data().data());
  }
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_Conv2dForwardBackward)->Arg(32)->Arg(64);

static void BM_Fft2(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const ImageGrid img = make_phantom(PhantomKind::shepp_logan, n, 0);
  for (auto _ : state) {
    KSpace k = fft2(img);
    benchmark::DoNotOptimize(k);
  }
}
BENCHMARK(BM_Fft2)->Arg(128)->Arg(256)->Arg(240);

static void BM_Bicubic(benchmark::State& state) {
  const ImageGrid img = make_phantom(PhantomKind::texture, 64, 0);
  const int out = static_cast<int>(state.range(0));
  for (auto _ : state) {
    ImageGrid y = bicubic_resize(img, out, out);
    benchmark::DoNotOptimize(y);
  }
}
BENCHMARK(BM_Bicubic)->Arg(128)->Arg(256);

static void BM_CoordInfer(benchmark::State& state) {
  ModelConfig cfg = ModelConfig::tiny();
  cfg.liif_mode = state.range(0) != 0;
  const Model model(cfg, 0);
  const ImageGrid lr = make_phantom(PhantomKind::texture, 32, 1);
  for (auto _ : state) {
    ImageGrid y = model.infer(lr, 96, 96);
    benchmark::DoNotOptimize(y);
  }
}
BENCHMARK(BM_CoordInfer)->Arg(0)->Arg(1);

static void BM_Vif(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const ImageGrid ref = make_phantom(PhantomKind::texture, n, 2);
  const ImageGrid dist = bicubic_resize(make_lr_pair(ref, 2.0).lr, n, n);
  for (auto _ : state) benchmark::DoNotOptimize(vif(dist, ref));
}
BENCHMARK(BM_Vif)->Arg(128)->Arg(256);

static void BM_Denoise(benchmark::State& state) {
  const ImageGrid img = make_phantom(PhantomKind::texture, 128, 3);
  DenoiserSpec spec;
  spec.sigma = 0.03;
  for (auto _ : state) {
    ImageGrid y = denoise(img, spec);
    benchmark::DoNotOptimize(y);
  }
}
BENCHMARK(BM_Denoise);

BENCHMARK_MAIN();
