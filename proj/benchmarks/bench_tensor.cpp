#include <benchmark/benchmark.h>

#include "lipgail/nets.hpp"
#include "lipgail/rng.hpp"

using namespace lipgail;

static void BM_MatmulForward(benchmark::State& state) {
  int n = static_cast<int>(state.range(0));
  Rng rng(7);
  std::vector<double> av(static_cast<size_t>(n) * n), bv(av.size());
  for (auto& x : av) x = rng.normal();
  for (auto& x : bv) x = rng.normal();
  auto a = ad::Tensor::constant(n, n, av);
  auto b = ad::Tensor::constant(n, n, bv);
  for (auto _ : state) {
    auto c = ad::matmul(a, b);
    benchmark::DoNotOptimize(c.data().data());
  }
}
BENCHMARK(BM_MatmulForward)->Arg(64)->Arg(128);

static void BM_PolicyForwardBackward(benchmark::State& state) {
  int batch = static_cast<int>(state.range(0));
  Rng rng(11);
  ParamStore store;
  PolicyNet policy(store, 4, 2, rng);
  std::vector<double> sv(static_cast<size_t>(batch) * 4);
  for (auto& x : sv) x = rng.normal();
  auto s = ad::Tensor::constant(batch, 4, sv);
  for (auto _ : state) {
    store.zero_grads();
    auto pf = policy.forward(s);
    auto loss = ad::mean(ad::square(pf.mean));
    ad::backward(loss);
    benchmark::DoNotOptimize(loss.value());
  }
}
BENCHMARK(BM_PolicyForwardBackward)->Arg(64)->Arg(256);

BENCHMARK_MAIN();
