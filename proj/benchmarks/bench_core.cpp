#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "pixelreg/grid_graph.hpp"
#include "pixelreg/image.hpp"
#include "pixelreg/metrics.hpp"
#include "pixelreg/optim.hpp"
#include "pixelreg/regularizers.hpp"
#include "pixelreg/rng.hpp"
#include "pixelreg/segnet.hpp"

using namespace pixelreg;

namespace {

Image random_image(std::uint64_t seed, int rows, int cols, double lo = 0.0, double hi = 1.0) {
  Rng rng(seed);
  Image img(rows, cols);
  for (auto& v : img.v) v = rng.uniform(lo, hi);
  return img;
}

Image random_mask(std::uint64_t seed, int rows, int cols) {
  Rng rng(seed);
  Image img(rows, cols);
  for (auto& v : img.v) v = rng.uniform() < 0.15 ? 1.0 : 0.0;
  return img;
}

void bm_quadratic_form(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  graph::EdgeList el = graph::build_grid_edges({side, side}, graph::Connectivity::N4);
  graph::WeightedLaplacian lap = graph::laplacian_from_edges(el);
  Rng rng(1);
  std::vector<double> y(lap.n);
  for (auto& v : y) v = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(graph::quadratic_form(lap, y));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(el.edges.size()));
}

void bm_laplacian_matvec(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  graph::EdgeList el = graph::build_grid_edges({side, side}, graph::Connectivity::N4);
  graph::WeightedLaplacian lap = graph::laplacian_from_edges(el);
  Rng rng(2);
  std::vector<double> y(lap.n);
  for (auto& v : y) v = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(graph::laplacian_matvec(lap, y));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(el.edges.size()));
}

void bm_gbs(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  Image y = random_image(3, side, side);
  Image t = random_mask(4, side, side);
  reg::RegularizerConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(reg::gbs_value_grad(y, t, cfg));
}

void bm_glrdn(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  Image y = random_image(5, side, side);
  Image t = random_mask(6, side, side);
  reg::RegularizerConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(reg::glrdn_value_grad(y, t, cfg));
}

void bm_ec_regularizer(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  Image y = random_image(7, side, side);
  for (auto _ : state) benchmark::DoNotOptimize(reg::ec_regularizer(y));
}

void bm_bce(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  Image y = random_image(8, side, side, 0.01, 0.99);
  Image t = random_mask(9, side, side);
  reg::RegularizerConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(reg::bce_value_grad(y, t, cfg));
}

void bm_forward(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  net::NetworkSpec spec{2, 8, 1};
  net::ParamSet params = net::init_params(spec, 1);
  net::Tensor4 x(4, 1, side, side);
  Rng rng(10);
  for (auto& v : x.v) v = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(net::predict(params, spec, x));
  state.SetItemsProcessed(state.iterations() * 4);
}

void bm_forward_backward(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  net::NetworkSpec spec{2, 8, 1};
  net::ParamSet params = net::init_params(spec, 1);
  net::Tensor4 x(4, 1, side, side);
  Rng rng(11);
  for (auto& v : x.v) v = rng.uniform();
  net::Tensor4 dy(4, 1, side, side);
  for (auto& v : dy.v) v = rng.uniform(-1.0, 1.0);
  for (auto _ : state) {
    net::Forward fwd = net::forward(params, spec, x);
    benchmark::DoNotOptimize(net::backward(params, spec, fwd.cache, dy));
  }
  state.SetItemsProcessed(state.iterations() * 4);
}

void bm_adam_step(benchmark::State& state) {
  net::NetworkSpec spec{2, 8, 1};
  net::ParamSet params = net::init_params(spec, 1);
  net::GradSet grads = net::zero_grads(params);
  Rng rng(12);
  for (auto& g : grads.g)
    for (auto& v : g) v = rng.uniform(-0.1, 0.1);
  opt::AdamState adam = opt::init_adam(params);
  for (auto _ : state) opt::adam_step(params, grads, adam, 1e-3);
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(params.total_parameters()));
}

void bm_roc_auc(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(13);
  std::vector<double> scores(n);
  std::vector<std::uint8_t> truth(n);
  for (int i = 0; i < n; ++i) {
    scores[i] = rng.uniform();
    truth[i] = rng.uniform() < 0.5 ? 0 : 1;
  }
  for (auto _ : state) benchmark::DoNotOptimize(metrics::auc(metrics::roc_curve(scores, truth)));
  state.SetItemsProcessed(state.iterations() * n);
}

}  // namespace

BENCHMARK(bm_quadratic_form)->Arg(64)->Arg(256);
BENCHMARK(bm_laplacian_matvec)->Arg(64)->Arg(256);
BENCHMARK(bm_gbs)->Arg(48)->Arg(128);
BENCHMARK(bm_glrdn)->Arg(48)->Arg(128);
BENCHMARK(bm_ec_regularizer)->Arg(48)->Arg(128);
BENCHMARK(bm_bce)->Arg(48)->Arg(128);
BENCHMARK(bm_forward)->Arg(32)->Arg(48);
BENCHMARK(bm_forward_backward)->Arg(32)->Arg(48);
BENCHMARK(bm_adam_step);
BENCHMARK(bm_roc_auc)->Arg(10000)->Arg(100000);

BENCHMARK_MAIN();
