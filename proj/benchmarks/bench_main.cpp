#include <benchmark/benchmark.h>

#include <vector>

#include "absopf/active.hpp"
#include "absopf/nn.hpp"
#include "absopf/opf_oracle.hpp"

using namespace absopf;

namespace {

nn::Mlp bench_net(std::size_t width) {
  CounterRng rng(1);
  return nn::make_mlp({16, 16, width, 3}, 0.1, rng);
}

void BM_Forward(benchmark::State& state) {
  const auto net = bench_net(static_cast<std::size_t>(state.range(0)));
  const nn::VectorXd x = nn::VectorXd::Constant(16, 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(nn::forward(net, x));
}
BENCHMARK(BM_Forward)->Arg(16)->Arg(64)->Arg(256);

void BM_Backward(benchmark::State& state) {
  const auto net = bench_net(static_cast<std::size_t>(state.range(0)));
  const nn::VectorXd x = nn::VectorXd::Constant(16, 0.3);
  const nn::VectorXd y = nn::VectorXd::Constant(16, 0.6);
  for (auto _ : state) benchmark::DoNotOptimize(nn::backward(net, x, y));
}
BENCHMARK(BM_Backward)->Arg(16)->Arg(64)->Arg(256);

void BM_BatchBackward(benchmark::State& state) {
  const auto net = bench_net(64);
  const long m = state.range(0);
  const nn::MatrixXd X = nn::MatrixXd::Constant(16, m, 0.3);
  const nn::MatrixXd Y = nn::MatrixXd::Constant(16, m, 0.6);
  CounterRng rng(2);
  for (auto _ : state) benchmark::DoNotOptimize(nn::batch_backward(net, X, Y, &rng));
  state.SetItemsProcessed(state.iterations() * m);
}
BENCHMARK(BM_BatchBackward)->Arg(32)->Arg(128);

void BM_SolveAcopf(benchmark::State& state) {
  const auto c = state.range(0) == 2 ? grid::two_bus_fixture() : grid::three_bus_fixture();
  const auto x = c.nominal_input();
  for (auto _ : state) benchmark::DoNotOptimize(opf::solve_acopf(c, x));
}
BENCHMARK(BM_SolveAcopf)->Arg(2)->Arg(3)->Unit(benchmark::kMicrosecond);

void BM_DistributePd(benchmark::State& state) {
  CounterRng rng(3);
  std::vector<double> s(static_cast<std::size_t>(state.range(0)));
  for (auto& v : s) v = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(active::distribute(active::Distributor::PD, s, 1000));
}
BENCHMARK(BM_DistributePd)->Arg(8)->Arg(64);

void BM_Partition(benchmark::State& state) {
  CounterRng rng(4);
  std::vector<sampling::Sample> v(static_cast<std::size_t>(state.range(0)));
  for (auto& s : v) {
    s.load_factor = rng.uniform(0.8, 1.2);
    s.x = {s.load_factor};
  }
  for (auto _ : state) benchmark::DoNotOptimize(active::partition(v, 8, {0.8, 1.2}));
}
BENCHMARK(BM_Partition)->Arg(1024)->Arg(8192);

void BM_ScoreIg(benchmark::State& state) {
  const auto net = bench_net(32);
  active::Bucket b;
  CounterRng rng(5);
  for (int i = 0; i < 128; ++i) {
    sampling::Sample s;
    s.x.assign(16, rng.uniform());
    s.y.assign(16, rng.uniform());
    b.validation.push_back(std::move(s));
  }
  for (auto _ : state) benchmark::DoNotOptimize(active::score_bucket(active::Metric::IG, net, b, 25, CounterRng(6)));
}
BENCHMARK(BM_ScoreIg);

}  // namespace

BENCHMARK_MAIN();
