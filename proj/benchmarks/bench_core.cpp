#include <benchmark/benchmark.h>

#include <string>

#include "fedpt/fed_algorithms.hpp"
#include "fedpt/local_optim.hpp"
#include "fedpt/objectives.hpp"

namespace {

fedpt::ProblemSuite logistic_suite() {
  fedpt::LogisticSuiteSpec spec;
  spec.n = 100;
  spec.d = 50;
  spec.samples_per_class = 200;
  spec.partition.classes = 5;
  spec.partition.dirichlet_alpha = 0.1;
  spec.batch_size = 8;
  spec.seed = 1;
  return fedpt::make_dirichlet_logistic_suite(spec);
}

void BM_AdamStep(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const fedpt::ParamVector zero(d, 0.0);
  auto adam = fedpt::AdamState::start_interval(zero, zero, {});
  fedpt::ParamVector g(d);
  for (std::size_t j = 0; j < d; ++j) g[j] = 0.01 * double(j % 7) - 0.03;
  for (auto _ : state) benchmark::DoNotOptimize(adam.step(g));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_AdamStep)->Arg(50)->Arg(1000)->Arg(100000);

void BM_LogisticFullGradient(benchmark::State& state) {
  const auto suite = logistic_suite();
  const fedpt::ParamVector x(suite.dimension, 0.05);
  for (auto _ : state) benchmark::DoNotOptimize(fedpt::full_gradient(suite, x));
}
BENCHMARK(BM_LogisticFullGradient);

void BM_Round(benchmark::State& state) {
  const auto kind = static_cast<fedpt::AlgorithmKind>(state.range(0));
  const auto suite = logistic_suite();
  auto server = fedpt::ServerState::initial(suite.num_clients(),
                                            fedpt::ParamVector::zeros(suite.dimension));
  fedpt::RoundHyper h;
  h.S = 10;
  h.Y = 5;
  h.threads = static_cast<std::size_t>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(fedpt::run_round(server, suite, kind, h));
  state.SetLabel(std::string(fedpt::to_string(kind)));
}
BENCHMARK(BM_Round)
    ->Args({static_cast<long>(fedpt::AlgorithmKind::FAdamGT), 1})
    ->Args({static_cast<long>(fedpt::AlgorithmKind::FAdamGT), 4})
    ->Args({static_cast<long>(fedpt::AlgorithmKind::LocalAdam), 1})
    ->Args({static_cast<long>(fedpt::AlgorithmKind::Scaffold), 1});

}  // namespace

BENCHMARK_MAIN();
