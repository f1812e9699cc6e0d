// Serial reference loops against their OpenMP counterparts.

#include <fstream>

#include <benchmark/benchmark.h>

#include "ascertain/simstudy.hpp"
#include "ascertain/threesided.hpp"

using namespace ascertain;

namespace {

const TableInput& observed() {
  static const TableInput t = [] {
    std::ifstream in(std::string(ASCERTAIN_DATA_DIR) + "/nvdrs_observed.csv");
    return read_table_csv(in);
  }();
  return t;
}

BootstrapOptions bootstrap_options(int replicates) {
  BootstrapOptions o;
  o.replicates = replicates;
  o.seed = 1;
  return o;
}

void BM_BootstrapSerial(benchmark::State& state) {
  const auto& in = observed();
  for (auto _ : state) {
    auto d = bootstrap_null_serial(in.tables.at("E"), in.tables.at("U"), Regime::incomplete,
                                   bootstrap_options(static_cast<int>(state.range(0))));
    benchmark::DoNotOptimize(d.sorted.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_BootstrapParallel(benchmark::State& state) {
  const auto& in = observed();
  for (auto _ : state) {
    auto d = bootstrap_null(in.tables.at("E"), in.tables.at("U"), Regime::incomplete,
                            bootstrap_options(static_cast<int>(state.range(0))));
    benchmark::DoNotOptimize(d.sorted.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
  state.counters["threads"] = effective_threads({});
}

SimConfig bias_config(int replicates) {
  SimConfig c;
  c.lists = {3, 5};
  c.replicates = replicates;
  c.seed = 2;
  return c;
}

void BM_BiasSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(bias_study_serial(bias_config(static_cast<int>(state.range(0)))));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 10);
}

void BM_BiasParallel(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(bias_study(bias_config(static_cast<int>(state.range(0)))));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 10);
  state.counters["threads"] = effective_threads({});
}

}  // namespace

BENCHMARK(BM_BootstrapSerial)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BootstrapParallel)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BiasSerial)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BiasParallel)->Arg(2000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
