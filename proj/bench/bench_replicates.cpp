#include "drmel/simulation.hpp"

#include <benchmark/benchmark.h>

#include <string>

namespace {

drmel::Scenario scenario(const char* name, int reps) {
  drmel::Scenario s = drmel::load_scenario(std::string(DRMEL_SCENARIO_DIR) + "/" + name + ".json");
  s.reps = reps;
  return s;
}

void BM_Replicate(benchmark::State& st, const char* name) {
  const drmel::Scenario s = scenario(name, 1);
  const auto cells = drmel::scenario_cells(s);
  std::uint64_t rep = 0;
  for (auto _ : st) benchmark::DoNotOptimize(drmel::run_replicate(s, cells, rep++));
}

void BM_Table(benchmark::State& st, const char* name, bool parallel) {
  const drmel::Scenario s = scenario(name, static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(drmel::run_table(s, parallel));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

}  // namespace

BENCHMARK_CAPTURE(BM_Replicate, table1, "table1")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Replicate, table2, "table2")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Replicate, table5, "table5")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Table, table1_serial, "table1", false)->Arg(20)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Table, table1_parallel, "table1", true)->Arg(20)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
