#include <benchmark/benchmark.h>

#include <string>

#include "skill1/orchestrator.hpp"

using namespace skill1;

namespace {

SkillLibrary filled_library(std::size_t n) {
  SkillLibrary lib(LibraryConfig{n, 0.05, 5, RetirementRule::log1p}, TextEncoder());
  Rng rng(1);
  const char* verbs[] = {"heat", "cool", "clean", "put", "find", "slice", "open", "examine"};
  const char* objects[] = {"mug", "apple", "plate", "lamp", "knife", "cabinet", "egg", "towel"};
  for (std::size_t i = 0; i < n; ++i) {
    const std::string desc = std::string(verbs[rng.index(8)]) + " the " + objects[rng.index(8)] +
                             " " + std::to_string(i);
    lib.admit(SkillDraft{"act 1 > act 2", desc}, Outcome::success, 0);
  }
  return lib;
}

template <bool Parallel>
void BM_Retrieve(benchmark::State& state) {
  const SkillLibrary lib = filled_library(static_cast<std::size_t>(state.range(0)));
  const EmbeddingVector q = lib.encoder().embed("heat the mug in the microwave");
  for (auto _ : state) {
    CandidateSet c = Parallel ? lib.retrieve_top_k(q, 5) : lib.retrieve_top_k_serial(q, 5);
    benchmark::DoNotOptimize(c);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <Execution Exec>
void BM_CollectRollouts(benchmark::State& state) {
  RunConfig cfg;
  cfg.seed = 1;
  Trainer t(cfg);
  for (int i = 0; i < 40; ++i) t.step();
  const auto tasks = t.sample_batch(41);
  for (auto _ : state) {
    auto r = t.collect_rollouts(tasks, 41, Exec);
    benchmark::DoNotOptimize(r);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(cfg.batch_tasks * cfg.group_size));
}

}  // namespace

BENCHMARK(BM_Retrieve<false>)->Name("retrieve_top_k/serial")->Arg(512)->Arg(5000)->Arg(50000);
BENCHMARK(BM_Retrieve<true>)->Name("retrieve_top_k/parallel")->Arg(512)->Arg(5000)->Arg(50000);
BENCHMARK(BM_CollectRollouts<Execution::serial>)->Name("collect_rollouts/serial");
BENCHMARK(BM_CollectRollouts<Execution::parallel>)->Name("collect_rollouts/parallel");

BENCHMARK_MAIN();
