// Command-line front end: train, eval, inspect, export, ttest.
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "skill1/checkpoint.hpp"
#include "skill1/config.hpp"
#include "skill1/error.hpp"
#include "skill1/orchestrator.hpp"
#include "skill1/stats.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

}  // namespace

int main(int argc, char** argv) {
  using namespace skill1;
  CLI::App app{"skill1: skill selection, utilization and distillation trained from one outcome signal"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "run a co-evolution training loop");
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> ablations;
  std::string out_dir = "run";
  std::optional<std::size_t> steps;
  train->add_option("--config", config_path, "run configuration (JSON)")->required();
  train->add_option("--seed", seed, "override the run seed");
  train->add_option("--ablate", ablations,
                    "no_select|no_distill|no_library|zero_l1|zero_l2 (repeatable)");
  train->add_option("--out", out_dir, "output directory")->capture_default_str();
  train->add_option("--steps", steps, "override max_steps");

  // eval
  auto* eval = app.add_subcommand("eval", "greedy evaluation of trained artifacts");
  std::string lib_path, params_path;
  std::size_t episodes = 1000;
  std::uint64_t eval_seed = 12345;
  eval->add_option("--library", lib_path, "library snapshot")->required();
  eval->add_option("--params", params_path, "parameter checkpoint")->required();
  eval->add_option("--episodes", episodes, "number of episodes")->capture_default_str();
  eval->add_option("--seed", eval_seed, "evaluation task stream seed")->capture_default_str();

  // inspect
  auto* inspect = app.add_subcommand("inspect", "summarize a library snapshot");
  std::size_t top = 10;
  inspect->add_option("--library", lib_path, "library snapshot")->required();
  inspect->add_option("--top", top, "skills to list, by utility")->capture_default_str();

  // export
  auto* exp = app.add_subcommand("export", "export skill usage and embeddings");
  std::string format = "jsonl";
  std::string export_out;
  exp->add_option("--library", lib_path, "library snapshot")->required();
  exp->add_option("--format", format, "jsonl or csv")->check(CLI::IsMember({"jsonl", "csv"}));
  exp->add_option("--out", export_out, "output file (default: stdout)");

  // ttest
  auto* ttest = app.add_subcommand("ttest", "Welch's t-test on a column of two metrics CSVs");
  std::string a_path, b_path, column = "mean_outcome";
  ttest->add_option("--a", a_path, "first CSV")->required();
  ttest->add_option("--b", b_path, "second CSV")->required();
  ttest->add_option("--column", column, "column name")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train) {
      RunConfig cfg = load_config(config_path);
      if (seed) cfg.seed = *seed;
      if (steps) cfg.max_steps = *steps;
      for (const auto& a : ablations) cfg.apply_ablation(a);
      cfg.validate();
      const auto out = run_training(cfg, out_dir, [](const StepReport& r) {
        const auto& m = r.metrics;
        if (m.step % 10 == 0)
          std::fprintf(stderr, "step %4lld  outcome %.3f  precision %.3f  lib %zu\n",
                       static_cast<long long>(m.step), m.mean_outcome, m.selection_precision,
                       m.library_size);
      });
      std::cout << "metrics: " << out.metrics_csv.string() << '\n'
                << "library: " << out.library_snapshot.string() << '\n'
                << "params:  " << out.params_checkpoint.string() << '\n';
    } else if (*eval) {
      const Checkpoint ck = load_checkpoint(params_path);
      const RunConfig cfg = config_from_checkpoint(ck);
      const SkillLibrary lib = SkillLibrary::load(lib_path);
      const EvalResult res = run_eval(cfg, lib, ck.policy, episodes, eval_seed);
      std::printf("success_rate %.4f (%zu/%zu)\n", res.success_rate, res.successes, res.episodes);
      for (const auto& t : res.per_type)
        std::printf("type %zu  %.4f (%zu/%zu)\n", t.task_type, t.success_rate(), t.successes,
                    t.episodes);
    } else if (*inspect) {
      const SkillLibrary lib = SkillLibrary::load(lib_path);
      std::printf("skills %zu / capacity %zu  ema_rate %g  top_k %zu  total_selections %llu\n",
                  lib.size(), lib.config().capacity, lib.config().ema_rate, lib.config().top_k,
                  static_cast<unsigned long long>(lib.total_selections()));
      std::vector<const Skill*> order;
      for (const auto& s : lib.skills()) order.push_back(&s);
      std::sort(order.begin(), order.end(), [](auto* a, auto* b) {
        return a->utility != b->utility ? a->utility > b->utility : a->id < b->id;
      });
      if (order.size() > top) order.resize(top);
      for (const Skill* s : order)
        std::printf("#%llu  U=%.4f  n=%llu  step=%lld  desc=\"%s\"  strat=\"%s\"\n",
                    static_cast<unsigned long long>(s->id), s->utility,
                    static_cast<unsigned long long>(s->usage_count),
                    static_cast<long long>(s->created_step), s->desc.c_str(), s->strat.c_str());
    } else if (*exp) {
      const SkillLibrary lib = SkillLibrary::load(lib_path);
      const ExportFormat f = format == "csv" ? ExportFormat::csv : ExportFormat::jsonl;
      if (export_out.empty())
        export_library(lib, std::cout, f);
      else
        export_library(lib, std::filesystem::path(export_out), f);
    } else if (*ttest) {
      const auto a = read_csv_column(a_path, column);
      const auto b = read_csv_column(b_path, column);
      const WelchResult r = welch_t_test(a, b);
      std::printf("t %.6f\ndf %.6f\np %.6g\n", r.t, r.df, r.p_two_sided);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
