// One PASS/FAIL line per acceptance criterion. Exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "skill1/orchestrator.hpp"
#include "skill1/rewards.hpp"
#include "skill1/stats.hpp"

using namespace skill1;

namespace {

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
  std::printf("%s  %s  (%s)\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void ndcg_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  double worst = 0.0;
  bool ideal_ok = true, ties_ok = true;
  for (std::size_t k = 1; k <= 5; ++k) {
    const auto perms = oracle::permutations(k);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> u(k);
      for (auto& x : u) x = trial % 10 == 0 ? std::round(rng.uniform() * 2.0) / 2.0 : rng.uniform();
      for (const auto& sigma : perms)
        worst = std::max(worst, std::abs(ndcg(sigma, u) - oracle::ndcg_exhaustive(sigma, u)));
      std::vector<std::size_t> ideal(k);
      std::iota(ideal.begin(), ideal.end(), std::size_t{0});
      std::stable_sort(ideal.begin(), ideal.end(), [&](auto a, auto b) { return u[a] > u[b]; });
      ideal_ok = ideal_ok && std::abs(ndcg(ideal, u) - 1.0) < 1e-12;
      const std::vector<double> tied(k, u[0]);
      for (const auto& sigma : perms) ties_ok = ties_ok && std::abs(ndcg(sigma, tied) - 1.0) < 1e-12;
    }
  }
  const double secs = seconds_since(t0);
  report(worst < 1e-12 && ideal_ok && ties_ok && secs < 5.0, "NDCG oracle",
         "max |err| " + fmt("%.2e", worst) + ", ideal " + (ideal_ok ? "1.0" : "off") + ", ties " +
             (ties_ok ? "1.0" : "off") + ", " + fmt("%.2f s", secs));
}

void ema_closed_form() {
  double worst = 0.0;
  for (double u0 : {0.0, 0.2, 0.5, 0.93}) {
    for (double alpha : {0.05, 0.01, 0.3}) {
      auto lib = SkillLibrary::load_string(fixture::handmade_snapshot({{"heat the mug", u0, 0, 0}}, 8));
      const auto cands = lib.retrieve_top_k(lib.encoder().embed("heat the mug"), 5);
      for (int n = 1; n <= 1000; ++n) {
        lib.update_utilities(cands, Outcome::success, alpha);
        const double want = 1.0 - std::pow(1.0 - alpha, n) * (1.0 - u0);
        worst = std::max(worst, std::abs(lib.skills()[0].utility - want));
      }
    }
  }
  report(worst < 1e-12, "EMA closed form", "max |err| " + fmt("%.2e", worst) + " over n <= 1000");
}

void advantage_contract() {
  Rng rng(102);
  double worst_mean = 0.0, worst_std = 0.0;
  bool const_ok = true;
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> r(16);
    for (auto& x : r) x = t % 2 ? (rng.bernoulli(0.4) ? 1.0 : 0.0) : 2.0 * rng.uniform() - 1.0;
    r[0] = 1.0;
    r[1] = 0.0;
    const auto a = grpo_advantages(r);
    worst_mean = std::max(worst_mean, std::abs(oracle::mean(a.values)));
    worst_std = std::max(worst_std, std::abs(oracle::pop_std(a.values) - 1.0));
    const auto c = grpo_advantages(std::vector<double>(16, rng.uniform()));
    for (double v : c.values) const_ok = const_ok && v == 0.0;
  }
  report(worst_mean < 1e-9 && worst_std < 1e-6 && const_ok, "Advantage contract",
         "max |mean| " + fmt("%.1e", worst_mean) + ", max |std-1| " + fmt("%.1e", worst_std) +
             (const_ok ? ", constant groups zero" : ", constant group nonzero"));
}

void gradient_checks() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(103);
  double worst_u = 0.0, worst_r = 0.0, worst_d = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto behavior = fixture::random_params(rng, 1.0);
    const auto in = fixture::make_instance(rng, behavior, 4);
    const auto params = fixture::jitter(behavior, rng, 0.15);
    const auto ref = fixture::random_params(rng, 0.5);
    const GrpoSettings st{0.2, 0.05};
    const auto segs = fixture::util_segments(in);
    worst_u = std::max(worst_u, oracle::relative_error(
        grpo_objective_grad(segs, params, ref, st),
        oracle::finite_difference([&](const PolicyParams& q) { return grpo_objective(segs, q, ref, st); }, params)));
    const auto rs = fixture::rerank_samples(in);
    worst_r = std::max(worst_r, oracle::relative_error(
        rerank_reinforce_grad(rs, params, 8),
        oracle::finite_difference([&](const PolicyParams& q) { return rerank_reinforce_objective(rs, q, 8); }, params)));
    const auto dg = fixture::distill_groups(in);
    worst_d = std::max(worst_d, oracle::relative_error(
        distill_objective_grad(dg, params, ref, st),
        oracle::finite_difference([&](const PolicyParams& q) { return distill_objective(dg, q, ref, st); }, params)));
  }
  const double secs = seconds_since(t0);
  report(std::max({worst_u, worst_r, worst_d}) < 1e-4 && secs < 30.0, "Gradient checks",
         "max rel err util " + fmt("%.1e", worst_u) + ", rerank " + fmt("%.1e", worst_r) +
             ", distill " + fmt("%.1e", worst_d) + ", " + fmt("%.2f s", secs));
}

void reward_identity() {
  RunConfig cfg;
  cfg.seed = 104;
  Trainer t(cfg);
  std::size_t checked = 0;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto rep = t.step();
    for (const auto& r : rep.rollouts) {
      worst = std::max(worst, std::abs(r.rewards.r_distill + r.rewards.u_hat - utilization_reward(r.rewards.r_util)));
      ++checked;
    }
  }
  report(worst < 1e-12, "Reward decomposition identity",
         std::to_string(checked) + " rollouts, max |r_distill + u_hat - r_util| " + fmt("%.1e", worst));
}

void library_safety() {
  RunConfig cfg;
  cfg.seed = 105;
  cfg.library.capacity = 32;
  Trainer t(cfg);
  std::size_t evictions = 0, bad_victims = 0, max_size = 0;
  t.library().set_eviction_observer([&](std::span<const Skill> residents, SkillId victim) {
    ++evictions;
    const Skill* best = nullptr;
    double best_score = 0.0;
    for (const auto& s : residents) {
      const double score = s.utility * std::log1p(static_cast<double>(s.usage_count));
      const bool better = !best || score < best_score ||
                          (score == best_score && (s.created_step < best->created_step ||
                                                   (s.created_step == best->created_step && s.id < best->id)));
      if (better) {
        best = &s;
        best_score = score;
      }
    }
    if (!best || best->id != victim) ++bad_victims;
  });
  std::set<SkillId> from_success;
  std::size_t failed_resident = 0;
  for (int i = 0; i < 200; ++i) {
    const auto rep = t.step();
    std::size_t a = 0;
    for (const auto& r : rep.rollouts) {
      if (!r.draft) continue;
      const auto& ad = rep.admissions.at(a++);
      if (ad.admitted()) {
        if (r.outcome != Outcome::success) ++failed_resident;
        from_success.insert(ad.id);
      }
    }
    max_size = std::max(max_size, t.library().size());
    for (const auto& s : t.library().skills())
      if (!from_success.count(s.id)) ++failed_resident;
  }
  report(max_size <= 32 && failed_resident == 0 && bad_victims == 0 && evictions > 0, "Library safety",
         "max size " + std::to_string(max_size) + ", failed-outcome residents " +
             std::to_string(failed_resident) + ", " + std::to_string(evictions) + " evictions, " +
             std::to_string(bad_victims) + " wrong victims");
}

struct RunResult {
  std::vector<MetricsRow> metrics;
  std::vector<double> outcome;
  double eval = 0.0;
  double ceiling = 0.0;
};

RunResult run_variant(std::uint64_t seed, const std::vector<std::string>& ablations) {
  RunConfig cfg;
  cfg.seed = seed;
  cfg.max_steps = 300;
  for (const auto& a : ablations) cfg.apply_ablation(a);
  Trainer t(cfg);
  RunResult out;
  for (std::size_t i = 0; i < cfg.max_steps; ++i) {
    out.metrics.push_back(t.step().metrics);
    out.outcome.push_back(out.metrics.back().mean_outcome);
  }
  out.eval = run_eval(t.config(), t.library(), t.policy(), 2000, 7000 + seed).success_rate;
  std::vector<std::vector<std::size_t>> secrets;
  for (std::size_t m = 0; m < cfg.env.num_types; ++m) secrets.push_back(t.family().secret(m));
  out.ceiling = oracle::skill_free_ceiling(secrets, cfg.env.num_actions, cfg.env.max_steps);
  return out;
}

// First step at which the trailing 10-step mean outcome is >= 0.90; -1 if never.
long reach_step(const std::vector<double>& outcome) {
  double sum = 0.0;
  for (std::size_t i = 0; i < outcome.size(); ++i) {
    sum += outcome[i];
    if (i >= 10) sum -= outcome[i - 10];
    if (i >= 9 && sum / 10.0 >= 0.90) return static_cast<long>(i + 1);
  }
  return -1;
}

double tail_mean(const std::vector<double>& v, std::size_t n) {
  return oracle::mean(std::vector<double>(v.end() - static_cast<long>(n), v.end()));
}

void training_criteria() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::uint64_t> seeds = {1, 2, 3};
  const std::vector<std::pair<std::string, std::vector<std::string>>> variants = {
      {"full", {}},
      {"no_library", {"no_library"}},
      {"zero_both", {"zero_l1", "zero_l2"}},
      {"no_select", {"no_select"}},
      {"no_distill", {"no_distill"}},
      {"zero_l1", {"zero_l1"}},
      {"zero_l2", {"zero_l2"}},
  };
  std::map<std::string, std::vector<RunResult>> runs;
  for (const auto& [name, abl] : variants)
    for (auto s : seeds) {
      runs[name].push_back(run_variant(s, abl));
      std::fprintf(stderr, "  %-10s seed %llu  last-10 %.3f  eval %.4f\n", name.c_str(),
                   static_cast<unsigned long long>(s), tail_mean(runs[name].back().outcome, 10),
                   runs[name].back().eval);
    }
  const double secs = seconds_since(t0);

  bool reach_ok = true, plateau_ok = true, later_ok = true;
  std::string reach_txt, plateau_txt, later_txt;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const long full = reach_step(runs["full"][i].outcome);
    const long zero = reach_step(runs["zero_both"][i].outcome);
    const double plateau = tail_mean(runs["no_library"][i].outcome, 50);
    const double ceiling = runs["no_library"][i].ceiling;
    reach_ok = reach_ok && full > 0;
    plateau_ok = plateau_ok && plateau < ceiling + 0.05;
    later_ok = later_ok && full > 0 && (zero < 0 || zero > full);
    reach_txt += (i ? ", " : "") + std::to_string(full);
    later_txt += (i ? ", " : "") + std::to_string(zero);
    plateau_txt += (i ? ", " : "") + fmt("%.3f", plateau) + "<" + fmt("%.3f", ceiling + 0.05);
  }
  report(reach_ok, "Co-evolution: full reaches 0.90", "reach step per seed " + reach_txt);
  report(plateau_ok, "Co-evolution: no_library below ceiling + 0.05", "last-50 mean " + plateau_txt);
  report(later_ok, "Co-evolution: zero_lambda1+zero_lambda2 reaches 0.90 strictly later",
         "full " + reach_txt + " vs zero_both " + later_txt + " (-1 = never)");
  report(secs < 600.0, "Co-evolution runtime", fmt("%.0f s for 21 runs", secs));

  auto eval_mean = [&](const std::string& v) {
    std::vector<double> e;
    for (const auto& r : runs[v]) e.push_back(r.eval);
    return oracle::mean(e);
  };
  const double full = eval_mean("full"), nolib = eval_mean("no_library");
  bool order_ok = true;
  std::string order_txt = "full " + fmt("%.4f", full);
  for (const char* v : {"no_select", "no_distill", "zero_l1", "zero_l2"}) {
    const double m = eval_mean(v);
    order_ok = order_ok && full >= m && m >= nolib;
    order_txt += std::string(", ") + v + " " + fmt("%.4f", m);
  }
  order_txt += ", no_library " + fmt("%.4f", nolib);
  report(order_ok, "Ablation ordering", order_txt);

  bool trend_ok = true;
  std::string trend_txt;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto& m = runs["full"][i].metrics;
    const auto& a = m[19];
    const auto& b = m[299];
    trend_ok = trend_ok && b.task_skill_similarity > a.task_skill_similarity && b.u_hat_mean > a.u_hat_mean;
    trend_txt += (i ? "; " : "") + fmt("sim %.3f", a.task_skill_similarity) + fmt("->%.3f", b.task_skill_similarity) +
                 fmt(" u_hat %.3f", a.u_hat_mean) + fmt("->%.3f", b.u_hat_mean);
  }
  report(trend_ok, "Selection-quality trend", trend_txt);
}

void welch() {
  const std::vector<double> a = {96.9, 97.5, 98.1};
  const std::vector<double> b = {94.0, 94.9, 95.8};
  const auto r = welch_t_test(a, b);
  report(std::abs(r.t - 4.06) <= 0.15 && r.p_two_sided < 0.05, "Welch t-test",
         "t " + fmt("%.3f", r.t) + " (reported 4.06), df " + fmt("%.2f", r.df) + ", p " + fmt("%.4f", r.p_two_sided));
}

void determinism() {
  RunConfig cfg;
  cfg.seed = 106;
  cfg.max_steps = 100;
  const auto base = std::filesystem::temp_directory_path() / "skill1_acceptance_det";
  std::filesystem::remove_all(base);
  run_training(cfg, base / "a");
  run_training(cfg, base / "b");
  std::size_t files = 0, same = 0;
  for (const auto& e : std::filesystem::directory_iterator(base / "a")) {
    const auto name = e.path().filename();
    if (name.extension() != ".csv" && name.extension() != ".jsonl") continue;
    ++files;
    if (read_file(e.path()) == read_file(base / "b" / name)) ++same;
  }
  std::filesystem::remove_all(base);
  report(files > 2 && same == files, "Determinism",
         std::to_string(same) + "/" + std::to_string(files) + " metrics/snapshot files byte-identical");
}

}  // namespace

int main() {
  ndcg_oracle();
  ema_closed_form();
  advantage_contract();
  gradient_checks();
  reward_identity();
  library_safety();
  training_criteria();
  welch();
  determinism();
  return failures == 0 ? 0 : 1;
}
