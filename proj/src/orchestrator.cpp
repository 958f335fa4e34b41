#include "skill1/orchestrator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "skill1/error.hpp"

namespace skill1 {
namespace {

using nlohmann::json;

constexpr std::string_view kExportVersion = "skill1-export-v1";

template <typename Fn>
void for_each_index(std::size_t n, Execution exec, Fn&& fn) {
  if (exec == Execution::serial) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr err;
  const auto ns = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < ns; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(skill1_rollout_error)
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

// ---- metrics ---------------------------------------------------------------

std::string metrics_csv_header() {
  return "step,mean_outcome,selection_precision,distill_positive_rate,u_hat_mean,"
         "task_skill_similarity,library_size,mean_ndcg";
}

std::string metrics_csv_line(const MetricsRow& r) {
  std::string s = std::to_string(r.step);
  for (double v : {r.mean_outcome, r.selection_precision, r.distill_positive_rate, r.u_hat_mean,
                   r.task_skill_similarity}) {
    s += ',';
    s += format_double(v);
  }
  s += ',' + std::to_string(r.library_size) + ',' + format_double(r.mean_ndcg);
  return s;
}

// ---- selection -------------------------------------------------------------

std::size_t ucb_select(std::span<const double> similarity, std::span<const double> utility,
                       std::span<const std::uint64_t> usage, std::uint64_t total_selections,
                       double w_sim, double c) {
  if (similarity.empty()) throw std::invalid_argument("ucb_select: no candidates");
  const double log_total = std::log(static_cast<double>(total_selections) + 1.0);
  std::size_t best = 0;
  double best_score = -INFINITY;
  for (std::size_t j = 0; j < similarity.size(); ++j) {
    const double score = w_sim * similarity[j] + (1.0 - w_sim) * utility[j] +
                         c * std::sqrt(log_total / (1.0 + static_cast<double>(usage[j])));
    if (score > best_score) {
      best_score = score;
      best = j;
    }
  }
  return best;
}

// ---- rollouts --------------------------------------------------------------

Rollout run_rollout(const RolloutContext& ctx, const TaskSpec& task, Rng& rng) {
  const RunConfig& cfg = *ctx.config;
  const SkillLibrary& lib = *ctx.library;
  const PolicyParams& params = *ctx.params;
  const TextEncoder& enc = lib.encoder();
  const Ablations& abl = cfg.ablations;

  Rollout r;
  r.task_type = task.task_type;
  const EmbeddingVector task_emb = enc.embed(task.instruction_text);

  if (!abl.no_library) {
    if (!abl.no_select) {
      QueryDecision q = gen_query(task, params, ctx.temperature, rng, ctx.mode);
      r.query_text = std::move(q.text);
      r.query = std::move(q.record);
    } else {
      r.query_text = task.instruction_text;
    }
    r.candidates = lib.retrieve_top_k(enc.embed(r.query_text), cfg.library.top_k);

    const std::size_t k = r.candidates.size();
    std::vector<double> sims(k), task_sims(k);
    for (std::size_t j = 0; j < k; ++j) {
      const Skill& s = lib.get(r.candidates.entries[j].id);
      r.candidate_utility.push_back(s.utility);
      r.candidate_usage.push_back(s.usage_count);
      sims[j] = r.candidates.entries[j].similarity;
      task_sims[j] = cosine_sim(task_emb, s.desc_embedding);
    }

    if (k > 0) {
      if (abl.no_select) {
        r.sigma.resize(k);
        std::iota(r.sigma.begin(), r.sigma.end(), std::size_t{0});
        r.selected = 0;
      } else {
        const auto psi = rerank_features(sims, r.candidate_utility, task_sims, r.candidate_usage);
        RerankDecision rr = rerank(psi, params, ctx.temperature, rng, ctx.mode);
        r.sigma = std::move(rr.sigma);
        r.rerank = std::move(rr.record);
        r.selected = ctx.use_ucb ? ucb_select(sims, r.candidate_utility, r.candidate_usage,
                                              lib.total_selections(), cfg.ucb_w_sim, cfg.ucb_c)
                                 : r.sigma.front();
      }
      r.selected_id = r.candidates.entries[*r.selected].id;
      r.task_skill_similarity = task_sims[*r.selected];
    }
  }

  const Skill* skill = r.selected_id ? &lib.get(*r.selected_id) : nullptr;
  Episode ep(task, cfg.env.num_actions, cfg.env.max_steps);
  ep.reset();
  while (!ep.state().done) {
    ActDecision a = act(skill, ep, params, ctx.temperature, rng, ctx.mode);
    StepResult res = ep.step(a.action);
    r.action_sequence.push_back(a.action);
    r.observations.push_back(std::move(res.observation));
    r.actions.push_back(std::move(a.record));
  }
  r.outcome = ep.state().outcome;

  if (!abl.no_library) {
    TrajectorySummary traj;
    traj.actions = r.action_sequence;
    traj.observations = r.observations;
    traj.advanced = ep.advanced_actions();
    traj.outcome = r.outcome;
    traj.had_skill = skill != nullptr;
    traj.seq_len = cfg.env.seq_len;
    if (abl.no_distill) {
      r.draft = SkillDraft{raw_trajectory_text(traj), std::string(kGenericDesc)};
    } else {
      DistillDecision d = distill(task, traj, params, ctx.temperature, rng, ctx.mode);
      r.draft = std::move(d.draft);
      r.distill = std::move(d.record);
    }
  }

  r.rewards = assign_rewards(r.outcome, r.candidate_utility, r.sigma, cfg.relevance);
  return r;
}

// ---- trainer ---------------------------------------------------------------

Trainer::Trainer(RunConfig config)
    : Trainer(config,
              SkillLibrary(config.library, TextEncoder(config.embedding_dim)),
              Policy::initial(PolicyDims::for_env(config.env))) {}

Trainer::Trainer(RunConfig config, SkillLibrary library, Policy policy, std::int64_t start_step)
    : config_((config.validate(), config)),
      family_(config_.env, config_.seed),
      library_(std::move(library)),
      policy_(std::move(policy)),
      step_(start_step) {
  if (!(policy_.dims == PolicyDims::for_env(config_.env)))
    throw ConfigError("policy dimensions do not match the environment configuration");
  if (library_.encoder().dim() != config_.embedding_dim)
    throw ConfigError("library embedding dimension differs from embedding_dim");
}

std::vector<TaskSpec> Trainer::sample_batch(std::int64_t step) const {
  Rng rng(derive_seed({config_.seed, static_cast<std::uint64_t>(Stream::tasks),
                       static_cast<std::uint64_t>(step)}));
  std::vector<TaskSpec> tasks;
  tasks.reserve(config_.batch_tasks);
  for (std::size_t i = 0; i < config_.batch_tasks; ++i) tasks.push_back(family_.sample_task(rng));
  return tasks;
}

std::vector<Rollout> Trainer::collect_rollouts(const std::vector<TaskSpec>& tasks,
                                               std::int64_t step, Execution exec) const {
  const std::size_t g = config_.group_size;
  std::vector<Rollout> out(tasks.size() * g);
  RolloutContext ctx;
  ctx.config = &config_;
  ctx.family = &family_;
  ctx.library = &library_;
  ctx.params = &policy_.params;
  ctx.mode = SampleMode::sample;
  ctx.temperature = config_.train_temperature;
  ctx.use_ucb = config_.selection_mode == SelectionMode::ucb_blend;
  for_each_index(out.size(), exec, [&](std::size_t idx) {
    const std::size_t t = idx / g, j = idx % g;
    Rng rng(derive_seed({config_.seed, static_cast<std::uint64_t>(Stream::rollout),
                         static_cast<std::uint64_t>(step), t, j}));
    out[idx] = run_rollout(ctx, tasks[t], rng);
    out[idx].task_index = t;
    out[idx].group_index = j;
  });
  return out;
}

GradientBundle Trainer::gradients(const std::vector<Rollout>& rollouts,
                                  const PolicyParams& params) const {
  const std::size_t g = config_.group_size;
  const std::size_t n_tasks = rollouts.size() / g;
  const GrpoSettings settings{config_.clip_eps, config_.kl_beta};

  std::vector<Segment> util;
  util.reserve(rollouts.size());
  std::vector<DistillGroup> distill_groups;
  for (std::size_t t = 0; t < n_tasks; ++t) {
    std::vector<double> rewards(g);
    for (std::size_t j = 0; j < g; ++j)
      rewards[j] = utilization_reward(rollouts[t * g + j].rewards.r_util);
    const AdvantageSet adv = grpo_advantages(rewards);
    DistillGroup dg;
    for (std::size_t j = 0; j < g; ++j) {
      const Rollout& r = rollouts[t * g + j];
      Segment seg;
      seg.advantage = adv.values[j];
      seg.rollout = t * g + j;
      if (r.query) seg.decisions.push_back(&*r.query);
      for (const auto& a : r.actions) seg.decisions.push_back(&a);
      util.push_back(std::move(seg));
      if (r.distill) {
        dg.records.push_back(&*r.distill);
        dg.rewards.push_back(r.rewards.r_distill);
        dg.rollouts.push_back(t * g + j);
      }
    }
    if (dg.records.size() == g) distill_groups.push_back(std::move(dg));
  }

  GradientBundle out;
  out.util = grpo_objective_grad(util, params, policy_.reference, settings);

  std::vector<RerankSample> rr;
  for (const auto& r : rollouts)
    if (r.rerank && r.candidates.size() >= 2) rr.push_back({&*r.rerank, r.rewards.r_rerank});
  out.rerank = config_.effective_lambda1() > 0.0
                   ? rerank_reinforce_grad(rr, params, rollouts.size())
                   : params.zeros_like();
  out.distill = config_.effective_lambda2() > 0.0 && !distill_groups.empty()
                    ? distill_objective_grad(distill_groups, params, policy_.reference, settings)
                    : params.zeros_like();
  return out;
}

MetricsRow Trainer::metrics(const std::vector<Rollout>& rollouts,
                            double library_mean_utility) const {
  MetricsRow m;
  m.step = step_;
  std::vector<double> outcomes, precision, uhat, tss, ndcgs;
  std::size_t positive = 0;
  for (const auto& r : rollouts) {
    outcomes.push_back(outcome_value(r.outcome));
    if (r.rewards.r_distill > 0.0) ++positive;
    if (!r.candidates.empty()) uhat.push_back(r.rewards.u_hat);
    if (r.selected) {
      precision.push_back(r.candidate_utility[*r.selected]);
      tss.push_back(r.task_skill_similarity);
    }
    if (r.candidates.size() >= 2) ndcgs.push_back(r.rewards.r_rerank);
  }
  m.mean_outcome = mean_of(outcomes);
  m.selection_precision = config_.precision_scope == PrecisionScope::library
                              ? library_mean_utility
                              : mean_of(precision);
  m.distill_positive_rate =
      rollouts.empty() ? 0.0 : static_cast<double>(positive) / static_cast<double>(rollouts.size());
  m.u_hat_mean = mean_of(uhat);
  m.task_skill_similarity = mean_of(tss);
  m.library_size = library_.size();
  m.mean_ndcg = mean_of(ndcgs);
  return m;
}

StepReport Trainer::step() {
  step_ += 1;
  StepReport rep;
  rep.step = step_;
  rep.tasks = sample_batch(step_);

  double lib_mean = 0.0;
  for (const auto& s : library_.skills()) lib_mean += s.utility;
  if (!library_.empty()) lib_mean /= static_cast<double>(library_.size());

  rep.rollouts = collect_rollouts(rep.tasks, step_,
                                  config_.parallel_rollouts ? Execution::parallel : Execution::serial);

  // Serial mutation phase. All utility and usage updates land before any
  // admission so no candidate can be evicted before its own update.
  try {
    for (std::size_t i = 0; i < rep.rollouts.size(); ++i) {
      const Rollout& r = rep.rollouts[i];
      if (r.selected_id) library_.record_selection(*r.selected_id);
      if (!r.candidates.empty())
        library_.update_utilities(r.candidates, r.outcome, config_.library.ema_rate);
    }
    for (std::size_t i = 0; i < rep.rollouts.size(); ++i) {
      const Rollout& r = rep.rollouts[i];
      if (r.draft) rep.admissions.push_back(library_.admit(*r.draft, r.outcome, step_));
    }
    for (std::size_t e = 0; e < config_.epochs; ++e) {
      const GradientBundle g = gradients(rep.rollouts, policy_.params);
      policy_.params = apply_update(policy_.params, g, config_.effective_lambda1(),
                                    config_.effective_lambda2(), config_.learning_rate);
    }
  } catch (const std::exception& e) {
    throw RuntimeError("step " + std::to_string(step_) + ": " + e.what());
  }

  rep.metrics = metrics(rep.rollouts, lib_mean);
  return rep;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ck;
  ck.policy = policy_;
  ck.meta = {{"config", config_to_json(config_)},
             {"embedding_version", kEmbeddingVersion},
             {"step", step_}};
  return ck;
}

TrainingOutputs run_training(const RunConfig& config, const std::filesystem::path& out_dir,
                             const std::function<void(const StepReport&)>& on_step) {
  std::filesystem::create_directories(out_dir);
  Trainer trainer(config);
  TrainingOutputs out;
  out.metrics_csv = out_dir / "metrics.csv";
  out.library_snapshot = out_dir / "library.jsonl";
  out.params_checkpoint = out_dir / "params.ckpt";

  std::ofstream csv(out.metrics_csv, std::ios::binary | std::ios::trunc);
  if (!csv) throw RuntimeError("cannot write " + out.metrics_csv.string());
  csv << metrics_csv_header() << '\n';
  for (std::size_t s = 0; s < trainer.config().max_steps; ++s) {
    StepReport rep = trainer.step();
    csv << metrics_csv_line(rep.metrics) << '\n';
    out.metrics.push_back(rep.metrics);
    if (on_step) on_step(rep);
    if (rep.step % static_cast<std::int64_t>(trainer.config().snapshot_every) == 0) {
      char name[64];
      std::snprintf(name, sizeof name, "library_step_%04lld.jsonl", static_cast<long long>(rep.step));
      trainer.library().snapshot(out_dir / name);
    }
  }
  csv.flush();
  if (!csv) throw RuntimeError("error writing " + out.metrics_csv.string());
  trainer.library().snapshot(out.library_snapshot);
  save_checkpoint(out.params_checkpoint, trainer.checkpoint());
  return out;
}

// ---- evaluation ------------------------------------------------------------

EvalResult run_eval(const RunConfig& config_in, const SkillLibrary& library, const Policy& policy,
                    std::size_t episodes, std::uint64_t eval_seed) {
  RunConfig config = config_in;
  config.validate();
  if (!(policy.dims == PolicyDims::for_env(config.env)))
    throw RuntimeError("eval: policy dimensions do not match the environment configuration");
  if (library.encoder().dim() != config.embedding_dim)
    throw RuntimeError("eval: library embedding dimension differs from the run configuration");
  const TaskFamily family(config.env, config.seed);

  Rng task_rng(derive_seed({eval_seed, static_cast<std::uint64_t>(Stream::eval)}));
  std::vector<TaskSpec> tasks;
  tasks.reserve(episodes);
  for (std::size_t i = 0; i < episodes; ++i) tasks.push_back(family.sample_task(task_rng));

  RolloutContext ctx;
  ctx.config = &config;
  ctx.family = &family;
  ctx.library = &library;
  ctx.params = &policy.params;
  ctx.mode = SampleMode::greedy;
  ctx.temperature = config.eval_temperature;
  ctx.use_ucb = false;

  std::vector<Outcome> outcomes(episodes);
  for_each_index(episodes, config.parallel_rollouts ? Execution::parallel : Execution::serial,
                 [&](std::size_t i) {
                   Rng rng(derive_seed({eval_seed, static_cast<std::uint64_t>(Stream::eval), i + 1}));
                   outcomes[i] = run_rollout(ctx, tasks[i], rng).outcome;
                 });

  EvalResult res;
  res.episodes = episodes;
  res.per_type.resize(config.env.num_types);
  for (std::size_t m = 0; m < res.per_type.size(); ++m) res.per_type[m].task_type = m;
  for (std::size_t i = 0; i < episodes; ++i) {
    auto& b = res.per_type[tasks[i].task_type];
    b.episodes += 1;
    if (outcomes[i] == Outcome::success) {
      b.successes += 1;
      res.successes += 1;
    }
  }
  res.success_rate =
      episodes ? static_cast<double>(res.successes) / static_cast<double>(episodes) : 0.0;
  return res;
}

RunConfig config_from_checkpoint(const Checkpoint& ckpt) {
  if (!ckpt.meta.contains("config")) throw RuntimeError("checkpoint has no run configuration");
  const std::string ver = ckpt.meta.value("embedding_version", std::string());
  if (ver != kEmbeddingVersion)
    throw RuntimeError("checkpoint embedding version '" + ver + "' does not match '" +
                       std::string(kEmbeddingVersion) + "'");
  try {
    return config_from_json(ckpt.meta.at("config"));
  } catch (const ConfigError& e) {
    throw RuntimeError(std::string("checkpoint configuration invalid: ") + e.what());
  }
}

// ---- export ----------------------------------------------------------------

std::vector<ExportRow> export_rows(const SkillLibrary& library) {
  std::vector<ExportRow> rows;
  for (const auto& s : library.skills()) {
    rows.push_back({s.id, s.usage_count, s.utility,
                    std::vector<double>(s.desc_embedding.values().begin(), s.desc_embedding.values().end()),
                    s.created_step});
  }
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return rows;
}

void export_library(const SkillLibrary& library, std::ostream& out, ExportFormat format) {
  const auto rows = export_rows(library);
  const std::size_t dim = library.encoder().dim();
  if (format == ExportFormat::jsonl) {
    out << json{{"export_version", kExportVersion},
                {"embedding_version", kEmbeddingVersion},
                {"dim", dim}}
               .dump()
        << '\n';
    for (const auto& r : rows)
      out << json{{"id", r.id},
                  {"usage_count", r.usage_count},
                  {"utility", r.utility},
                  {"desc_embedding", r.desc_embedding},
                  {"created_step", r.created_step}}
                 .dump()
          << '\n';
    return;
  }
  out << "id,usage_count,utility";
  for (std::size_t d = 0; d < dim; ++d) out << ",e" << d;
  out << ",created_step\n";
  for (const auto& r : rows) {
    out << r.id << ',' << r.usage_count << ',' << format_double(r.utility);
    for (double v : r.desc_embedding) out << ',' << format_double(v);
    out << ',' << r.created_step << '\n';
  }
}

void export_library(const SkillLibrary& library, const std::filesystem::path& path,
                    ExportFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeError("cannot write export file " + path.string());
  export_library(library, out, format);
  if (!out) throw RuntimeError("error writing export file " + path.string());
}

std::vector<ExportRow> read_export_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw RuntimeError("cannot open export file " + path.string());
  std::string line;
  std::size_t lineno = 0;
  std::vector<ExportRow> rows;
  try {
    if (!std::getline(in, line)) throw RuntimeError("missing header");
    ++lineno;
    const json h = json::parse(line);
    if (h.at("export_version").get<std::string>() != kExportVersion)
      throw RuntimeError("unsupported export_version");
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const json r = json::parse(line);
      rows.push_back({r.at("id").get<SkillId>(), r.at("usage_count").get<std::uint64_t>(),
                      r.at("utility").get<double>(),
                      r.at("desc_embedding").get<std::vector<double>>(),
                      r.at("created_step").get<std::int64_t>()});
    }
  } catch (const std::exception& e) {
    throw RuntimeError(path.string() + " line " + std::to_string(lineno) + ": " + e.what());
  }
  return rows;
}

std::vector<double> read_csv_column(const std::filesystem::path& path, const std::string& column) {
  std::ifstream in(path);
  if (!in) throw RuntimeError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw RuntimeError(path.string() + ": empty file");
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  const auto header = split(line);
  const auto it = std::find(header.begin(), header.end(), column);
  if (it == header.end()) throw RuntimeError(path.string() + ": no column '" + column + "'");
  const auto col = static_cast<std::size_t>(it - header.begin());
  std::vector<double> values;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (col >= cells.size())
      throw RuntimeError(path.string() + " line " + std::to_string(lineno) + ": missing column");
    double v = 0.0;
    const std::string& c = cells[col];
    auto [end, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
    if (ec != std::errc{} || end != c.data() + c.size())
      throw RuntimeError(path.string() + " line " + std::to_string(lineno) + ": bad number '" + c + "'");
    values.push_back(v);
  }
  return values;
}

}  // namespace skill1
