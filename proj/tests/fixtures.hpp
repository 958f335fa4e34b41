#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "skill1/env.hpp"
#include "skill1/gradients.hpp"
#include "skill1/policy.hpp"
#include "skill1/skill_library.hpp"

namespace fixture {

using namespace skill1;

struct Row {
  std::string desc;
  double utility;
  std::uint64_t n;
  std::int64_t created;
};

// Builds a snapshot by hand so arbitrary (U, n) states can be loaded.
inline std::string handmade_snapshot(const std::vector<Row>& rows, std::size_t capacity) {
  TextEncoder enc;
  std::string s = nlohmann::json{{"format_version", kSnapshotFormatVersion},
                       {"embedding_version", kEmbeddingVersion},
                       {"capacity", capacity},
                       {"ema_rate", 0.05},
                       {"next_id", rows.size() + 1}}
                      .dump() +
                  "\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto e = enc.embed(rows[i].desc);
    s += nlohmann::json{{"id", i + 1},
              {"strat", "act 0 > act 1"},
              {"desc", rows[i].desc},
              {"utility", rows[i].utility},
              {"usage_count", rows[i].n},
              {"created_step", rows[i].created},
              {"desc_embedding", std::vector<double>(e.values().begin(), e.values().end())}}
             .dump() +
         "\n";
  }
  return s;
}



inline constexpr std::size_t kActions = 4;

inline PolicyParams random_params(Rng& rng, double scale) {
  EnvConfig env;
  env.num_actions = kActions;
  PolicyParams p = PolicyParams::zeros(PolicyDims::for_env(env));
  for (Head h : kAllHeads) {
    auto& w = p.head(h);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = scale * (2.0 * rng.uniform() - 1.0);
  }
  return p;
}

inline PolicyParams jitter(const PolicyParams& p, Rng& rng, double scale) {
  PolicyParams q = p;
  q.add_scaled(random_params(rng, scale), 1.0);
  return q;
}

// Decisions of G rollouts of one task, sampled under `behavior`.
struct Instance {
  std::vector<DecisionRecord> queries, reranks, distills;
  std::vector<std::vector<DecisionRecord>> actions;
  std::vector<double> util_rewards, rerank_rewards, distill_rewards;
};

inline Instance make_instance(Rng& rng, const PolicyParams& behavior, std::size_t g) {
  EnvConfig env;
  env.num_actions = kActions;
  TaskFamily fam(env, rng.next_u64());
  Instance in;
  const double temp = 0.5 + rng.uniform();
  for (std::size_t i = 0; i < g; ++i) {
    const TaskSpec task = fam.sample_task(rng);
    in.queries.push_back(gen_query(task, behavior, temp, rng).record);

    std::vector<double> sims(3), utils(3), tsims(3);
    std::vector<std::uint64_t> usage(3);
    for (int j = 0; j < 3; ++j) {
      sims[j] = rng.uniform();
      utils[j] = rng.uniform();
      tsims[j] = rng.uniform();
      usage[j] = rng.index(20);
    }
    in.reranks.push_back(rerank(rerank_features(sims, utils, tsims, usage), behavior, temp, rng).record);

    std::vector<DecisionRecord> acts;
    const std::size_t n_act = 1 + rng.index(5);
    for (std::size_t t = 0; t < n_act; ++t) {
      std::optional<std::size_t> pres;
      if (rng.bernoulli(0.6)) pres = rng.index(kActions);
      acts.push_back(act(pres, kActions, behavior, temp, rng).record);
    }
    in.actions.push_back(std::move(acts));

    TrajectorySummary traj;
    traj.outcome = rng.bernoulli(0.5) ? Outcome::success : Outcome::failure;
    traj.advanced.assign(rng.index(5), 0);
    traj.seq_len = 4;
    traj.had_skill = rng.bernoulli(0.5);
    in.distills.push_back(distill(task, traj, behavior, temp, rng).record);

    in.util_rewards.push_back(rng.bernoulli(0.5) ? 1.0 : 0.0);
    in.rerank_rewards.push_back(rng.uniform());
    in.distill_rewards.push_back(2.0 * rng.uniform() - 1.0);
  }
  in.util_rewards[0] = 1.0;
  in.util_rewards[1] = 0.0;
  return in;
}

inline std::vector<Segment> util_segments(const Instance& in) {
  const auto adv = grpo_advantages(in.util_rewards);
  std::vector<Segment> segs;
  for (std::size_t i = 0; i < in.queries.size(); ++i) {
    Segment s;
    s.decisions.push_back(&in.queries[i]);
    for (const auto& a : in.actions[i]) s.decisions.push_back(&a);
    s.advantage = adv.values[i];
    s.rollout = i;
    segs.push_back(s);
  }
  return segs;
}

inline std::vector<RerankSample> rerank_samples(const Instance& in) {
  std::vector<RerankSample> out;
  for (std::size_t i = 0; i < in.reranks.size(); ++i) out.push_back({&in.reranks[i], in.rerank_rewards[i]});
  return out;
}

inline std::vector<DistillGroup> distill_groups(const Instance& in) {
  DistillGroup g;
  for (std::size_t i = 0; i < in.distills.size(); ++i) {
    g.records.push_back(&in.distills[i]);
    g.rewards.push_back(in.distill_rewards[i]);
    g.rollouts.push_back(i);
  }
  return {g};
}

}  // namespace fixture
