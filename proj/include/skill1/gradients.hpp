#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "skill1/policy.hpp"

namespace skill1 {

// Group-relative advantages (r - mean) / std with the population std. A
// zero-variance group maps to all zeros. Throws std::invalid_argument for
// fewer than two rewards.
struct AdvantageSet {
  std::vector<double> values;
};
AdvantageSet grpo_advantages(std::span<const double> rewards);

struct GrpoSettings {
  double clip_eps = 0.2;
  double kl_beta = 0.01;
};

// The decisions of one rollout that share one advantage. `rollout` only
// labels error messages.
struct Segment {
  std::vector<const DecisionRecord*> decisions;
  double advantage = 0.0;
  std::size_t rollout = 0;
};

// Clipped surrogate, token-mean within each rollout and mean over rollouts,
// minus kl_beta times the exact categorical KL(pi || pi_ref) averaged the same
// way. Every choice step is one token.
double grpo_objective(std::span<const Segment> segments, const PolicyParams& params,
                      const PolicyParams& reference, const GrpoSettings& settings);
// Ascent gradient of grpo_objective. Throws RuntimeError on a non-finite
// importance ratio.
PolicyParams grpo_objective_grad(std::span<const Segment> segments, const PolicyParams& params,
                                 const PolicyParams& reference, const GrpoSettings& settings);

struct RerankSample {
  const DecisionRecord* record = nullptr;
  double reward = 0.0;
};

// (1 / total_rollouts) * sum_i R_i log pi(sigma_i). No baseline, no clipping.
double rerank_reinforce_objective(std::span<const RerankSample> samples,
                                  const PolicyParams& params, std::size_t total_rollouts);
PolicyParams rerank_reinforce_grad(std::span<const RerankSample> samples,
                                   const PolicyParams& params, std::size_t total_rollouts);

// The distillation decisions of the G rollouts of one task.
struct DistillGroup {
  std::vector<const DecisionRecord*> records;
  std::vector<double> rewards;
  std::vector<std::size_t> rollouts;
};

// Advantages are normalized per group, separately from the utilization
// advantages, then fed to the GRPO surrogate over distill tokens only.
std::vector<Segment> distill_segments(std::span<const DistillGroup> groups);
double distill_objective(std::span<const DistillGroup> groups, const PolicyParams& params,
                         const PolicyParams& reference, const GrpoSettings& settings);
PolicyParams distill_objective_grad(std::span<const DistillGroup> groups,
                                    const PolicyParams& params, const PolicyParams& reference,
                                    const GrpoSettings& settings);

// Exact KL(p || q) for one choice step, p under params and q under reference.
double step_kl(const PolicyParams& params, const PolicyParams& reference, Head head,
               const ChoiceStep& step, double temperature);

struct GradientBundle {
  PolicyParams util;
  PolicyParams rerank;
  PolicyParams distill;
};

// theta + lr * (g_util + lambda1 g_rerank + lambda2 g_distill). Throws
// RuntimeError if the result is not finite.
PolicyParams apply_update(const PolicyParams& params, const GradientBundle& grads, double lambda1,
                          double lambda2, double learning_rate);

}  // namespace skill1
