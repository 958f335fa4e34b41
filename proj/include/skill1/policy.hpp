#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "skill1/env.hpp"
#include "skill1/rng.hpp"
#include "skill1/skill_library.hpp"

namespace skill1 {

// The four generation heads of the single policy.
enum class Head : std::uint8_t { query = 0, rerank = 1, action = 2, distill = 3 };
inline constexpr Head kAllHeads[] = {Head::query, Head::rerank, Head::action, Head::distill};
const char* head_name(Head h);

// Query templates. The learnable part of query generation is which one to
// instantiate with the task's surface tokens.
enum class QueryTemplate : std::size_t { instruction, first_keyword, majority_keyword, object };
inline constexpr std::size_t kNumQueryTemplates = 4;

// Scenario-description templates chosen by the distill head.
enum class DescTemplate : std::size_t { keyword_task, instruction, object, generic };
inline constexpr std::size_t kNumDescTemplates = 4;

inline constexpr std::size_t kRerankFeatureDim = 4;   // query sim, utility, task sim, usage
inline constexpr std::size_t kActionFeatureDim = 2;   // skill-copy indicator, bias
inline constexpr std::size_t kDistillFeatureDim = 4;  // bias, outcome, progress share, had skill

inline constexpr std::string_view kGenericDesc = "generic skill";

struct PolicyDims {
  std::size_t query_templates = kNumQueryTemplates;
  std::size_t task_features = kTaskFeatureDim;
  std::size_t rerank_features = kRerankFeatureDim;
  std::size_t num_actions = 5;
  std::size_t action_features = kActionFeatureDim;
  std::size_t distill_templates = kNumDescTemplates;
  std::size_t distill_features = kDistillFeatureDim;

  static PolicyDims for_env(const EnvConfig& env);
  friend bool operator==(const PolicyDims&, const PolicyDims&) = default;
};

// Weight matrices of the four heads. Also used as the gradient container.
struct PolicyParams {
  Eigen::MatrixXd query;    // Q x F
  Eigen::MatrixXd rerank;   // 1 x F_c
  Eigen::MatrixXd action;   // A x F_a
  Eigen::MatrixXd distill;  // D_t x F_d

  static PolicyParams zeros(const PolicyDims& dims);

  Eigen::MatrixXd& head(Head h);
  const Eigen::MatrixXd& head(Head h) const;

  bool all_finite() const;
  PolicyParams zeros_like() const;
  void add_scaled(const PolicyParams& other, double scale);
  double squared_norm() const;

  friend bool operator==(const PolicyParams& a, const PolicyParams& b);
};

struct Policy {
  PolicyDims dims;
  PolicyParams params;
  PolicyParams reference;  // frozen copy taken at initialization

  static Policy initial(const PolicyDims& dims);
};

// One selectable option: weight row used and its feature vector. `label` is
// the externally meaningful index (template, action or candidate index).
struct Option {
  std::size_t row = 0;
  std::size_t label = 0;
  Eigen::VectorXd features;
};

// One softmax draw. `chosen` indexes `options`.
struct ChoiceStep {
  std::vector<Option> options;
  std::size_t chosen = 0;
  double logprob_behavior = 0.0;
};

// Everything needed to recompute a decision's log-probability under new
// parameters. Categorical heads have one step; a Plackett-Luce permutation
// has one step per position.
struct DecisionRecord {
  Head head = Head::query;
  double temperature = 1.0;
  std::vector<ChoiceStep> steps;

  double logprob_behavior() const;
  std::vector<std::size_t> chosen_labels() const;
};

enum class SampleMode { sample, greedy };

std::vector<double> option_logits(const Eigen::MatrixXd& weights, std::span<const Option> options,
                                  double temperature);
std::vector<double> log_softmax(std::span<const double> logits);
double step_logprob(const PolicyParams& params, Head head, const ChoiceStep& step,
                    double temperature);
double record_logprob(const PolicyParams& params, const DecisionRecord& rec);

// Draws (or argmaxes, first index on ties) from softmax(logits / T).
ChoiceStep sample_step(const Eigen::MatrixXd& weights, std::vector<Option> options,
                       double temperature, Rng& rng, SampleMode mode);

// ---- heads ----------------------------------------------------------------

std::string instantiate_query(QueryTemplate t, const TaskSpec& task);

struct QueryDecision {
  std::size_t template_index = 0;
  std::string text;
  DecisionRecord record;
};
QueryDecision gen_query(const TaskSpec& task, const PolicyParams& params, double temperature,
                        Rng& rng, SampleMode mode = SampleMode::sample);

// Per-candidate re-ranking features. Query similarity, utility and task
// similarity are standardized within the candidate set (z-scores, 0 when the
// set has no spread); usage enters as log(1 + n) / 8.
std::vector<Eigen::VectorXd> rerank_features(std::span<const double> query_similarity,
                                             std::span<const double> utility,
                                             std::span<const double> task_similarity,
                                             std::span<const std::uint64_t> usage_count);

struct RerankDecision {
  std::vector<std::size_t> sigma;  // sigma[0] is the selected candidate
  DecisionRecord record;
};
// Plackett-Luce over the candidates. Throws std::invalid_argument if empty.
RerankDecision rerank(std::span<const Eigen::VectorXd> candidate_features,
                      const PolicyParams& params, double temperature, Rng& rng,
                      SampleMode mode = SampleMode::sample);

// Per-action options: [1 if the skill prescribes this action, 1].
std::vector<Option> action_options(std::optional<std::size_t> prescribed, std::size_t num_actions);

struct ActDecision {
  std::size_t action = 0;
  DecisionRecord record;
};
ActDecision act(std::optional<std::size_t> prescribed, std::size_t num_actions,
                const PolicyParams& params, double temperature, Rng& rng,
                SampleMode mode = SampleMode::sample);
ActDecision act(const Skill* skill, const Episode& episode, const PolicyParams& params,
                double temperature, Rng& rng, SampleMode mode = SampleMode::sample);

struct TrajectorySummary {
  std::vector<std::size_t> actions;
  std::vector<std::string> observations;
  std::vector<std::size_t> advanced;  // actions that advanced progress
  Outcome outcome = Outcome::failure;
  bool had_skill = false;
  std::size_t seq_len = 1;
};

Eigen::VectorXd distill_features(const TrajectorySummary& traj);
std::string instantiate_desc(DescTemplate t, const TaskSpec& task);
// Unprocessed trajectory text, as stored when distillation is disabled.
std::string raw_trajectory_text(const TrajectorySummary& traj);

struct DistillDecision {
  SkillDraft draft;
  std::size_t template_index = 0;
  DecisionRecord record;
};
// strat is the advancing action sequence (deterministic); desc is a sampled
// template.
DistillDecision distill(const TaskSpec& task, const TrajectorySummary& traj,
                        const PolicyParams& params, double temperature, Rng& rng,
                        SampleMode mode = SampleMode::sample);

}  // namespace skill1
