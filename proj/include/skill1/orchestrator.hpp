#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "skill1/checkpoint.hpp"
#include "skill1/config.hpp"
#include "skill1/env.hpp"
#include "skill1/gradients.hpp"
#include "skill1/policy.hpp"
#include "skill1/rewards.hpp"
#include "skill1/skill_library.hpp"

namespace skill1 {

// Everything one rollout produced. Candidate utilities and usage counts are
// the batch-start values the rewards were computed from.
struct Rollout {
  std::size_t task_index = 0;
  std::size_t group_index = 0;
  std::size_t task_type = 0;

  std::string query_text;
  std::optional<DecisionRecord> query;

  CandidateSet candidates;
  std::vector<double> candidate_utility;
  std::vector<std::uint64_t> candidate_usage;
  std::optional<DecisionRecord> rerank;
  std::vector<std::size_t> sigma;
  std::optional<std::size_t> selected;  // index into candidates
  std::optional<SkillId> selected_id;

  std::vector<DecisionRecord> actions;
  std::vector<std::size_t> action_sequence;
  std::vector<std::string> observations;
  Outcome outcome = Outcome::failure;

  std::optional<SkillDraft> draft;
  std::optional<DecisionRecord> distill;

  RewardBundle rewards;
  double task_skill_similarity = 0.0;  // valid when a skill was selected
};

struct MetricsRow {
  std::int64_t step = 0;
  double mean_outcome = 0.0;
  double selection_precision = 0.0;
  double distill_positive_rate = 0.0;
  double u_hat_mean = 0.0;
  double task_skill_similarity = 0.0;
  std::size_t library_size = 0;
  double mean_ndcg = 0.0;
};

std::string metrics_csv_header();
std::string metrics_csv_line(const MetricsRow& row);

struct StepReport {
  std::int64_t step = 0;
  std::vector<TaskSpec> tasks;
  std::vector<Rollout> rollouts;  // task-major: index = task * G + g
  std::vector<AdmitResult> admissions;
  MetricsRow metrics;
};

enum class Execution { serial, parallel };

// Read-only view used to generate rollouts concurrently.
struct RolloutContext {
  const RunConfig* config = nullptr;
  const TaskFamily* family = nullptr;
  const SkillLibrary* library = nullptr;
  const PolicyParams* params = nullptr;
  SampleMode mode = SampleMode::sample;
  double temperature = 1.0;
  bool use_ucb = false;
};

Rollout run_rollout(const RolloutContext& ctx, const TaskSpec& task, Rng& rng);

// Index of the candidate maximizing
//   w_sim * sim + (1 - w_sim) * U + c * sqrt(ln(total + 1) / (1 + n)),
// first index on ties.
std::size_t ucb_select(std::span<const double> similarity, std::span<const double> utility,
                       std::span<const std::uint64_t> usage, std::uint64_t total_selections,
                       double w_sim, double c);

// One co-evolution run. Each step samples N tasks x G rollouts, assigns
// rewards from batch-start utilities, mutates the library serially in
// rollout order and applies one joint parameter update.
class Trainer {
 public:
  explicit Trainer(RunConfig config);
  Trainer(RunConfig config, SkillLibrary library, Policy policy, std::int64_t start_step = 0);

  StepReport step();

  // Rollouts for a fixed batch; exposed so serial and parallel collection
  // can be compared directly.
  std::vector<Rollout> collect_rollouts(const std::vector<TaskSpec>& tasks, std::int64_t step,
                                        Execution exec) const;
  std::vector<TaskSpec> sample_batch(std::int64_t step) const;

  const RunConfig& config() const { return config_; }
  const TaskFamily& family() const { return family_; }
  const SkillLibrary& library() const { return library_; }
  SkillLibrary& library() { return library_; }
  const Policy& policy() const { return policy_; }
  std::int64_t current_step() const { return step_; }

  Checkpoint checkpoint() const;

 private:
  GradientBundle gradients(const std::vector<Rollout>& rollouts, const PolicyParams& params) const;
  MetricsRow metrics(const std::vector<Rollout>& rollouts, double library_mean_utility) const;

  RunConfig config_;
  TaskFamily family_;
  SkillLibrary library_;
  Policy policy_;
  std::int64_t step_ = 0;
};

struct TrainingOutputs {
  std::vector<MetricsRow> metrics;
  std::filesystem::path metrics_csv;
  std::filesystem::path library_snapshot;
  std::filesystem::path params_checkpoint;
};

// Runs config.max_steps steps, writing metrics.csv, periodic
// library_step_<n>.jsonl snapshots, library.jsonl and params.ckpt into
// out_dir. `on_step` (optional) sees every report.
TrainingOutputs run_training(const RunConfig& config, const std::filesystem::path& out_dir,
                             const std::function<void(const StepReport&)>& on_step = {});

struct TypeBreakdown {
  std::size_t task_type = 0;
  std::size_t episodes = 0;
  std::size_t successes = 0;
  double success_rate() const {
    return episodes ? static_cast<double>(successes) / static_cast<double>(episodes) : 0.0;
  }
};

struct EvalResult {
  std::size_t episodes = 0;
  std::size_t successes = 0;
  double success_rate = 0.0;
  std::vector<TypeBreakdown> per_type;
};

// Greedy decisions; the library is never mutated.
EvalResult run_eval(const RunConfig& config, const SkillLibrary& library, const Policy& policy,
                    std::size_t episodes, std::uint64_t eval_seed);

// Rebuilds the run configuration stored in a checkpoint; throws
// RuntimeError if the checkpoint has none or its embedding version differs.
RunConfig config_from_checkpoint(const Checkpoint& ckpt);

enum class ExportFormat { jsonl, csv };

struct ExportRow {
  SkillId id = 0;
  std::uint64_t usage_count = 0;
  double utility = 0.0;
  std::vector<double> desc_embedding;
  std::int64_t created_step = 0;
  friend bool operator==(const ExportRow&, const ExportRow&) = default;
};

std::vector<ExportRow> export_rows(const SkillLibrary& library);
void export_library(const SkillLibrary& library, std::ostream& out, ExportFormat format);
void export_library(const SkillLibrary& library, const std::filesystem::path& path,
                    ExportFormat format);
std::vector<ExportRow> read_export_jsonl(const std::filesystem::path& path);

// Reads one numeric column of a metrics CSV.
std::vector<double> read_csv_column(const std::filesystem::path& path, const std::string& column);

}  // namespace skill1
