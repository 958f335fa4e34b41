#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "skill1/env.hpp"
#include "skill1/rewards.hpp"
#include "skill1/skill_library.hpp"

namespace skill1 {

enum class SelectionMode { policy_rerank, ucb_blend };
enum class PrecisionScope { selected, library };

struct Ablations {
  bool no_select = false;
  bool no_distill = false;
  bool no_library = false;
  bool zero_lambda1 = false;
  bool zero_lambda2 = false;
};

struct RunConfig {
  std::size_t batch_tasks = 4;  // N
  std::size_t group_size = 16;  // G
  LibraryConfig library;        // capacity, ema_rate, top_k, retirement
  double lambda1 = 0.3;
  double lambda2 = 0.3;
  double learning_rate = 1.0;
  double clip_eps = 0.2;
  double kl_beta = 0.01;
  std::size_t epochs = 1;
  double train_temperature = 1.0;
  double eval_temperature = 0.4;
  SelectionMode selection_mode = SelectionMode::policy_rerank;
  double ucb_w_sim = 0.6;
  double ucb_c = 1.0;
  RelevanceGrading relevance = RelevanceGrading::utility;
  PrecisionScope precision_scope = PrecisionScope::selected;
  Ablations ablations;
  std::uint64_t seed = 1;
  std::size_t max_steps = 300;
  std::size_t snapshot_every = 20;
  std::size_t embedding_dim = 64;
  bool parallel_rollouts = true;
  EnvConfig env;

  // Normalizes implied flags (no_library => no_select, no_distill) and
  // checks ranges. Throws ConfigError.
  void validate();

  double effective_lambda1() const { return ablations.zero_lambda1 ? 0.0 : lambda1; }
  double effective_lambda2() const { return ablations.zero_lambda2 ? 0.0 : lambda2; }

  // Applies one CLI ablation name: no_select, no_distill, no_library,
  // zero_l1, zero_l2 (or zero_lambda1 / zero_lambda2).
  void apply_ablation(const std::string& name);
};

// Every field has a key; unknown keys are a ConfigError. Missing keys keep
// their defaults.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& cfg);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace skill1
