#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "skill1/rng.hpp"
#include "skill1/skill_library.hpp"

namespace skill1 {

struct EnvConfig {
  std::size_t num_types = 8;      // M
  std::size_t seq_len = 4;        // L
  std::size_t num_actions = 5;    // A
  std::size_t max_steps = 12;     // T_max
  std::size_t keyword_slots = 5;  // type keywords per instruction
  double noise = 0.2;             // chance a slot shows another type's keyword

  void validate() const;  // throws ConfigError
};

// Number of task-level features (bias, majority share, first-agrees flag).
inline constexpr std::size_t kTaskFeatureDim = 3;

struct TaskSpec {
  std::size_t task_type = 0;
  std::vector<std::size_t> secret_sequence;
  std::string instruction_text;
  std::vector<std::string> keywords;  // the keyword slots, in order
  std::string object;
  std::string majority_keyword;       // most frequent slot keyword, ties to first seen
  std::vector<double> feature_vector;  // [1, majority share, first == majority]
};

struct EnvState {
  std::size_t progress = 0;
  std::size_t steps_used = 0;
  bool done = false;
  Outcome outcome = Outcome::failure;  // meaningful once done
};

struct StepResult {
  std::string observation;
  bool done = false;
  Outcome outcome = Outcome::failure;
};

// A task family: M types, each with one secret action sequence fixed by the
// run seed, so a strategy learned on one task transfers to every task of the
// same type.
class TaskFamily {
 public:
  TaskFamily(EnvConfig config, std::uint64_t run_seed);

  TaskSpec sample_task(Rng& rng) const;
  // Deterministic instruction for a given type and noise stream.
  TaskSpec make_task(std::size_t type, Rng& noise_rng) const;

  const EnvConfig& config() const { return config_; }
  const std::vector<std::size_t>& secret(std::size_t type) const { return secrets_.at(type); }
  const std::vector<std::string>& type_keywords() const { return keywords_; }

 private:
  EnvConfig config_;
  std::vector<std::vector<std::size_t>> secrets_;
  std::vector<std::string> keywords_;
};

// One episode. Correct next action advances progress; anything else is
// "blocked". Ends at progress == L (success) or steps_used == T_max.
class Episode {
 public:
  Episode(const TaskSpec& task, std::size_t num_actions, std::size_t max_steps);

  std::string reset();
  StepResult step(std::size_t action);  // throws RuntimeError after done

  const EnvState& state() const { return state_; }
  // Actions that advanced progress, in order (== the secret prefix).
  const std::vector<std::size_t>& advanced_actions() const { return advanced_; }
  std::size_t num_actions() const { return num_actions_; }

 private:
  const TaskSpec* task_;
  std::size_t num_actions_;
  std::size_t max_steps_;
  EnvState state_;
  std::vector<std::size_t> advanced_;
};

// Extracts every "act <n>" token. Returns nullopt if there are none or an
// index is out of range.
std::optional<std::vector<std::size_t>> parse_strategy(std::string_view strat,
                                                       std::size_t num_actions);

// Canonical strategy text for an action sequence: "act 3 > act 1 > ...".
std::string format_strategy(const std::vector<std::size_t>& actions);

// Next action the skill prescribes, provided its sequence prefix equals the
// actions that have advanced so far.
std::optional<std::size_t> skill_prescribed_action(std::string_view strat,
                                                   const std::vector<std::size_t>& advanced,
                                                   std::size_t num_actions);
std::optional<std::size_t> skill_prescribed_action(const Skill& skill, const Episode& episode);

}  // namespace skill1
