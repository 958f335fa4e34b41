#include "skill1/env.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "skill1/error.hpp"

namespace skill1 {
namespace {

constexpr std::string_view kKeywordPool[] = {
    "heat",  "cool",   "clean", "pick",  "look",  "examine", "place", "buy",
    "slice", "toggle", "stack", "water", "sort",  "fold",    "paint", "repair",
};
constexpr std::string_view kObjects[] = {
    "apple", "plate", "mug", "lamp", "shoes", "book", "knife", "towel",
};

}  // namespace

void EnvConfig::validate() const {
  if (num_types < 1) throw ConfigError("env.num_types must be >= 1");
  if (seq_len < 1) throw ConfigError("env.seq_len must be >= 1");
  if (num_actions < 2) throw ConfigError("env.num_actions must be >= 2");
  if (max_steps < seq_len) throw ConfigError("env.max_steps must be >= env.seq_len");
  if (keyword_slots < 1) throw ConfigError("env.keyword_slots must be >= 1");
  if (!(noise >= 0.0 && noise < 1.0)) throw ConfigError("env.noise must be in [0, 1)");
}

TaskFamily::TaskFamily(EnvConfig config, std::uint64_t run_seed) : config_(config) {
  config_.validate();
  for (std::size_t m = 0; m < config_.num_types; ++m) {
    if (m < std::size(kKeywordPool))
      keywords_.emplace_back(kKeywordPool[m]);
    else
      keywords_.push_back("kind" + std::to_string(m));
  }

  // Distinct per-type secrets when the sequence space allows it.
  double space = 1.0;
  for (std::size_t i = 0; i < config_.seq_len && space < 1e18; ++i)
    space *= static_cast<double>(config_.num_actions);
  const bool distinct = space >= static_cast<double>(config_.num_types);

  Rng rng(derive_seed({run_seed, static_cast<std::uint64_t>(Stream::secrets)}));
  while (secrets_.size() < config_.num_types) {
    std::vector<std::size_t> seq(config_.seq_len);
    for (auto& a : seq) a = rng.index(config_.num_actions);
    if (distinct && std::find(secrets_.begin(), secrets_.end(), seq) != secrets_.end()) continue;
    secrets_.push_back(std::move(seq));
  }
}

TaskSpec TaskFamily::make_task(std::size_t type, Rng& rng) const {
  TaskSpec t;
  t.task_type = type;
  t.secret_sequence = secrets_.at(type);
  const std::size_t m = config_.num_types;
  for (std::size_t i = 0; i < config_.keyword_slots; ++i) {
    std::size_t kw = type;
    if (m > 1 && rng.bernoulli(config_.noise)) {
      kw = rng.index(m - 1);
      if (kw >= type) ++kw;
    }
    t.keywords.push_back(keywords_[kw]);
  }
  t.object = std::string(kObjects[rng.index(std::size(kObjects))]);

  for (const auto& k : t.keywords) t.instruction_text += k + " ";
  t.instruction_text += "the " + t.object;

  std::size_t best_count = 0;
  for (const auto& k : t.keywords) {
    const auto c = static_cast<std::size_t>(std::count(t.keywords.begin(), t.keywords.end(), k));
    if (c > best_count) {
      best_count = c;
      t.majority_keyword = k;
    }
  }
  t.feature_vector = {
      1.0,
      static_cast<double>(best_count) / static_cast<double>(t.keywords.size()),
      t.keywords.front() == t.majority_keyword ? 1.0 : 0.0,
  };
  return t;
}

TaskSpec TaskFamily::sample_task(Rng& rng) const {
  const std::size_t type = rng.index(config_.num_types);
  return make_task(type, rng);
}

Episode::Episode(const TaskSpec& task, std::size_t num_actions, std::size_t max_steps)
    : task_(&task), num_actions_(num_actions), max_steps_(max_steps) {}

std::string Episode::reset() {
  state_ = EnvState{};
  advanced_.clear();
  return "start";
}

StepResult Episode::step(std::size_t action) {
  if (state_.done) throw RuntimeError("env: step called on a finished episode");
  if (action >= num_actions_) throw RuntimeError("env: action index out of range");
  StepResult r;
  state_.steps_used += 1;
  const auto& secret = task_->secret_sequence;
  if (action == secret[state_.progress]) {
    state_.progress += 1;
    advanced_.push_back(action);
    r.observation = "advanced(" + std::to_string(state_.progress) + ")";
  } else {
    r.observation = "blocked";
  }
  if (state_.progress == secret.size()) {
    state_.done = true;
    state_.outcome = Outcome::success;
  } else if (state_.steps_used >= max_steps_) {
    state_.done = true;
    state_.outcome = Outcome::failure;
  }
  r.done = state_.done;
  r.outcome = state_.outcome;
  return r;
}

std::optional<std::vector<std::size_t>> parse_strategy(std::string_view strat,
                                                       std::size_t num_actions) {
  std::vector<std::size_t> seq;
  std::size_t i = 0;
  auto is_word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
  while (i < strat.size()) {
    std::size_t pos = strat.find("act", i);
    if (pos == std::string_view::npos) break;
    const bool left_ok = pos == 0 || !is_word(strat[pos - 1]);
    std::size_t j = pos + 3;
    if (!left_ok || j >= strat.size() || strat[j] != ' ') {
      i = pos + 3;
      continue;
    }
    while (j < strat.size() && strat[j] == ' ') ++j;
    std::size_t value = 0;
    auto [end, ec] = std::from_chars(strat.data() + j, strat.data() + strat.size(), value);
    if (ec != std::errc{} || (end != strat.data() + strat.size() && is_word(*end))) {
      i = pos + 3;
      continue;
    }
    if (value >= num_actions) return std::nullopt;
    seq.push_back(value);
    i = static_cast<std::size_t>(end - strat.data());
  }
  if (seq.empty()) return std::nullopt;
  return seq;
}

std::string format_strategy(const std::vector<std::size_t>& actions) {
  std::string s;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (i) s += " > ";
    s += "act " + std::to_string(actions[i]);
  }
  return s;
}

std::optional<std::size_t> skill_prescribed_action(std::string_view strat,
                                                   const std::vector<std::size_t>& advanced,
                                                   std::size_t num_actions) {
  const auto seq = parse_strategy(strat, num_actions);
  if (!seq) return std::nullopt;
  const std::size_t p = advanced.size();
  if (seq->size() <= p) return std::nullopt;
  if (!std::equal(advanced.begin(), advanced.end(), seq->begin())) return std::nullopt;
  return (*seq)[p];
}

std::optional<std::size_t> skill_prescribed_action(const Skill& skill, const Episode& episode) {
  return skill_prescribed_action(skill.strat, episode.advanced_actions(), episode.num_actions());
}

}  // namespace skill1
