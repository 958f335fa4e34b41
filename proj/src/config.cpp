#include "skill1/config.hpp"

#include <fstream>
#include <set>

#include "skill1/error.hpp"

namespace skill1 {
namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw ConfigError("unknown config key '" + (where.empty() ? "" : where + ".") + it.key() + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + (where.empty() ? "" : where + ".") + key +
                      "' has the wrong type: " + e.what());
  }
}

std::string selection_name(SelectionMode m) {
  return m == SelectionMode::policy_rerank ? "policy_rerank" : "ucb_blend";
}

}  // namespace

void RunConfig::validate() {
  if (ablations.no_library) {
    ablations.no_select = true;
    ablations.no_distill = true;
  }
  if (batch_tasks < 1) throw ConfigError("batch_tasks must be >= 1");
  if (group_size < 2) throw ConfigError("group_size must be >= 2");
  library.validate();
  if (lambda1 < 0.0 || lambda2 < 0.0) throw ConfigError("lambda1 and lambda2 must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw ConfigError("clip_eps must be in (0, 1)");
  if (kl_beta < 0.0) throw ConfigError("kl_beta must be >= 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(train_temperature > 0.0) || !(eval_temperature > 0.0))
    throw ConfigError("temperatures must be > 0");
  if (!(ucb_w_sim >= 0.0 && ucb_w_sim <= 1.0)) throw ConfigError("ucb.w_sim must be in [0, 1]");
  if (ucb_c < 0.0) throw ConfigError("ucb.c must be >= 0");
  if (snapshot_every < 1) throw ConfigError("snapshot_every must be >= 1");
  if (embedding_dim < 1) throw ConfigError("embedding_dim must be >= 1");
  env.validate();
}

void RunConfig::apply_ablation(const std::string& name) {
  if (name == "no_select") ablations.no_select = true;
  else if (name == "no_distill") ablations.no_distill = true;
  else if (name == "no_library") ablations.no_library = true;
  else if (name == "zero_l1" || name == "zero_lambda1") ablations.zero_lambda1 = true;
  else if (name == "zero_l2" || name == "zero_lambda2") ablations.zero_lambda2 = true;
  else throw ConfigError("unknown ablation '" + name + "'");
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  reject_unknown(j,
                 {"batch_tasks", "group_size", "library", "lambda1", "lambda2", "learning_rate",
                  "clip_eps", "kl_beta", "epochs", "train_temperature", "eval_temperature",
                  "selection_mode", "ucb", "relevance", "precision_scope", "ablations", "seed",
                  "max_steps", "snapshot_every", "embedding_dim", "parallel_rollouts", "env"},
                 "");
  read(j, "batch_tasks", c.batch_tasks, "");
  read(j, "group_size", c.group_size, "");
  read(j, "lambda1", c.lambda1, "");
  read(j, "lambda2", c.lambda2, "");
  read(j, "learning_rate", c.learning_rate, "");
  read(j, "clip_eps", c.clip_eps, "");
  read(j, "kl_beta", c.kl_beta, "");
  read(j, "epochs", c.epochs, "");
  read(j, "train_temperature", c.train_temperature, "");
  read(j, "eval_temperature", c.eval_temperature, "");
  read(j, "seed", c.seed, "");
  read(j, "max_steps", c.max_steps, "");
  read(j, "snapshot_every", c.snapshot_every, "");
  read(j, "embedding_dim", c.embedding_dim, "");
  read(j, "parallel_rollouts", c.parallel_rollouts, "");

  if (j.contains("selection_mode")) {
    std::string m;
    read(j, "selection_mode", m, "");
    if (m == "policy_rerank") c.selection_mode = SelectionMode::policy_rerank;
    else if (m == "ucb_blend") c.selection_mode = SelectionMode::ucb_blend;
    else throw ConfigError("selection_mode must be policy_rerank or ucb_blend");
  }
  if (j.contains("relevance")) {
    std::string m;
    read(j, "relevance", m, "");
    if (m == "utility") c.relevance = RelevanceGrading::utility;
    else if (m == "rank") c.relevance = RelevanceGrading::rank;
    else throw ConfigError("relevance must be utility or rank");
  }
  if (j.contains("precision_scope")) {
    std::string m;
    read(j, "precision_scope", m, "");
    if (m == "selected") c.precision_scope = PrecisionScope::selected;
    else if (m == "library") c.precision_scope = PrecisionScope::library;
    else throw ConfigError("precision_scope must be selected or library");
  }
  if (j.contains("library")) {
    const json& l = j.at("library");
    reject_unknown(l, {"capacity", "ema_rate", "top_k", "retirement"}, "library");
    read(l, "capacity", c.library.capacity, "library");
    read(l, "ema_rate", c.library.ema_rate, "library");
    read(l, "top_k", c.library.top_k, "library");
    if (l.contains("retirement")) {
      std::string r;
      read(l, "retirement", r, "library");
      if (r == "log1p") c.library.retirement = RetirementRule::log1p;
      else if (r == "log_clamped") c.library.retirement = RetirementRule::log_clamped;
      else throw ConfigError("library.retirement must be log1p or log_clamped");
    }
  }
  if (j.contains("ucb")) {
    const json& u = j.at("ucb");
    reject_unknown(u, {"w_sim", "c"}, "ucb");
    read(u, "w_sim", c.ucb_w_sim, "ucb");
    read(u, "c", c.ucb_c, "ucb");
  }
  if (j.contains("ablations")) {
    const json& a = j.at("ablations");
    reject_unknown(a, {"no_select", "no_distill", "no_library", "zero_lambda1", "zero_lambda2"},
                   "ablations");
    read(a, "no_select", c.ablations.no_select, "ablations");
    read(a, "no_distill", c.ablations.no_distill, "ablations");
    read(a, "no_library", c.ablations.no_library, "ablations");
    read(a, "zero_lambda1", c.ablations.zero_lambda1, "ablations");
    read(a, "zero_lambda2", c.ablations.zero_lambda2, "ablations");
  }
  if (j.contains("env")) {
    const json& e = j.at("env");
    reject_unknown(e, {"num_types", "seq_len", "num_actions", "max_steps", "keyword_slots", "noise"},
                   "env");
    read(e, "num_types", c.env.num_types, "env");
    read(e, "seq_len", c.env.seq_len, "env");
    read(e, "num_actions", c.env.num_actions, "env");
    read(e, "max_steps", c.env.max_steps, "env");
    read(e, "keyword_slots", c.env.keyword_slots, "env");
    read(e, "noise", c.env.noise, "env");
  }
  c.validate();
  return c;
}

json config_to_json(const RunConfig& c) {
  return {
      {"batch_tasks", c.batch_tasks},
      {"group_size", c.group_size},
      {"library",
       {{"capacity", c.library.capacity},
        {"ema_rate", c.library.ema_rate},
        {"top_k", c.library.top_k},
        {"retirement", c.library.retirement == RetirementRule::log1p ? "log1p" : "log_clamped"}}},
      {"lambda1", c.lambda1},
      {"lambda2", c.lambda2},
      {"learning_rate", c.learning_rate},
      {"clip_eps", c.clip_eps},
      {"kl_beta", c.kl_beta},
      {"epochs", c.epochs},
      {"train_temperature", c.train_temperature},
      {"eval_temperature", c.eval_temperature},
      {"selection_mode", selection_name(c.selection_mode)},
      {"ucb", {{"w_sim", c.ucb_w_sim}, {"c", c.ucb_c}}},
      {"relevance", c.relevance == RelevanceGrading::utility ? "utility" : "rank"},
      {"precision_scope", c.precision_scope == PrecisionScope::selected ? "selected" : "library"},
      {"ablations",
       {{"no_select", c.ablations.no_select},
        {"no_distill", c.ablations.no_distill},
        {"no_library", c.ablations.no_library},
        {"zero_lambda1", c.ablations.zero_lambda1},
        {"zero_lambda2", c.ablations.zero_lambda2}}},
      {"seed", c.seed},
      {"max_steps", c.max_steps},
      {"snapshot_every", c.snapshot_every},
      {"embedding_dim", c.embedding_dim},
      {"parallel_rollouts", c.parallel_rollouts},
      {"env",
       {{"num_types", c.env.num_types},
        {"seq_len", c.env.seq_len},
        {"num_actions", c.env.num_actions},
        {"max_steps", c.env.max_steps},
        {"keyword_slots", c.env.keyword_slots},
        {"noise", c.env.noise}}},
  };
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

}  // namespace skill1
