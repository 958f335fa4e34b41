#include "skill1/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace skill1 {

const char* head_name(Head h) {
  switch (h) {
    case Head::query: return "query";
    case Head::rerank: return "rerank";
    case Head::action: return "action";
    case Head::distill: return "distill";
  }
  return "?";
}

PolicyDims PolicyDims::for_env(const EnvConfig& env) {
  PolicyDims d;
  d.num_actions = env.num_actions;
  return d;
}

PolicyParams PolicyParams::zeros(const PolicyDims& d) {
  PolicyParams p;
  p.query = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d.query_templates),
                                  static_cast<Eigen::Index>(d.task_features));
  p.rerank = Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(d.rerank_features));
  p.action = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d.num_actions),
                                   static_cast<Eigen::Index>(d.action_features));
  p.distill = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d.distill_templates),
                                    static_cast<Eigen::Index>(d.distill_features));
  return p;
}

Eigen::MatrixXd& PolicyParams::head(Head h) {
  switch (h) {
    case Head::query: return query;
    case Head::rerank: return rerank;
    case Head::action: return action;
    case Head::distill: return distill;
  }
  throw std::logic_error("bad head");
}

const Eigen::MatrixXd& PolicyParams::head(Head h) const {
  return const_cast<PolicyParams*>(this)->head(h);
}

bool PolicyParams::all_finite() const {
  return query.allFinite() && rerank.allFinite() && action.allFinite() && distill.allFinite();
}

PolicyParams PolicyParams::zeros_like() const {
  PolicyParams p;
  for (Head h : kAllHeads) p.head(h) = Eigen::MatrixXd::Zero(head(h).rows(), head(h).cols());
  return p;
}

void PolicyParams::add_scaled(const PolicyParams& other, double scale) {
  for (Head h : kAllHeads) head(h) += scale * other.head(h);
}

double PolicyParams::squared_norm() const {
  double s = 0.0;
  for (Head h : kAllHeads) s += head(h).squaredNorm();
  return s;
}

bool operator==(const PolicyParams& a, const PolicyParams& b) {
  for (Head h : kAllHeads) {
    const auto& x = a.head(h);
    const auto& y = b.head(h);
    if (x.rows() != y.rows() || x.cols() != y.cols() || x != y) return false;
  }
  return true;
}

Policy Policy::initial(const PolicyDims& dims) {
  Policy p;
  p.dims = dims;
  p.params = PolicyParams::zeros(dims);
  p.reference = p.params;
  return p;
}

double DecisionRecord::logprob_behavior() const {
  double s = 0.0;
  for (const auto& st : steps) s += st.logprob_behavior;
  return s;
}

std::vector<std::size_t> DecisionRecord::chosen_labels() const {
  std::vector<std::size_t> out;
  out.reserve(steps.size());
  for (const auto& st : steps) out.push_back(st.options[st.chosen].label);
  return out;
}

std::vector<double> option_logits(const Eigen::MatrixXd& weights, std::span<const Option> options,
                                  double temperature) {
  std::vector<double> z(options.size());
  for (std::size_t i = 0; i < options.size(); ++i)
    z[i] = weights.row(static_cast<Eigen::Index>(options[i].row)).dot(options[i].features) /
           temperature;
  return z;
}

std::vector<double> log_softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double z : logits) s += std::exp(z - mx);
  const double lse = mx + std::log(s);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

double step_logprob(const PolicyParams& params, Head head, const ChoiceStep& step,
                    double temperature) {
  const auto lp = log_softmax(option_logits(params.head(head), step.options, temperature));
  return lp[step.chosen];
}

double record_logprob(const PolicyParams& params, const DecisionRecord& rec) {
  double s = 0.0;
  for (const auto& st : rec.steps) s += step_logprob(params, rec.head, st, rec.temperature);
  return s;
}

ChoiceStep sample_step(const Eigen::MatrixXd& weights, std::vector<Option> options,
                       double temperature, Rng& rng, SampleMode mode) {
  if (options.empty()) throw std::invalid_argument("sample_step: no options");
  if (!(temperature > 0.0)) throw std::invalid_argument("sample_step: temperature must be > 0");
  ChoiceStep st;
  const auto lp = log_softmax(option_logits(weights, options, temperature));
  if (mode == SampleMode::greedy) {
    st.chosen = static_cast<std::size_t>(std::max_element(lp.begin(), lp.end()) - lp.begin());
  } else {
    std::vector<double> p(lp.size());
    for (std::size_t i = 0; i < lp.size(); ++i) p[i] = std::exp(lp[i]);
    st.chosen = rng.categorical(p);
  }
  st.logprob_behavior = lp[st.chosen];
  st.options = std::move(options);
  return st;
}

// ---- query -----------------------------------------------------------------

std::string instantiate_query(QueryTemplate t, const TaskSpec& task) {
  switch (t) {
    case QueryTemplate::instruction: return task.instruction_text;
    case QueryTemplate::first_keyword: return task.keywords.front();
    case QueryTemplate::majority_keyword: return task.majority_keyword;
    case QueryTemplate::object: return task.object;
  }
  return task.instruction_text;
}

QueryDecision gen_query(const TaskSpec& task, const PolicyParams& params, double temperature,
                        Rng& rng, SampleMode mode) {
  const auto q = static_cast<std::size_t>(params.query.rows());
  const Eigen::Map<const Eigen::VectorXd> phi(task.feature_vector.data(),
                                              static_cast<Eigen::Index>(task.feature_vector.size()));
  std::vector<Option> opts;
  opts.reserve(q);
  for (std::size_t i = 0; i < q; ++i) opts.push_back({i, i, phi});
  QueryDecision d;
  d.record.head = Head::query;
  d.record.temperature = temperature;
  d.record.steps.push_back(sample_step(params.query, std::move(opts), temperature, rng, mode));
  d.template_index = d.record.steps.front().chosen;
  d.text = instantiate_query(static_cast<QueryTemplate>(d.template_index % kNumQueryTemplates), task);
  return d;
}

// ---- rerank ----------------------------------------------------------------

namespace {

std::vector<double> zscores(std::span<const double> x) {
  std::vector<double> z(x.size(), 0.0);
  if (x.empty()) return z;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size());
  if (!(var > 1e-24)) return z;
  const double sd = std::sqrt(var);
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - mean) / sd;
  return z;
}

}  // namespace

std::vector<Eigen::VectorXd> rerank_features(std::span<const double> query_similarity,
                                             std::span<const double> utility,
                                             std::span<const double> task_similarity,
                                             std::span<const std::uint64_t> usage_count) {
  const std::size_t k = query_similarity.size();
  if (utility.size() != k || task_similarity.size() != k || usage_count.size() != k)
    throw std::invalid_argument("rerank_features: length mismatch");
  const auto zs = zscores(query_similarity), zu = zscores(utility), zt = zscores(task_similarity);
  std::vector<Eigen::VectorXd> out;
  out.reserve(k);
  for (std::size_t j = 0; j < k; ++j) {
    Eigen::VectorXd f(static_cast<Eigen::Index>(kRerankFeatureDim));
    f << zs[j], zu[j], zt[j], std::log1p(static_cast<double>(usage_count[j])) / 8.0;
    out.push_back(std::move(f));
  }
  return out;
}

RerankDecision rerank(std::span<const Eigen::VectorXd> candidate_features,
                      const PolicyParams& params, double temperature, Rng& rng, SampleMode mode) {
  if (candidate_features.empty()) throw std::invalid_argument("rerank: empty candidate set");
  RerankDecision d;
  d.record.head = Head::rerank;
  d.record.temperature = temperature;
  std::vector<std::size_t> remaining(candidate_features.size());
  for (std::size_t j = 0; j < remaining.size(); ++j) remaining[j] = j;
  while (!remaining.empty()) {
    std::vector<Option> opts;
    opts.reserve(remaining.size());
    for (std::size_t j : remaining) opts.push_back({0, j, candidate_features[j]});
    ChoiceStep st = sample_step(params.rerank, std::move(opts), temperature, rng, mode);
    d.sigma.push_back(remaining[st.chosen]);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(st.chosen));
    d.record.steps.push_back(std::move(st));
  }
  return d;
}

// ---- act ---------------------------------------------------------------------

std::vector<Option> action_options(std::optional<std::size_t> prescribed, std::size_t num_actions) {
  std::vector<Option> opts;
  opts.reserve(num_actions);
  for (std::size_t a = 0; a < num_actions; ++a) {
    Eigen::VectorXd f(static_cast<Eigen::Index>(kActionFeatureDim));
    f << (prescribed && *prescribed == a ? 1.0 : 0.0), 1.0;
    opts.push_back({a, a, std::move(f)});
  }
  return opts;
}

ActDecision act(std::optional<std::size_t> prescribed, std::size_t num_actions,
                const PolicyParams& params, double temperature, Rng& rng, SampleMode mode) {
  ActDecision d;
  d.record.head = Head::action;
  d.record.temperature = temperature;
  d.record.steps.push_back(
      sample_step(params.action, action_options(prescribed, num_actions), temperature, rng, mode));
  d.action = d.record.steps.front().options[d.record.steps.front().chosen].label;
  return d;
}

ActDecision act(const Skill* skill, const Episode& episode, const PolicyParams& params,
                double temperature, Rng& rng, SampleMode mode) {
  std::optional<std::size_t> prescribed;
  if (skill) prescribed = skill_prescribed_action(*skill, episode);
  return act(prescribed, episode.num_actions(), params, temperature, rng, mode);
}

// ---- distill -------------------------------------------------------------------

Eigen::VectorXd distill_features(const TrajectorySummary& traj) {
  Eigen::VectorXd f(static_cast<Eigen::Index>(kDistillFeatureDim));
  f << 1.0, outcome_value(traj.outcome),
      static_cast<double>(traj.advanced.size()) / static_cast<double>(std::max<std::size_t>(1, traj.seq_len)),
      traj.had_skill ? 1.0 : 0.0;
  return f;
}

std::string instantiate_desc(DescTemplate t, const TaskSpec& task) {
  switch (t) {
    case DescTemplate::keyword_task: return task.majority_keyword + " task";
    case DescTemplate::instruction: return task.instruction_text;
    case DescTemplate::object: return task.object + " to " + task.majority_keyword;
    case DescTemplate::generic: return "general strategy";
  }
  return "general strategy";
}

std::string raw_trajectory_text(const TrajectorySummary& traj) {
  std::string s;
  for (std::size_t i = 0; i < traj.actions.size(); ++i) {
    if (i) s += "; ";
    s += "act " + std::to_string(traj.actions[i]);
    if (i < traj.observations.size()) s += " -> " + traj.observations[i];
  }
  return s;
}

DistillDecision distill(const TaskSpec& task, const TrajectorySummary& traj,
                        const PolicyParams& params, double temperature, Rng& rng,
                        SampleMode mode) {
  const auto dt = static_cast<std::size_t>(params.distill.rows());
  const Eigen::VectorXd chi = distill_features(traj);
  std::vector<Option> opts;
  opts.reserve(dt);
  for (std::size_t i = 0; i < dt; ++i) opts.push_back({i, i, chi});
  DistillDecision d;
  d.record.head = Head::distill;
  d.record.temperature = temperature;
  d.record.steps.push_back(sample_step(params.distill, std::move(opts), temperature, rng, mode));
  d.template_index = d.record.steps.front().chosen;
  d.draft.strat = format_strategy(traj.advanced);
  d.draft.desc = instantiate_desc(static_cast<DescTemplate>(d.template_index % kNumDescTemplates), task);
  return d;
}

}  // namespace skill1
