#include "skill1/gradients.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "skill1/error.hpp"

namespace skill1 {
namespace {

void add_option_grad(Eigen::MatrixXd& grad, std::span<const Option> options,
                     std::span<const double> coeffs, double temperature) {
  for (std::size_t o = 0; o < options.size(); ++o) {
    if (coeffs[o] == 0.0) continue;
    grad.row(static_cast<Eigen::Index>(options[o].row)) +=
        (coeffs[o] / temperature) * options[o].features.transpose();
  }
}

// scale * d log pi(chosen) / dW
void add_logprob_grad(Eigen::MatrixXd& grad, const Eigen::MatrixXd& weights, const ChoiceStep& st,
                      double temperature, double scale) {
  const auto lp = log_softmax(option_logits(weights, st.options, temperature));
  std::vector<double> c(lp.size());
  for (std::size_t o = 0; o < lp.size(); ++o)
    c[o] = scale * ((o == st.chosen ? 1.0 : 0.0) - std::exp(lp[o]));
  add_option_grad(grad, st.options, c, temperature);
}

struct KlTerm {
  double value = 0.0;
  std::vector<double> lp, lq;
};

KlTerm kl_term(const Eigen::MatrixXd& w, const Eigen::MatrixXd& w_ref, const ChoiceStep& st,
               double temperature) {
  KlTerm k;
  k.lp = log_softmax(option_logits(w, st.options, temperature));
  k.lq = log_softmax(option_logits(w_ref, st.options, temperature));
  for (std::size_t o = 0; o < k.lp.size(); ++o) k.value += std::exp(k.lp[o]) * (k.lp[o] - k.lq[o]);
  return k;
}

std::size_t token_count(const Segment& seg) {
  std::size_t n = 0;
  for (const auto* d : seg.decisions) n += d->steps.size();
  return n;
}

double importance_ratio(const PolicyParams& params, const DecisionRecord& rec,
                        const ChoiceStep& st, std::size_t rollout) {
  const double rho = std::exp(step_logprob(params, rec.head, st, rec.temperature) -
                              st.logprob_behavior);
  if (!std::isfinite(rho))
    throw RuntimeError("non-finite importance ratio in rollout " + std::to_string(rollout) +
                       " (" + head_name(rec.head) + " head)");
  return rho;
}

}  // namespace

AdvantageSet grpo_advantages(std::span<const double> rewards) {
  if (rewards.size() < 2) throw std::invalid_argument("grpo_advantages: group size must be >= 2");
  const double g = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= g;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= g;
  AdvantageSet a;
  a.values.assign(rewards.size(), 0.0);
  const bool all_equal =
      std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards[0]; });
  if (all_equal || var == 0.0) return a;
  const double sd = std::sqrt(var);
  for (std::size_t i = 0; i < rewards.size(); ++i) a.values[i] = (rewards[i] - mean) / sd;
  return a;
}

double step_kl(const PolicyParams& params, const PolicyParams& reference, Head head,
               const ChoiceStep& step, double temperature) {
  return kl_term(params.head(head), reference.head(head), step, temperature).value;
}

double grpo_objective(std::span<const Segment> segments, const PolicyParams& params,
                      const PolicyParams& reference, const GrpoSettings& s) {
  if (segments.empty()) return 0.0;
  double total = 0.0;
  for (const Segment& seg : segments) {
    const std::size_t n = token_count(seg);
    if (n == 0) continue;
    double acc = 0.0;
    for (const auto* rec : seg.decisions) {
      for (const auto& st : rec->steps) {
        const double rho = importance_ratio(params, *rec, st, seg.rollout);
        const double clipped = std::clamp(rho, 1.0 - s.clip_eps, 1.0 + s.clip_eps);
        acc += std::min(rho * seg.advantage, clipped * seg.advantage);
        if (s.kl_beta != 0.0)
          acc -= s.kl_beta * step_kl(params, reference, rec->head, st, rec->temperature);
      }
    }
    total += acc / static_cast<double>(n);
  }
  return total / static_cast<double>(segments.size());
}

PolicyParams grpo_objective_grad(std::span<const Segment> segments, const PolicyParams& params,
                                 const PolicyParams& reference, const GrpoSettings& s) {
  PolicyParams g = params.zeros_like();
  if (segments.empty()) return g;
  const double inv_groups = 1.0 / static_cast<double>(segments.size());
  for (const Segment& seg : segments) {
    const std::size_t n = token_count(seg);
    if (n == 0) continue;
    const double w = inv_groups / static_cast<double>(n);
    for (const auto* rec : seg.decisions) {
      Eigen::MatrixXd& gh = g.head(rec->head);
      const Eigen::MatrixXd& wh = params.head(rec->head);
      for (const auto& st : rec->steps) {
        const double rho = importance_ratio(params, *rec, st, seg.rollout);
        const double a = seg.advantage;
        // d/dlogpi of min(rho A, clip(rho) A): rho A on the unclipped branch.
        const bool active = (a > 0.0 && rho <= 1.0 + s.clip_eps) ||
                            (a < 0.0 && rho >= 1.0 - s.clip_eps);
        if (active) add_logprob_grad(gh, wh, st, rec->temperature, w * rho * a);
        if (s.kl_beta != 0.0) {
          const KlTerm k = kl_term(wh, reference.head(rec->head), st, rec->temperature);
          std::vector<double> c(k.lp.size());
          for (std::size_t o = 0; o < c.size(); ++o)
            c[o] = -s.kl_beta * w * std::exp(k.lp[o]) * (k.lp[o] - k.lq[o] - k.value);
          add_option_grad(gh, st.options, c, rec->temperature);
        }
      }
    }
  }
  return g;
}

double rerank_reinforce_objective(std::span<const RerankSample> samples,
                                  const PolicyParams& params, std::size_t total_rollouts) {
  if (samples.empty() || total_rollouts == 0) return 0.0;
  double s = 0.0;
  for (const auto& smp : samples) s += smp.reward * record_logprob(params, *smp.record);
  return s / static_cast<double>(total_rollouts);
}

PolicyParams rerank_reinforce_grad(std::span<const RerankSample> samples,
                                   const PolicyParams& params, std::size_t total_rollouts) {
  PolicyParams g = params.zeros_like();
  if (samples.empty() || total_rollouts == 0) return g;
  const double inv = 1.0 / static_cast<double>(total_rollouts);
  for (const auto& smp : samples) {
    if (smp.reward == 0.0) continue;
    const DecisionRecord& rec = *smp.record;
    for (const auto& st : rec.steps)
      add_logprob_grad(g.head(rec.head), params.head(rec.head), st, rec.temperature,
                       inv * smp.reward);
  }
  return g;
}

std::vector<Segment> distill_segments(std::span<const DistillGroup> groups) {
  std::vector<Segment> segs;
  for (const auto& grp : groups) {
    if (grp.records.size() != grp.rewards.size())
      throw std::invalid_argument("distill group: records and rewards differ in length");
    const AdvantageSet adv = grpo_advantages(grp.rewards);
    for (std::size_t i = 0; i < grp.records.size(); ++i) {
      Segment seg;
      seg.decisions = {grp.records[i]};
      seg.advantage = adv.values[i];
      seg.rollout = i < grp.rollouts.size() ? grp.rollouts[i] : i;
      segs.push_back(std::move(seg));
    }
  }
  return segs;
}

double distill_objective(std::span<const DistillGroup> groups, const PolicyParams& params,
                         const PolicyParams& reference, const GrpoSettings& settings) {
  const auto segs = distill_segments(groups);
  return grpo_objective(segs, params, reference, settings);
}

PolicyParams distill_objective_grad(std::span<const DistillGroup> groups,
                                    const PolicyParams& params, const PolicyParams& reference,
                                    const GrpoSettings& settings) {
  const auto segs = distill_segments(groups);
  return grpo_objective_grad(segs, params, reference, settings);
}

PolicyParams apply_update(const PolicyParams& params, const GradientBundle& grads, double lambda1,
                          double lambda2, double learning_rate) {
  if (lambda1 < 0.0 || lambda2 < 0.0) throw std::invalid_argument("apply_update: negative lambda");
  PolicyParams next = params;
  for (Head h : kAllHeads) {
    Eigen::MatrixXd step = grads.util.head(h);
    if (lambda1 != 0.0) step += lambda1 * grads.rerank.head(h);
    if (lambda2 != 0.0) step += lambda2 * grads.distill.head(h);
    next.head(h) += learning_rate * step;
  }
  if (!next.all_finite()) throw RuntimeError("apply_update: non-finite parameter after update");
  return next;
}

}  // namespace skill1
