#include "skill1/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace skill1 {
namespace {

std::vector<double> relevance(std::span<const double> utilities, RelevanceGrading grading) {
  std::vector<double> rel(utilities.begin(), utilities.end());
  if (grading == RelevanceGrading::rank) {
    std::vector<std::size_t> order(utilities.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return utilities[a] > utilities[b]; });
    const double k = static_cast<double>(utilities.size());
    for (std::size_t r = 0; r < order.size(); ++r) rel[order[r]] = k - static_cast<double>(r);
  }
  return rel;
}

double dcg(std::span<const double> rel_in_order) {
  double s = 0.0;
  for (std::size_t j = 0; j < rel_in_order.size(); ++j)
    s += rel_in_order[j] / std::log2(static_cast<double>(j) + 2.0);
  return s;
}

}  // namespace

double ndcg(std::span<const std::size_t> sigma, std::span<const double> utilities,
            RelevanceGrading grading) {
  const std::size_t k = utilities.size();
  if (sigma.size() != k) throw std::invalid_argument("ndcg: sigma length differs from k");
  std::vector<char> seen(k, 0);
  for (std::size_t idx : sigma) {
    if (idx >= k || seen[idx]) throw std::invalid_argument("ndcg: sigma is not a permutation");
    seen[idx] = 1;
  }
  if (k == 0) return 1.0;

  const std::vector<double> rel = relevance(utilities, grading);
  std::vector<double> ranked(k);
  for (std::size_t j = 0; j < k; ++j) ranked[j] = rel[sigma[j]];
  std::vector<double> ideal = rel;
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const double idcg = dcg(ideal);
  if (idcg == 0.0) return 1.0;
  return dcg(ranked) / idcg;
}

double library_baseline(std::span<const double> candidate_utilities) {
  if (candidate_utilities.empty()) return 0.0;
  return *std::max_element(candidate_utilities.begin(), candidate_utilities.end());
}

RewardBundle assign_rewards(Outcome outcome, std::span<const double> candidate_utilities,
                            std::span<const std::size_t> sigma, RelevanceGrading grading) {
  RewardBundle b;
  b.r_util = outcome;
  b.u_hat = library_baseline(candidate_utilities);
  b.r_distill = distill_reward(outcome, b.u_hat);
  b.r_rerank = candidate_utilities.empty() ? 1.0 : ndcg(sigma, candidate_utilities, grading);
  return b;
}

}  // namespace skill1
