#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "skill1/skill_library.hpp"

namespace skill1 {

// Relevance used for DCG: the raw utility value, or k - rank in the
// utility-descending order.
enum class RelevanceGrading { utility, rank };

struct RewardBundle {
  Outcome r_util = Outcome::failure;
  double r_rerank = 0.0;   // NDCG in [0, 1]
  double r_distill = 0.0;  // r_util - u_hat
  double u_hat = 0.0;      // best candidate utility at batch start
};

inline double utilization_reward(Outcome outcome) { return outcome_value(outcome); }

// sigma[j] is the candidate index placed at position j (0-based). Throws
// std::invalid_argument unless sigma is a permutation of 0..k-1 with
// k == utilities.size(). Returns 1 for k == 0 and for IDCG == 0.
double ndcg(std::span<const std::size_t> sigma, std::span<const double> utilities,
            RelevanceGrading grading = RelevanceGrading::utility);

inline double distill_reward(Outcome outcome, double u_hat) {
  return outcome_value(outcome) - u_hat;
}

// Max of the candidate utilities; 0 for an empty set.
double library_baseline(std::span<const double> candidate_utilities);

// Full bundle from batch-start candidate utilities. With no candidates the
// rerank reward is 1 (nothing to order) and u_hat is 0.
RewardBundle assign_rewards(Outcome outcome, std::span<const double> candidate_utilities,
                            std::span<const std::size_t> sigma,
                            RelevanceGrading grading = RelevanceGrading::utility);

}  // namespace skill1
