#pragma once

#include <span>

namespace skill1 {

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p_two_sided = 1.0;
};

// Unequal-variance two-sample t-test with Welch-Satterthwaite degrees of
// freedom (sample variances, ddof = 1). Throws std::invalid_argument if a
// sample has fewer than two values or both variances are zero.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

}  // namespace skill1
