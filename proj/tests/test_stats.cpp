#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "oracles.hpp"
#include "skill1/stats.hpp"

using namespace skill1;

namespace {

double sample_var(const std::vector<double>& v) {
  const double m = oracle::mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

// Two-sided tail of Student's t by Simpson integration of the density over
// x = |t| / (1 - u), u in [0, 1).
double t_tail_two_sided(double t, double df) {
  const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * std::numbers::pi);
  auto pdf = [&](double x) { return c * std::pow(1.0 + x * x / df, -(df + 1) / 2); };
  const double a = std::abs(t);
  const int n = 200000;
  auto f = [&](double u) {
    if (u >= 1.0) return 0.0;
    const double x = a + u / (1.0 - u);
    return pdf(x) / ((1.0 - u) * (1.0 - u));
  };
  double s = f(0.0) + f(1.0);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(static_cast<double>(i) / n);
  return 2.0 * s / (3.0 * n);
}

}  // namespace

TEST_CASE("Welch statistic, degrees of freedom and p-value match the formulas") {
  const std::vector<std::vector<double>> as = {{1, 2, 3}, {0.91, 0.93, 0.95, 0.92}, {0.1, 0.5, 0.2, 0.9, 0.4}};
  const std::vector<std::vector<double>> bs = {{5, 7, 9}, {0.71, 0.80, 0.77}, {0.3, 0.35, 0.2, 0.6, 0.25, 0.4}};
  for (std::size_t i = 0; i < as.size(); ++i) {
    const auto& a = as[i];
    const auto& b = bs[i];
    const double va = sample_var(a) / a.size(), vb = sample_var(b) / b.size();
    const double t = (oracle::mean(a) - oracle::mean(b)) / std::sqrt(va + vb);
    const double df = (va + vb) * (va + vb) /
                      (va * va / (a.size() - 1.0) + vb * vb / (b.size() - 1.0));
    const auto r = welch_t_test(a, b);
    CHECK(r.t == doctest::Approx(t).epsilon(1e-12));
    CHECK(r.df == doctest::Approx(df).epsilon(1e-12));
    CHECK(r.p_two_sided == doctest::Approx(t_tail_two_sided(t, df)).epsilon(1e-6));
  }
}

TEST_CASE("Welch on three seeds per arm") {
  // Means 0.95 and 0.80, per-arm spreads 0.02 and 0.05.
  const std::vector<double> a = {0.93, 0.95, 0.97};
  const std::vector<double> b = {0.75, 0.80, 0.85};
  const auto r = welch_t_test(a, b);
  CHECK(r.t == doctest::Approx(0.15 / std::sqrt((0.0004 + 0.0025) / 3.0)).epsilon(1e-12));
  CHECK(r.df == doctest::Approx(2.624).epsilon(1e-3));
  CHECK(r.p_two_sided < 0.05);
}

TEST_CASE("Welch symmetry and degenerate cases") {
  const std::vector<double> a = {0.2, 0.4, 0.3, 0.6};
  const std::vector<double> b = {0.5, 0.7, 0.9};
  const auto ab = welch_t_test(a, b), ba = welch_t_test(b, a);
  CHECK(ab.t == doctest::Approx(-ba.t).epsilon(1e-14));
  CHECK(ab.df == doctest::Approx(ba.df).epsilon(1e-14));
  CHECK(ab.p_two_sided == doctest::Approx(ba.p_two_sided).epsilon(1e-14));

  const auto same = welch_t_test(a, a);
  CHECK(same.t == 0.0);
  CHECK(same.p_two_sided == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(welch_t_test(std::vector<double>{1.0}, b), std::invalid_argument);
  CHECK_THROWS_AS(welch_t_test(std::vector<double>{1, 1}, std::vector<double>{2, 2}), std::invalid_argument);
}

TEST_CASE("Welch on the reported three-seed aggregates") {
  // 97.5 +- 0.6 against 94.9 +- 0.9, three runs each. {m - s, m, m + s} has
  // sample mean m and sample std s.
  const std::vector<double> a = {96.9, 97.5, 98.1};
  const std::vector<double> b = {94.0, 94.9, 95.8};
  const auto r = welch_t_test(a, b);
  CHECK(std::abs(r.t - 4.06) <= 0.15);
  CHECK(std::abs(r.df - 3.40) <= 0.15);
  CHECK(r.p_two_sided < 0.05);
  CHECK(std::abs(r.p_two_sided - 0.021) < 0.005);
}
