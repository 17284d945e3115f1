#include <algorithm>
#include <cmath>
#include <limits>

#include "core/bias.hpp"
#include "core/error.hpp"

namespace f2b {

namespace {

void check(std::uint64_t k, std::uint64_t n, double p0) {
  if (n == 0 || k > n || !(p0 > 0.0 && p0 < 1.0))
    fail(ErrorKind::Validation, "binomial test requires 0 <= k <= n, n >= 1, p0 in (0, 1)");
}

double log_pmf(std::uint64_t j, std::uint64_t n, double log_p, double log_q) {
  const double nn = static_cast<double>(n);
  const double jj = static_cast<double>(j);
  return std::lgamma(nn + 1.0) - std::lgamma(jj + 1.0) - std::lgamma(nn - jj + 1.0) + jj * log_p +
         (nn - jj) * log_q;
}

// log sum_{j in [lo, hi]} pmf(j), accumulated around the largest term.
double log_range(std::uint64_t lo, std::uint64_t hi, std::uint64_t n, double p0) {
  const double log_p = std::log(p0);
  const double log_q = std::log1p(-p0);
  double peak = -std::numeric_limits<double>::infinity();
  for (std::uint64_t j = lo; j <= hi; ++j) peak = std::max(peak, log_pmf(j, n, log_p, log_q));
  double sum = 0.0;
  for (std::uint64_t j = lo; j <= hi; ++j) sum += std::exp(log_pmf(j, n, log_p, log_q) - peak);
  return peak + std::log(sum);
}

}  // namespace

double log_upper_tail(std::uint64_t k, std::uint64_t n, double p0) {
  check(k, n, p0);
  if (k == 0) return 0.0;
  // Near 1 the direct sum rounds away the small complement; go through it.
  if (static_cast<double>(k) <= static_cast<double>(n) * p0) return std::log1p(-std::exp(log_range(0, k - 1, n, p0)));
  return log_range(k, n, n, p0);
}

double log_lower_tail(std::uint64_t k, std::uint64_t n, double p0) {
  check(k, n, p0);
  if (k == n) return 0.0;
  if (static_cast<double>(k) >= static_cast<double>(n) * p0) return std::log1p(-std::exp(log_range(k + 1, n, n, p0)));
  return log_range(0, k, n, p0);
}

BinomialTest binomial_test(std::uint64_t k, std::uint64_t n, double p0) {
  check(k, n, p0);
  BinomialTest t;
  const double upper = std::exp(log_upper_tail(k, n, p0));
  const double lower = std::exp(log_lower_tail(k, n, p0));
  t.p_one_sided = std::min(1.0, upper);
  t.p_two_sided = std::min(1.0, 2.0 * std::min(lower, upper));
  return t;
}

}  // namespace f2b
