#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/eval.hpp"
#include "core/ingest.hpp"

namespace f2b {

struct BinomialTest {
  double p_one_sided = 1.0;  // P(X >= k)
  double p_two_sided = 1.0;  // min(1, 2 min(P(X <= k), P(X >= k)))
};

// Exact binomial tails summed in log space from log-gamma terms.
BinomialTest binomial_test(std::uint64_t k, std::uint64_t n, double p0 = 0.5);

// log P(X >= k) and log P(X <= k) for X ~ Binomial(n, p0).
double log_upper_tail(std::uint64_t k, std::uint64_t n, double p0);
double log_lower_tail(std::uint64_t k, std::uint64_t n, double p0);

enum class GroupAttr { Gender, Race };

GroupAttr parse_group_attr(std::string_view text);

enum class Higher { A, B };

struct AuditPair {
  std::string id_a;  // member of group_a
  std::string id_b;
  std::string group_a;
  std::string group_b;
  Higher true_higher = Higher::A;
};

// Group label of a record: "M"/"F" for gender, the race string otherwise.
std::string group_label(const FaceRecord& r, GroupAttr attr);

// n_pairs cross-group pairs with |dBMI| < 1 (exact ties excluded), half with
// group_x truly higher and half with group_y truly higher. No pair repeats,
// and records are reused only once every record with an eligible partner has
// been used as often. The pair set does not depend on the order of the two
// group labels.
std::vector<AuditPair> build_audit_pairs(const Dataset& ds, std::span<const std::string> pool_ids, GroupAttr attr,
                                         const std::string& group_x, const std::string& group_y,
                                         std::size_t n_pairs, std::uint64_t seed);

struct AuditReport {
  std::string group_x;
  std::string group_y;
  std::size_t n_pairs = 0;
  std::size_t higher_x = 0;  // pairs where group_x got the higher prediction
  std::size_t higher_y = 0;
  std::size_t ties = 0;      // split alternately, counted in higher_x/higher_y
  BinomialTest test;         // on higher_x against 1/2
  std::string pool;          // "test" or "test+train"
  std::uint64_t seed = 0;
};

// Groups are taken from the pairs (group_a is reported as group_x). Prediction
// ties go alternately to the two groups, lexicographically smaller label
// first, so swapping the labels transposes the counts.
AuditReport run_audit(const Dataset& ds, std::span<const AuditPair> pairs, const Predictor& predictor);

std::string audit_report_to_json(const AuditReport& report);
std::string audit_summary(const AuditReport& report);

}  // namespace f2b
