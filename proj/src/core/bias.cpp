#include "core/bias.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace f2b {

GroupAttr parse_group_attr(std::string_view text) {
  if (text == "gender") return GroupAttr::Gender;
  if (text == "race") return GroupAttr::Race;
  fail(ErrorKind::Validation, "group attribute must be gender or race, got '" + std::string(text) + "'");
}

std::string group_label(const FaceRecord& r, GroupAttr attr) {
  return attr == GroupAttr::Gender ? to_string(r.gender) : r.race;
}

namespace {

std::string canonical_group(GroupAttr attr, const std::string& label) {
  if (attr == GroupAttr::Gender) return to_string(parse_gender(label));
  if (label.empty()) fail(ErrorKind::Validation, "race group label must not be empty");
  return label;
}

using Match = std::pair<std::size_t, std::size_t>;  // (lo-group row, hi-group row)

// Picks `half` matches from each side, visiting candidates in seeded random
// order and admitting a match only while both of its records have been used
// fewer than `cap` times; the cap rises until both sides are full. Spreading
// records this way keeps the pair outcomes close to independent, which the
// binomial test assumes.
std::vector<Match> pick_matches(std::array<std::vector<Match>, 2> sides, std::size_t half, SplitMix64& rng) {
  for (auto& side : sides) rng.shuffle(side);
  std::unordered_map<std::size_t, std::size_t> uses;
  std::array<std::vector<bool>, 2> taken{std::vector<bool>(sides[0].size()), std::vector<bool>(sides[1].size())};
  std::array<std::size_t, 2> filled{};
  std::vector<Match> out;
  out.reserve(2 * half);
  const std::size_t longest = std::max(sides[0].size(), sides[1].size());
  for (std::size_t cap = 1; filled[0] < half || filled[1] < half; ++cap) {
    for (std::size_t i = 0; i < longest; ++i) {
      for (std::size_t s = 0; s < 2; ++s) {
        if (filled[s] == half || i >= sides[s].size() || taken[s][i]) continue;
        const auto [lo, hi] = sides[s][i];
        if (uses[lo] >= cap || uses[hi] >= cap) continue;
        taken[s][i] = true;
        ++uses[lo];
        ++uses[hi];
        ++filled[s];
        out.push_back(sides[s][i]);
      }
    }
  }
  return out;
}

}  // namespace

std::vector<AuditPair> build_audit_pairs(const Dataset& ds, std::span<const std::string> pool_ids, GroupAttr attr,
                                         const std::string& group_x_in, const std::string& group_y_in,
                                         std::size_t n_pairs, std::uint64_t seed) {
  const auto group_x = canonical_group(attr, group_x_in);
  const auto group_y = canonical_group(attr, group_y_in);
  if (group_x == group_y) fail(ErrorKind::Validation, "audit groups must differ");
  if (n_pairs == 0 || n_pairs % 2 != 0) fail(ErrorKind::Validation, "n_pairs must be positive and even");

  const auto& lo_label = std::min(group_x, group_y);
  const auto& hi_label = std::max(group_x, group_y);
  std::vector<std::size_t> lo_rows, hi_rows;
  for (const auto& id : pool_ids) {
    const auto row = ds.index_of(id);
    const auto label = group_label(ds.record(row), attr);
    if (label == lo_label) lo_rows.push_back(row);
    else if (label == hi_label) hi_rows.push_back(row);
  }
  std::sort(hi_rows.begin(), hi_rows.end(), [&](std::size_t a, std::size_t b) {
    const double ba = ds.record(a).bmi, bb = ds.record(b).bmi;
    return ba < bb || (ba == bb && a < b);
  });

  // Split by which side is truly higher.
  std::vector<Match> lo_higher, hi_higher;
  for (auto lo : lo_rows) {
    const auto& rl = ds.record(lo);
    auto it = std::lower_bound(hi_rows.begin(), hi_rows.end(), rl.bmi - 1.0,
                               [&](std::size_t r, double v) { return ds.record(r).bmi < v; });
    for (; it != hi_rows.end(); ++it) {
      const auto& rh = ds.record(*it);
      const double diff = rl.bmi - rh.bmi;
      if (rh.bmi >= rl.bmi + 1.0) break;
      if (!(std::fabs(diff) < 1.0) || diff == 0.0 || rl.person_id == rh.person_id) continue;
      (diff > 0.0 ? lo_higher : hi_higher).emplace_back(lo, *it);
    }
  }

  const std::size_t half = n_pairs / 2;
  if (lo_higher.size() < half || hi_higher.size() < half) {
    const auto achievable = 2 * std::min(lo_higher.size(), hi_higher.size());
    std::ostringstream msg;
    msg << "only " << achievable << " balanced " << group_x << "/" << group_y << " audit pairs available, "
        << n_pairs << " requested";
    throw CapacityError(msg.str(), achievable);
  }

  SplitMix64 rng(seed);
  auto chosen = pick_matches({std::move(lo_higher), std::move(hi_higher)}, half, rng);
  rng.shuffle(chosen);

  const bool x_is_lo = group_x == lo_label;
  std::vector<AuditPair> pairs;
  pairs.reserve(chosen.size());
  for (const auto& [lo, hi] : chosen) {
    AuditPair p;
    const auto a = x_is_lo ? lo : hi;
    const auto b = x_is_lo ? hi : lo;
    p.id_a = ds.record(a).record_id;
    p.id_b = ds.record(b).record_id;
    p.group_a = group_x;
    p.group_b = group_y;
    p.true_higher = ds.record(a).bmi > ds.record(b).bmi ? Higher::A : Higher::B;
    pairs.push_back(std::move(p));
  }
  return pairs;
}

AuditReport run_audit(const Dataset& ds, std::span<const AuditPair> pairs, const Predictor& predictor) {
  if (pairs.empty()) fail(ErrorKind::Validation, "no audit pairs");
  AuditReport report;
  report.group_x = pairs.front().group_a;
  report.group_y = pairs.front().group_b;
  const auto& lo_label = std::min(report.group_x, report.group_y);
  for (const auto& p : pairs) {
    const double pa = predictor(ds.index_of(p.id_a));
    const double pb = predictor(ds.index_of(p.id_b));
    std::string winner;
    if (pa > pb) {
      winner = p.group_a;
    } else if (pb > pa) {
      winner = p.group_b;
    } else {
      const bool to_lo = report.ties % 2 == 0;
      const bool a_is_lo = p.group_a == lo_label;
      winner = (to_lo == a_is_lo) ? p.group_a : p.group_b;
      ++report.ties;
    }
    if (winner == report.group_x) ++report.higher_x;
    else if (winner == report.group_y) ++report.higher_y;
    else fail(ErrorKind::Validation, "audit pair group '" + winner + "' is not one of the audited groups");
  }
  report.n_pairs = pairs.size();
  report.test = binomial_test(report.higher_x, report.n_pairs, 0.5);
  return report;
}

std::string audit_report_to_json(const AuditReport& r) {
  nlohmann::ordered_json j;
  j["groups"] = {r.group_x, r.group_y};
  j["n"] = r.n_pairs;
  j["counts"] = {{r.group_x, r.higher_x}, {r.group_y, r.higher_y}};
  j["ties"] = r.ties;
  j["tie_rule"] = "alternate, lexicographically smaller group first";
  j["p_one_sided"] = r.test.p_one_sided;
  j["p_two_sided"] = r.test.p_two_sided;
  j["pool"] = r.pool;
  j["seed"] = r.seed;
  return j.dump(2) + "\n";
}

std::string audit_summary(const AuditReport& r) {
  std::ostringstream out;
  out << "higher predicted BMI for " << r.group_x << " in " << r.higher_x << " of " << r.n_pairs
      << " pairs (" << r.group_y << ": " << r.higher_y << ", ties " << r.ties << "); "
      << "P(X >= " << r.higher_x << ") = " << r.test.p_one_sided << ", two-sided p = " << r.test.p_two_sided
      << " [pool " << r.pool << ", seed " << r.seed << "]";
  return out.str();
}

}  // namespace f2b
