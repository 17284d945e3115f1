#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "core/ingest.hpp"

namespace f2b {

enum class SplitProtocol { AcrossPeople, WithinPerson };

const char* to_string(SplitProtocol p) noexcept;
SplitProtocol parse_protocol(std::string_view text);

// Train and test ids are kept in dataset row order.
struct SplitPlan {
  SplitProtocol protocol = SplitProtocol::AcrossPeople;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  std::uint64_t seed = 0;
};

// Whole persons move to the test side, in seeded shuffle order, until at
// least round(test_fraction * total) records are there.
SplitPlan split_across_people(const Dataset& ds, double test_fraction, std::uint64_t seed);

// Same procedure with the record quota given directly (e.g. 838).
SplitPlan split_across_people_count(const Dataset& ds, std::size_t test_records, std::uint64_t seed);

// n_test seeded persons each contribute one coin-flipped record to the test
// side; the sibling stays in training.
SplitPlan split_within_person(const Dataset& ds, std::size_t n_test, std::uint64_t seed);

// Returns an empty string when the plan honours every protocol invariant,
// otherwise a description of the first violation.
std::string check_split(const Dataset& ds, const SplitPlan& plan);

void save_split(const std::filesystem::path& path, const SplitPlan& plan);
SplitPlan load_split(const std::filesystem::path& path);
std::string split_to_csv(const SplitPlan& plan);
SplitPlan split_from_csv(std::string_view text);

// Distinct complete persons in first-appearance order, with their two rows
// (before, after).
struct PersonRows {
  std::string person_id;
  std::size_t before = 0;
  std::size_t after = 0;
};
std::vector<PersonRows> complete_persons(const Dataset& ds);

}  // namespace f2b
