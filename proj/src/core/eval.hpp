#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/ingest.hpp"
#include "core/split.hpp"
#include "core/svr.hpp"

namespace f2b {

// Standard product-moment correlation. Throws UndefinedCorrelation when either
// side is constant and Validation on length mismatch or fewer than 2 points.
double pearson(std::span<const double> xs, std::span<const double> ys);

// Predicted BMI for a dataset row.
using Predictor = std::function<double(std::size_t row)>;

// Wraps a model; rejects datasets whose normalization differs from training.
Predictor model_predictor(const SvrModel& model, const Dataset& ds);

// Perfect predictor returning the recorded BMI.
Predictor truth_predictor(const Dataset& ds);

struct RegressionReport {
  std::size_t n_test = 0;
  std::size_t n_male = 0;
  std::size_t n_female = 0;
  double overall = 0.0;
  // Unavailable when the test side has fewer than 2 records of that gender.
  std::optional<double> male;
  std::optional<double> female;
};

RegressionReport evaluate_predictions(const Dataset& ds, std::span<const std::string> test_ids,
                                      const Predictor& predictor);

// Also rejects models whose support vectors include test records.
RegressionReport evaluate_regression(const SvrModel& model, const Dataset& ds, const SplitPlan& plan);

enum class GenderCategory { MaleMale = 0, FemaleFemale = 1, FemaleMale = 2 };
inline constexpr std::size_t kCategories = 3;
inline constexpr std::size_t kBuckets = 15;

const char* to_string(GenderCategory c) noexcept;

// Stratum i with (0.5 + i) < d <= (1.5 + i), for d = |BMI_a - BMI_b|; empty
// when d <= 0.5 or d > 15.5.
std::optional<std::size_t> bucket_of(double abs_diff);

enum class Truth { AIsHigher, BIsHigher };

struct ComparisonPair {
  std::string id_a;  // the female member for FemaleMale pairs
  std::string id_b;
  GenderCategory category = GenderCategory::MaleMale;
  std::size_t bucket = 0;
  Truth truth = Truth::AIsHigher;
};

// per_category pairs per gender category, per_category / 15 per bucket, drawn
// without replacement from distinct-person pairs of the test pool. FemaleMale
// cells hold equally many male-higher and female-higher pairs. Within a cell,
// pairs are weighted inversely to how crowded their midpoint-BMI decile is, a
// heuristic that spreads pairs over the BMI range.
std::vector<ComparisonPair> generate_pairs(const Dataset& ds, std::span<const std::string> test_ids,
                                           std::size_t per_category, std::uint64_t seed);

struct CellTally {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

struct PairReport {
  CellTally overall;
  std::array<CellTally, kCategories> by_category{};
  std::array<std::array<CellTally, kBuckets>, kCategories> cells{};
  std::array<CellTally, kBuckets> by_bucket{};

  void add(GenderCategory category, std::size_t bucket, bool correct);
};

// The machine picks the pair member with the larger prediction; an exact tie
// is scored as incorrect.
PairReport answer_pairs(const Dataset& ds, std::span<const ComparisonPair> pairs, const Predictor& predictor);

// Writes `pair_id,image_a,image_b` with seeded left/right order and truth
// withheld, plus the answer key next to it (see answer_key_path).
void export_questionnaire(std::span<const ComparisonPair> pairs, const std::filesystem::path& path,
                          std::uint64_t seed);
std::filesystem::path answer_key_path(const std::filesystem::path& questionnaire);

// Scores completed human answers (CSV with `pair_id` and `answer` columns,
// answer in {a, b}) against an answer key. Every answer counts individually.
PairReport score_human_answers(const std::filesystem::path& key_path, const std::filesystem::path& answers_path);

struct EvalReport {
  std::optional<RegressionReport> regression;
  std::optional<PairReport> machine;
  std::optional<PairReport> human;
};

std::string eval_report_to_json(const EvalReport& report);
std::string pairs_to_json(std::span<const ComparisonPair> pairs);

}  // namespace f2b
