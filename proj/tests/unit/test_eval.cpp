#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "core/error.hpp"
#include "core/eval.hpp"
#include "core/rng.hpp"
#include "core/split.hpp"
#include "support/fixtures.hpp"

using namespace f2b;

namespace {

// Textbook two-pass formula in long double, for comparison.
double pearson_ref(const std::vector<double>& x, const std::vector<double>& y) {
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= x.size();
  my /= y.size();
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  return lines;
}

}  // namespace

TEST_CASE("pearson examples") {
  CHECK(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 6}) == doctest::Approx(1.0));
  CHECK(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{6, 4, 2}) == doctest::Approx(-1.0));
  // cov = 1.25, var = 1.25 each side: 1 / 1.25 = 0.8
  CHECK(pearson(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 3, 2, 4}) ==
        doctest::Approx(0.8).epsilon(1e-14));
}

TEST_CASE("pearson errors") {
  try {
    pearson(std::vector<double>{1, 2, 3}, std::vector<double>{5, 5, 5});
    FAIL("constant accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UndefinedCorrelation);
  }
  CHECK_THROWS_AS(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}), Error);
  CHECK_THROWS_AS(pearson(std::vector<double>{1}, std::vector<double>{1}), Error);
}

TEST_CASE("pearson properties") {
  SplitMix64 rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    const auto n = 2 + rng.below(60);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rng.normal() * 10 + 30;
      y[i] = 0.5 * x[i] + rng.normal() * 5;
    }
    const double r = pearson(x, y);
    CHECK(r >= -1.0);
    CHECK(r <= 1.0);
    CHECK(r == doctest::Approx(pearson_ref(x, y)).epsilon(1e-10));
    CHECK(pearson(y, x) == doctest::Approx(r).epsilon(1e-12));
    std::vector<double> scaled(n), flipped(n);
    const double a = 0.1 + rng.uniform() * 5;
    for (std::size_t i = 0; i < n; ++i) {
      scaled[i] = a * x[i] + 7.0;
      flipped[i] = -x[i];
    }
    CHECK(pearson(scaled, y) == doctest::Approx(r).epsilon(1e-9));
    CHECK(pearson(flipped, y) == doctest::Approx(-r).epsilon(1e-9));
  }
}

TEST_CASE("bucket boundaries") {
  CHECK(bucket_of(1.2) == std::optional<std::size_t>(0));
  CHECK(!bucket_of(0.5));
  CHECK(!bucket_of(0.0));
  CHECK(bucket_of(std::nextafter(0.5, 1.0)) == std::optional<std::size_t>(0));
  CHECK(bucket_of(1.5) == std::optional<std::size_t>(0));
  CHECK(bucket_of(std::nextafter(1.5, 2.0)) == std::optional<std::size_t>(1));
  CHECK(bucket_of(15.5) == std::optional<std::size_t>(14));
  CHECK(!bucket_of(std::nextafter(15.5, 16.0)));
  SplitMix64 rng(4);
  for (int k = 0; k < 100000; ++k) {
    const double d = 16.0 * rng.uniform();
    const auto b = bucket_of(d);
    if (b) {
      CHECK(0.5 + double(*b) < d);
      CHECK(d <= 1.5 + double(*b));
    } else {
      CHECK((d <= 0.5 || d > 15.5));
    }
  }
}

TEST_CASE("regression report on a synthetic split") {
  const auto ds = fixtures::synthetic_dataset(200, 21);
  const auto plan = split_across_people(ds, 0.2, 5);
  SvrHyperParams hp;
  const auto model = train(ds, plan.train_ids, KernelSpec::linear(), hp);
  const auto rep = evaluate_regression(model, ds, plan);
  CHECK(rep.n_test == plan.test_ids.size());
  CHECK(rep.n_male + rep.n_female == rep.n_test);
  CHECK(rep.overall >= 0.95);
  REQUIRE(rep.male.has_value());
  REQUIRE(rep.female.has_value());

  // A model that saw test records is refused.
  const auto leaky = train(ds, plan.test_ids, KernelSpec::linear(), hp);
  CHECK_THROWS_AS(evaluate_regression(leaky, ds, plan), Error);

  // Constant predictions have no correlation.
  try {
    evaluate_predictions(ds, plan.test_ids, [](std::size_t) { return 27.0; });
    FAIL("constant accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UndefinedCorrelation);
  }
}

TEST_CASE("gender subset with fewer than two members is unavailable") {
  const auto ds = fixtures::synthetic_dataset(40, 22);
  std::vector<std::string> ids;
  bool have_female = false;
  for (const auto& r : ds.records()) {
    if (r.gender == Gender::Male) ids.push_back(r.record_id);
    else if (!have_female) {
      ids.push_back(r.record_id);
      have_female = true;
    }
  }
  const auto rep = evaluate_predictions(ds, ids, truth_predictor(ds));
  CHECK(rep.n_female == 1);
  CHECK(!rep.female.has_value());
  CHECK(rep.male.has_value());
  CHECK(rep.overall == doctest::Approx(1.0));
}

TEST_CASE("pair generation constraints") {
  const auto ds = fixtures::synthetic_dataset(400, 23);
  const auto ids = ds.record_ids();
  const auto pairs = generate_pairs(ds, ids, 300, 1);
  REQUIRE(pairs.size() == 900);

  std::array<std::array<int, kBuckets>, kCategories> cells{};
  std::array<int, 2> fm_sides{};
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& p : pairs) {
    const auto& a = ds.record(ds.index_of(p.id_a));
    const auto& b = ds.record(ds.index_of(p.id_b));
    const double d = std::fabs(a.bmi - b.bmi);
    CHECK(0.5 + double(p.bucket) < d);
    CHECK(d <= 1.5 + double(p.bucket));
    CHECK(a.person_id != b.person_id);
    CHECK((p.truth == Truth::AIsHigher) == (a.bmi > b.bmi));
    switch (p.category) {
      case GenderCategory::MaleMale: CHECK((a.gender == Gender::Male && b.gender == Gender::Male)); break;
      case GenderCategory::FemaleFemale: CHECK((a.gender == Gender::Female && b.gender == Gender::Female)); break;
      case GenderCategory::FemaleMale:
        CHECK(a.gender != b.gender);
        ++fm_sides[(a.gender == Gender::Male) == (a.bmi > b.bmi) ? 0 : 1];
        break;
    }
    ++cells[static_cast<std::size_t>(p.category)][p.bucket];
    const auto key = std::minmax(p.id_a, p.id_b);
    CHECK(seen.insert(key).second);
  }
  for (const auto& row : cells)
    for (int count : row) CHECK(count == 20);
  CHECK(fm_sides[0] == fm_sides[1]);

  CHECK(pairs_to_json(generate_pairs(ds, ids, 300, 1)) == pairs_to_json(pairs));
  CHECK(pairs_to_json(generate_pairs(ds, ids, 300, 2)) != pairs_to_json(pairs));
}

TEST_CASE("pair generation rejects bad sizes and short pools") {
  const auto ds = fixtures::synthetic_dataset(200, 24);
  const auto ids = ds.record_ids();
  CHECK_THROWS_AS(generate_pairs(ds, ids, 0, 1), Error);
  CHECK_THROWS_AS(generate_pairs(ds, ids, 100, 1), Error);
  CHECK_THROWS_AS(generate_pairs(ds, ids, 15, 1), Error);

  std::vector<std::string> few_females;
  std::size_t females = 0;
  for (const auto& r : ds.records()) {
    if (r.gender == Gender::Male) few_females.push_back(r.record_id);
    else if (females < 5) {
      few_females.push_back(r.record_id);
      ++females;
    }
  }
  try {
    generate_pairs(ds, few_females, 300, 1);
    FAIL("expected capacity error");
  } catch (const CapacityError& e) {
    CHECK(e.kind() == ErrorKind::Capacity);
    CHECK(std::string(e.what()).find("female") != std::string::npos);
  }
}

TEST_CASE("machine answering: oracle and constant predictors") {
  const auto ds = fixtures::synthetic_dataset(400, 25);
  const auto pairs = generate_pairs(ds, ds.record_ids(), 300, 3);
  const auto oracle = answer_pairs(ds, pairs, truth_predictor(ds));
  CHECK(oracle.overall.total == 900);
  CHECK(oracle.overall.accuracy() == 1.0);
  for (const auto& cat : oracle.cells)
    for (const auto& cell : cat) CHECK(cell.accuracy() == 1.0);

  const auto flat = answer_pairs(ds, pairs, [](std::size_t) { return 25.0; });
  CHECK(flat.overall.total == 900);
  CHECK(flat.overall.correct == 0);

  std::size_t sum = 0;
  for (const auto& t : oracle.by_bucket) sum += t.total;
  CHECK(sum == 900);
}

TEST_CASE("trained model: accuracy grows with the bucket on aggregate") {
  // Three blocks of five buckets, pooled over several pair draws and splits.
  std::array<CellTally, 3> blocks{};
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto ds = fixtures::synthetic_dataset(600, 100 + seed, 16, 2.0);
    const auto plan = split_across_people(ds, 0.5, seed);
    SvrHyperParams hp;
    const auto model = train(ds, plan.train_ids, KernelSpec::linear(), hp);
    const auto pairs = generate_pairs(ds, plan.test_ids, 300, seed);
    const auto rep = answer_pairs(ds, pairs, model_predictor(model, ds));
    for (std::size_t b = 0; b < kBuckets; ++b) {
      blocks[b / 5].correct += rep.by_bucket[b].correct;
      blocks[b / 5].total += rep.by_bucket[b].total;
    }
  }
  MESSAGE("block accuracy " << blocks[0].accuracy() << " " << blocks[1].accuracy() << " " << blocks[2].accuracy());
  CHECK(blocks[0].accuracy() <= blocks[1].accuracy());
  CHECK(blocks[1].accuracy() <= blocks[2].accuracy());
}

TEST_CASE("questionnaire export and human scoring") {
  fixtures::TempDir dir("quest");
  const auto ds = fixtures::synthetic_dataset(400, 26);
  const auto pairs = generate_pairs(ds, ds.record_ids(), 300, 4);
  export_questionnaire(pairs, dir / "q.csv", 9);
  const auto key_path = answer_key_path(dir / "q.csv");
  CHECK(key_path == dir / "q_key.csv");
  const auto q = read_lines(dir / "q.csv");
  const auto key = read_lines(key_path);
  CHECK(q.size() == 901);
  CHECK(key.size() == 901);
  CHECK(q[0] == "pair_id,image_a,image_b");

  export_questionnaire(pairs, dir / "q2.csv", 9);
  CHECK(read_lines(dir / "q2.csv") == q);
  CHECK(read_lines(answer_key_path(dir / "q2.csv")) == key);
  export_questionnaire(pairs, dir / "q3.csv", 10);
  CHECK(read_lines(dir / "q3.csv") != q);

  // Truth is not in the questionnaire, and every row keeps its pair members.
  std::size_t flips = 0;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    std::istringstream row(q[k + 1]);
    std::string id, left, right;
    std::getline(row, id, ',');
    std::getline(row, left, ',');
    std::getline(row, right, ',');
    CHECK(id == std::to_string(k));
    CHECK(std::set<std::string>{left, right} == std::set<std::string>{pairs[k].id_a, pairs[k].id_b});
    flips += left == pairs[k].id_b;
  }
  CHECK(flips > 300);
  CHECK(flips < 600);

  // A respondent copying the key scores 1.0; one answering "a" everywhere
  // scores exactly the share of left-higher rows.
  {
    std::ofstream perfect(dir / "perfect.csv"), all_a(dir / "all_a.csv");
    perfect << "pair_id,answer\n";
    all_a << "respondent,pair_id,answer\n";
    std::size_t left_higher = 0;
    for (std::size_t k = 1; k < key.size(); ++k) {
      const auto comma = key[k].find(',');
      const auto id = key[k].substr(0, comma);
      std::istringstream row(key[k]);
      std::string f[4];
      for (auto& s : f) std::getline(row, s, ',');
      perfect << id << ',' << f[3] << '\n';
      all_a << "r1," << id << ",a\n";
      left_higher += f[3] == "a";
    }
    perfect.close();
    all_a.close();
    const auto p = score_human_answers(key_path, dir / "perfect.csv");
    CHECK(p.overall.total == 900);
    CHECK(p.overall.correct == 900);
    const auto a = score_human_answers(key_path, dir / "all_a.csv");
    CHECK(a.overall.correct == left_higher);
    for (const auto& cat : p.by_category) CHECK(cat.total == 300);
  }

  {
    std::ofstream bad(dir / "bad.csv");
    bad << "pair_id,answer\n0,c\n";
  }
  CHECK_THROWS_AS(score_human_answers(key_path, dir / "bad.csv"), Error);
  {
    std::ofstream unknown(dir / "unknown.csv");
    unknown << "pair_id,answer\n12345,a\n";
  }
  CHECK_THROWS_AS(score_human_answers(key_path, dir / "unknown.csv"), Error);
}

TEST_CASE("report json shape") {
  EvalReport r;
  RegressionReport reg;
  reg.n_test = 3;
  reg.overall = 0.5;
  reg.male = 0.25;
  r.regression = reg;
  const auto text = eval_report_to_json(r);
  CHECK(text.find("\"pearson_overall\"") != std::string::npos);
  CHECK(text.find("\"pearson_female\": null") != std::string::npos);
}
