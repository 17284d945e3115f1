#include "core/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "core/csv.hpp"
#include "core/error.hpp"
#include "core/rng.hpp"

namespace f2b {

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) fail(ErrorKind::Validation, "pearson: length mismatch");
  if (xs.size() < 2) fail(ErrorKind::Validation, "pearson: need at least 2 points");
  const auto [xmin, xmax] = std::minmax_element(xs.begin(), xs.end());
  const auto [ymin, ymax] = std::minmax_element(ys.begin(), ys.end());
  if (*xmin == *xmax || *ymin == *ymax)
    fail(ErrorKind::UndefinedCorrelation, "pearson: zero variance");

  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double dx = xs[k] - mx;
    const double dy = ys[k] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

Predictor model_predictor(const SvrModel& model, const Dataset& ds) {
  if (model.normalize != ds.normalized())
    fail(ErrorKind::Validation, std::string("model expects ") + (model.normalize ? "normalized" : "raw") +
                                    " features but the dataset is " + (ds.normalized() ? "normalized" : "raw"));
  if (model.dim != ds.dim()) fail(ErrorKind::Validation, "model dim does not match dataset dim");
  return [&model, &ds](std::size_t row) { return predict(model, ds.row(row)); };
}

Predictor truth_predictor(const Dataset& ds) {
  return [&ds](std::size_t row) { return ds.record(row).bmi; };
}

RegressionReport evaluate_predictions(const Dataset& ds, std::span<const std::string> test_ids,
                                      const Predictor& predictor) {
  std::vector<double> truth, pred;
  std::array<std::vector<double>, 2> g_truth, g_pred;
  for (const auto& id : test_ids) {
    const auto row = ds.index_of(id);
    const double p = predictor(row);
    const auto& rec = ds.record(row);
    truth.push_back(rec.bmi);
    pred.push_back(p);
    const auto g = rec.gender == Gender::Male ? 0 : 1;
    g_truth[g].push_back(rec.bmi);
    g_pred[g].push_back(p);
  }
  RegressionReport report;
  report.n_test = truth.size();
  report.n_male = g_truth[0].size();
  report.n_female = g_truth[1].size();
  report.overall = pearson(pred, truth);
  if (report.n_male >= 2) report.male = pearson(g_pred[0], g_truth[0]);
  if (report.n_female >= 2) report.female = pearson(g_pred[1], g_truth[1]);
  return report;
}

RegressionReport evaluate_regression(const SvrModel& model, const Dataset& ds, const SplitPlan& plan) {
  const std::unordered_set<std::string> test(plan.test_ids.begin(), plan.test_ids.end());
  for (const auto& sv : model.support)
    if (test.count(sv.record_id))
      fail(ErrorKind::Validation, "model was trained on test record " + sv.record_id);
  return evaluate_predictions(ds, plan.test_ids, model_predictor(model, ds));
}

const char* to_string(GenderCategory c) noexcept {
  switch (c) {
    case GenderCategory::MaleMale: return "male-male";
    case GenderCategory::FemaleFemale: return "female-female";
    case GenderCategory::FemaleMale: return "female-male";
  }
  return "?";
}

std::optional<std::size_t> bucket_of(double abs_diff) {
  if (!(abs_diff > 0.5)) return std::nullopt;
  // Candidate from the floor, then fixed up against the literal inequality.
  auto i = static_cast<long long>(std::ceil(abs_diff - 1.5));
  if (i < 0) i = 0;
  while (i > 0 && !(0.5 + static_cast<double>(i) < abs_diff)) --i;
  while (!(abs_diff <= 1.5 + static_cast<double>(i))) ++i;
  if (!(0.5 + static_cast<double>(i) < abs_diff)) return std::nullopt;
  if (i >= static_cast<long long>(kBuckets)) return std::nullopt;
  return static_cast<std::size_t>(i);
}

void PairReport::add(GenderCategory category, std::size_t bucket, bool correct) {
  const auto c = static_cast<std::size_t>(category);
  for (CellTally* t : {&overall, &by_category[c], &cells[c][bucket], &by_bucket[bucket]}) {
    ++t->total;
    if (correct) ++t->correct;
  }
}

namespace {

struct Candidate {
  std::uint32_t a;  // female member for FemaleMale
  std::uint32_t b;
  double midpoint;
};

// Weighted sampling without replacement (Efraimidis-Spirakis keys), weights
// inverse to the population of each candidate's midpoint-BMI decile.
std::vector<Candidate> sample_cell(const std::vector<Candidate>& pool, std::size_t k, SplitMix64& rng) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& c : pool) {
    lo = std::min(lo, c.midpoint);
    hi = std::max(hi, c.midpoint);
  }
  auto decile = [&](double m) -> std::size_t {
    if (!(hi > lo)) return 0;
    return std::min<std::size_t>(9, static_cast<std::size_t>(10.0 * (m - lo) / (hi - lo)));
  };
  std::array<std::size_t, 10> counts{};
  for (const auto& c : pool) ++counts[decile(c.midpoint)];

  std::vector<std::pair<double, std::size_t>> keys;
  keys.reserve(pool.size());
  for (std::size_t idx = 0; idx < pool.size(); ++idx) {
    double u = rng.uniform();
    while (u <= 0.0) u = rng.uniform();
    const double weight = 1.0 / static_cast<double>(counts[decile(pool[idx].midpoint)]);
    keys.emplace_back(std::log(u) / weight, idx);
  }
  std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(k), keys.end(),
                    [](const auto& x, const auto& y) { return x.first > y.first || (x.first == y.first && x.second < y.second); });
  std::vector<Candidate> out;
  out.reserve(k);
  for (std::size_t t = 0; t < k; ++t) out.push_back(pool[keys[t].second]);
  return out;
}

}  // namespace

std::vector<ComparisonPair> generate_pairs(const Dataset& ds, std::span<const std::string> test_ids,
                                           std::size_t per_category, std::uint64_t seed) {
  if (per_category == 0 || per_category % kBuckets != 0)
    fail(ErrorKind::Validation, "per_category must be a positive multiple of 15");
  const std::size_t per_bucket = per_category / kBuckets;
  if (per_bucket % 2 != 0)
    fail(ErrorKind::Validation, "per-bucket count must be even to balance female-male cells");

  std::vector<std::size_t> rows;
  rows.reserve(test_ids.size());
  for (const auto& id : test_ids) rows.push_back(ds.index_of(id));

  // [category][bucket][0] for MM/FF; FemaleMale uses [0] male-higher, [1] female-higher.
  std::array<std::array<std::array<std::vector<Candidate>, 2>, kBuckets>, kCategories> cells;
  for (std::size_t x = 0; x < rows.size(); ++x) {
    for (std::size_t y = x + 1; y < rows.size(); ++y) {
      const auto& ra = ds.record(rows[x]);
      const auto& rb = ds.record(rows[y]);
      if (ra.person_id == rb.person_id) continue;
      const auto bucket = bucket_of(std::fabs(ra.bmi - rb.bmi));
      if (!bucket) continue;
      const double mid = 0.5 * (ra.bmi + rb.bmi);
      const auto ia = static_cast<std::uint32_t>(rows[x]);
      const auto ib = static_cast<std::uint32_t>(rows[y]);
      if (ra.gender == rb.gender) {
        const auto cat = ra.gender == Gender::Male ? GenderCategory::MaleMale : GenderCategory::FemaleFemale;
        cells[static_cast<std::size_t>(cat)][*bucket][0].push_back({ia, ib, mid});
      } else {
        const bool a_female = ra.gender == Gender::Female;
        const auto female = a_female ? ia : ib;
        const auto male = a_female ? ib : ia;
        const bool male_higher = ds.record(male).bmi > ds.record(female).bmi;
        cells[2][*bucket][male_higher ? 0 : 1].push_back({female, male, mid});
      }
    }
  }

  SplitMix64 rng(seed);
  std::vector<ComparisonPair> pairs;
  pairs.reserve(per_category * kCategories);
  for (std::size_t c = 0; c < kCategories; ++c) {
    const auto category = static_cast<GenderCategory>(c);
    for (std::size_t b = 0; b < kBuckets; ++b) {
      const std::size_t parts = category == GenderCategory::FemaleMale ? 2 : 1;
      for (std::size_t part = 0; part < parts; ++part) {
        const auto& pool = cells[c][b][part];
        const std::size_t need = per_bucket / parts;
        if (pool.size() < need) {
          std::ostringstream msg;
          msg << "cell " << to_string(category) << " bucket " << b;
          if (parts == 2) msg << (part == 0 ? " (male higher)" : " (female higher)");
          msg << " needs " << need << " pairs, only " << pool.size() << " available";
          throw CapacityError(msg.str(), pool.size());
        }
        for (const auto& cand : sample_cell(pool, need, rng)) {
          ComparisonPair p;
          auto a = cand.a, bb = cand.b;
          if (category != GenderCategory::FemaleMale && rng.coin()) std::swap(a, bb);
          p.id_a = ds.record(a).record_id;
          p.id_b = ds.record(bb).record_id;
          p.category = category;
          p.bucket = b;
          p.truth = ds.record(a).bmi > ds.record(bb).bmi ? Truth::AIsHigher : Truth::BIsHigher;
          pairs.push_back(std::move(p));
        }
      }
    }
  }
  return pairs;
}

PairReport answer_pairs(const Dataset& ds, std::span<const ComparisonPair> pairs, const Predictor& predictor) {
  PairReport report;
  for (const auto& p : pairs) {
    const double pa = predictor(ds.index_of(p.id_a));
    const double pb = predictor(ds.index_of(p.id_b));
    const bool correct = p.truth == Truth::AIsHigher ? pa > pb : pb > pa;
    report.add(p.category, p.bucket, correct);
  }
  return report;
}

std::filesystem::path answer_key_path(const std::filesystem::path& questionnaire) {
  auto key = questionnaire;
  key.replace_filename(questionnaire.stem().string() + "_key" + questionnaire.extension().string());
  return key;
}

void export_questionnaire(std::span<const ComparisonPair> pairs, const std::filesystem::path& path,
                          std::uint64_t seed) {
  std::ofstream q(path, std::ios::binary);
  const auto key_path = answer_key_path(path);
  std::ofstream key(key_path, std::ios::binary);
  if (!q) fail(ErrorKind::Io, "cannot write " + path.string());
  if (!key) fail(ErrorKind::Io, "cannot write " + key_path.string());
  q << "pair_id,image_a,image_b\n";
  key << "pair_id,image_a,image_b,answer,category,bucket\n";
  SplitMix64 rng(seed);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& p = pairs[k];
    const bool flip = rng.coin();
    const auto& left = flip ? p.id_b : p.id_a;
    const auto& right = flip ? p.id_a : p.id_b;
    const bool left_higher = (p.truth == Truth::AIsHigher) != flip;
    q << k << ',' << left << ',' << right << '\n';
    key << k << ',' << left << ',' << right << ',' << (left_higher ? 'a' : 'b') << ',' << to_string(p.category)
        << ',' << p.bucket << '\n';
  }
  if (!q || !key) fail(ErrorKind::Io, "questionnaire write failed");
}

namespace {

std::vector<std::vector<std::string>> read_table(const std::filesystem::path& path,
                                                 std::vector<std::string>& header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    const auto t = csv::trim(line);
    if (t.empty()) continue;
    std::vector<std::string> fields;
    for (auto f : csv::split(t)) fields.emplace_back(csv::trim(f));
    if (first) {
      header = std::move(fields);
      first = false;
    } else {
      if (fields.size() != header.size())
        fail(ErrorKind::Parse, path.string() + ": row " + std::to_string(rows.size() + 2) + " has wrong field count");
      rows.push_back(std::move(fields));
    }
  }
  if (first) fail(ErrorKind::Parse, path.string() + ": missing header");
  return rows;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name,
                   const std::filesystem::path& path) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) fail(ErrorKind::Parse, path.string() + ": no '" + name + "' column");
  return static_cast<std::size_t>(it - header.begin());
}

GenderCategory parse_category(const std::string& s) {
  for (std::size_t c = 0; c < kCategories; ++c)
    if (s == to_string(static_cast<GenderCategory>(c))) return static_cast<GenderCategory>(c);
  fail(ErrorKind::Parse, "unknown gender category '" + s + "'");
}

}  // namespace

PairReport score_human_answers(const std::filesystem::path& key_path, const std::filesystem::path& answers_path) {
  struct KeyRow {
    char answer;
    GenderCategory category;
    std::size_t bucket;
  };
  std::vector<std::string> key_header, ans_header;
  const auto key_rows = read_table(key_path, key_header);
  std::map<std::string, KeyRow> key;
  const auto kc_id = column(key_header, "pair_id", key_path);
  const auto kc_ans = column(key_header, "answer", key_path);
  const auto kc_cat = column(key_header, "category", key_path);
  const auto kc_bucket = column(key_header, "bucket", key_path);
  for (const auto& r : key_rows) {
    const auto bucket = std::stoul(r[kc_bucket]);
    if (bucket >= kBuckets) fail(ErrorKind::Parse, "bucket out of range in answer key");
    key[r[kc_id]] = {r[kc_ans].empty() ? '?' : r[kc_ans][0], parse_category(r[kc_cat]), bucket};
  }

  const auto answers = read_table(answers_path, ans_header);
  const auto ac_id = column(ans_header, "pair_id", answers_path);
  const auto ac_ans = column(ans_header, "answer", answers_path);
  PairReport report;
  for (const auto& r : answers) {
    const auto it = key.find(r[ac_id]);
    if (it == key.end()) fail(ErrorKind::Validation, "answer for unknown pair " + r[ac_id]);
    const auto& a = r[ac_ans];
    if (a != "a" && a != "b") fail(ErrorKind::Parse, "answer must be a or b, got '" + a + "'");
    report.add(it->second.category, it->second.bucket, a[0] == it->second.answer);
  }
  return report;
}

namespace {

nlohmann::ordered_json tally_json(const CellTally& t) {
  nlohmann::ordered_json j;
  j["correct"] = t.correct;
  j["total"] = t.total;
  j["accuracy"] = t.total ? nlohmann::ordered_json(t.accuracy()) : nlohmann::ordered_json(nullptr);
  return j;
}

nlohmann::ordered_json pair_report_json(const PairReport& r) {
  nlohmann::ordered_json j;
  j["pair_accuracy_overall"] = tally_json(r.overall);
  auto cats = nlohmann::ordered_json::object();
  for (std::size_t c = 0; c < kCategories; ++c) {
    nlohmann::ordered_json cat;
    cat["all"] = tally_json(r.by_category[c]);
    auto buckets = nlohmann::ordered_json::array();
    for (std::size_t b = 0; b < kBuckets; ++b) buckets.push_back(tally_json(r.cells[c][b]));
    cat["buckets"] = std::move(buckets);
    cats[to_string(static_cast<GenderCategory>(c))] = std::move(cat);
  }
  j["by_category"] = std::move(cats);
  auto buckets = nlohmann::ordered_json::array();
  for (std::size_t b = 0; b < kBuckets; ++b) buckets.push_back(tally_json(r.by_bucket[b]));
  j["by_bucket"] = std::move(buckets);
  return j;
}

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

std::string eval_report_to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  if (report.regression) {
    const auto& r = *report.regression;
    j["n_test"] = r.n_test;
    j["n_male"] = r.n_male;
    j["n_female"] = r.n_female;
    j["pearson_overall"] = r.overall;
    j["pearson_male"] = optional_json(r.male);
    j["pearson_female"] = optional_json(r.female);
  }
  if (report.machine) j["machine"] = pair_report_json(*report.machine);
  if (report.human) j["human"] = pair_report_json(*report.human);
  return j.dump(2) + "\n";
}

std::string pairs_to_json(std::span<const ComparisonPair> pairs) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& p : pairs) {
    nlohmann::ordered_json j;
    j["id_a"] = p.id_a;
    j["id_b"] = p.id_b;
    j["category"] = to_string(p.category);
    j["bucket"] = p.bucket;
    j["truth"] = p.truth == Truth::AIsHigher ? "a" : "b";
    arr.push_back(std::move(j));
  }
  return arr.dump(1) + "\n";
}

}  // namespace f2b
