#include "core/split.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "core/csv.hpp"
#include "core/error.hpp"
#include "core/rng.hpp"

namespace f2b {

const char* to_string(SplitProtocol p) noexcept {
  return p == SplitProtocol::AcrossPeople ? "across-people" : "within-person";
}

SplitProtocol parse_protocol(std::string_view text) {
  if (text == "across-people") return SplitProtocol::AcrossPeople;
  if (text == "within-person") return SplitProtocol::WithinPerson;
  fail(ErrorKind::Validation, "unknown split protocol '" + std::string(text) + "'");
}

std::vector<PersonRows> complete_persons(const Dataset& ds) {
  std::vector<PersonRows> persons;
  std::unordered_map<std::string, std::size_t> slot;
  std::vector<int> mask;
  for (std::size_t r = 0; r < ds.size(); ++r) {
    const auto& rec = ds.record(r);
    auto [it, inserted] = slot.emplace(rec.person_id, persons.size());
    if (inserted) {
      persons.push_back({rec.person_id, 0, 0});
      mask.push_back(0);
    }
    auto& p = persons[it->second];
    if (rec.role == Role::Before) p.before = r;
    else p.after = r;
    mask[it->second] |= rec.role == Role::Before ? 1 : 2;
  }
  std::vector<PersonRows> complete;
  for (std::size_t k = 0; k < persons.size(); ++k)
    if (mask[k] == 3) complete.push_back(persons[k]);
  return complete;
}

namespace {

SplitPlan assemble(const Dataset& ds, SplitProtocol protocol, std::uint64_t seed,
                   const std::vector<bool>& in_test) {
  SplitPlan plan;
  plan.protocol = protocol;
  plan.seed = seed;
  for (std::size_t r = 0; r < ds.size(); ++r)
    (in_test[r] ? plan.test_ids : plan.train_ids).push_back(ds.record(r).record_id);
  return plan;
}

std::vector<PersonRows> require_complete(const Dataset& ds) {
  if (ds.size() == 0) fail(ErrorKind::Validation, "cannot split an empty dataset");
  auto persons = complete_persons(ds);
  if (persons.size() * 2 != ds.size())
    fail(ErrorKind::Validation, "dataset contains records of incomplete persons");
  return persons;
}

}  // namespace

SplitPlan split_across_people_count(const Dataset& ds, std::size_t test_records, std::uint64_t seed) {
  auto persons = require_complete(ds);
  if (test_records == 0 || test_records >= ds.size())
    fail(ErrorKind::Validation, "test quota " + std::to_string(test_records) + " leaves one side empty (" +
                                    std::to_string(ds.size()) + " records)");
  SplitMix64 rng(seed);
  rng.shuffle(persons);
  std::vector<bool> in_test(ds.size(), false);
  std::size_t taken = 0;
  for (const auto& p : persons) {
    if (taken >= test_records) break;
    in_test[p.before] = in_test[p.after] = true;
    taken += 2;
  }
  if (taken >= ds.size()) fail(ErrorKind::Validation, "test quota leaves the training side empty");
  return assemble(ds, SplitProtocol::AcrossPeople, seed, in_test);
}

SplitPlan split_across_people(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    fail(ErrorKind::Validation, "test fraction must lie in (0, 1)");
  const auto quota = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(ds.size())));
  return split_across_people_count(ds, quota, seed);
}

SplitPlan split_within_person(const Dataset& ds, std::size_t n_test, std::uint64_t seed) {
  auto persons = require_complete(ds);
  if (n_test == 0) fail(ErrorKind::Validation, "n_test must be positive");
  if (n_test > persons.size())
    fail(ErrorKind::Validation, "n_test " + std::to_string(n_test) + " exceeds " +
                                    std::to_string(persons.size()) + " complete persons");
  SplitMix64 rng(seed);
  rng.shuffle(persons);
  std::vector<bool> in_test(ds.size(), false);
  for (std::size_t k = 0; k < n_test; ++k) {
    const auto& p = persons[k];
    in_test[rng.coin() ? p.before : p.after] = true;
  }
  return assemble(ds, SplitProtocol::WithinPerson, seed, in_test);
}

std::string check_split(const Dataset& ds, const SplitPlan& plan) {
  std::unordered_set<std::string> train(plan.train_ids.begin(), plan.train_ids.end());
  std::unordered_set<std::string> test(plan.test_ids.begin(), plan.test_ids.end());
  if (train.size() != plan.train_ids.size() || test.size() != plan.test_ids.size())
    return "duplicate id within one side";
  for (const auto& id : test)
    if (train.count(id)) return "record " + id + " on both sides";
  if (train.size() + test.size() != ds.size()) return "sides do not cover the dataset";
  for (const auto& r : ds.records())
    if (!train.count(r.record_id) && !test.count(r.record_id)) return "record " + r.record_id + " unassigned";

  std::unordered_map<std::string, int> train_persons;
  std::unordered_map<std::string, int> test_persons;
  for (const auto& id : plan.train_ids) ++train_persons[ds.record(ds.index_of(id)).person_id];
  for (const auto& id : plan.test_ids) ++test_persons[ds.record(ds.index_of(id)).person_id];

  if (plan.protocol == SplitProtocol::AcrossPeople) {
    for (const auto& [person, count] : test_persons)
      if (train_persons.count(person)) return "person " + person + " on both sides";
  } else {
    for (const auto& [person, count] : test_persons) {
      if (count > 1) return "person " + person + " has " + std::to_string(count) + " test records";
      if (!train_persons.count(person)) return "person " + person + " has no sibling in train";
    }
  }
  return {};
}

std::string split_to_csv(const SplitPlan& plan) {
  std::ostringstream out;
  out << "# protocol=" << to_string(plan.protocol) << " seed=" << plan.seed << '\n';
  out << "record_id,side\n";
  for (const auto& id : plan.train_ids) out << id << ",train\n";
  for (const auto& id : plan.test_ids) out << id << ",test\n";
  return out.str();
}

SplitPlan split_from_csv(std::string_view text) {
  SplitPlan plan;
  bool header = false;
  bool have_protocol = false;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = csv::trim(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::istringstream in{std::string(line.substr(1))};
      std::string token;
      while (in >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) continue;
        const auto key = token.substr(0, eq);
        const auto value = token.substr(eq + 1);
        if (key == "protocol") {
          plan.protocol = parse_protocol(value);
          have_protocol = true;
        } else if (key == "seed") {
          plan.seed = std::stoull(value);
        }
      }
      continue;
    }
    if (!header) {
      if (line != "record_id,side") fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": bad split header");
      header = true;
      continue;
    }
    const auto fields = csv::split(line);
    if (fields.size() != 2) fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": expected 2 fields");
    const auto side = csv::trim(fields[1]);
    if (side == "train") plan.train_ids.emplace_back(csv::trim(fields[0]));
    else if (side == "test") plan.test_ids.emplace_back(csv::trim(fields[0]));
    else fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": side must be train or test");
  }
  if (!header || !have_protocol) fail(ErrorKind::Format, "split file lacks protocol comment or header");
  return plan;
}

void save_split(const std::filesystem::path& path, const SplitPlan& plan) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << split_to_csv(plan);
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

SplitPlan load_split(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return split_from_csv(buf.str());
}

}  // namespace f2b
