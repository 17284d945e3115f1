#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>

#include "core/error.hpp"
#include "core/ingest.hpp"
#include "core/rng.hpp"
#include "support/fixtures.hpp"

using namespace f2b;

namespace {

constexpr const char* kHeader = "record_id,person_id,role,gender,height_m,weight_kg,race\n";

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

EmbeddingMap random_vectors(std::size_t count, std::size_t dim, std::uint64_t seed) {
  SplitMix64 rng(seed);
  EmbeddingMap m;
  for (std::size_t i = 0; i < count; ++i) {
    EmbeddingVector v;
    v.record_id = "img_" + std::to_string(rng.next() % 100000) + "_" + std::to_string(i);
    for (std::size_t k = 0; k < dim; ++k) v.values.push_back(static_cast<float>(rng.normal() * 10.0));
    m.emplace(v.record_id, v);
  }
  return m;
}

bool bit_equal(const EmbeddingMap& a, const EmbeddingMap& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [id, v] : a) {
    const auto it = b.find(id);
    if (it == b.end() || it->second.values.size() != v.values.size()) return false;
    if (std::memcmp(v.values.data(), it->second.values.data(), v.values.size() * sizeof(float)) != 0) return false;
  }
  return true;
}

// Hand-assembled little-endian file, independent of the encoder.
std::vector<std::byte> raw_file(std::uint32_t dim, std::uint64_t count,
                                const std::vector<std::pair<std::string, std::vector<float>>>& rows,
                                std::uint16_t version = 1, const char* magic = "F2BE") {
  std::vector<std::byte> out;
  auto put = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const std::byte*>(p);
    out.insert(out.end(), b, b + n);
  };
  put(magic, 4);
  const std::uint8_t v[2] = {static_cast<std::uint8_t>(version & 0xFF), static_cast<std::uint8_t>(version >> 8)};
  put(v, 2);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((dim >> (8 * i)) & 0xFF));
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::byte>((count >> (8 * i)) & 0xFF));
  for (const auto& [id, vals] : rows) {
    const auto len = static_cast<std::uint16_t>(id.size());
    out.push_back(static_cast<std::byte>(len & 0xFF));
    out.push_back(static_cast<std::byte>(len >> 8));
    put(id.data(), id.size());
    for (float f : vals) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((bits >> (8 * i)) & 0xFF));
    }
  }
  return out;
}

}  // namespace

TEST_CASE("metadata row with absent race") {
  const auto recs = parse_metadata(std::string(kHeader) + "p17_b,p17,before,M,1.80,120.0,\n");
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].bmi == doctest::Approx(120.0 / (1.8 * 1.8)).epsilon(1e-14));
  CHECK(recs[0].bmi == doctest::Approx(37.037037).epsilon(1e-7));
  CHECK(recs[0].race.empty());
  CHECK(recs[0].gender == Gender::Male);
  CHECK(recs[0].role == Role::Before);
}

TEST_CASE("four rows describing two complete persons") {
  const auto recs = parse_metadata(std::string(kHeader) +
                                   "a_b,a,before,F,1.60,70,R1\n"
                                   "a_a,a,after,F,1.60,62,R1\n"
                                   "b_b,b,before,M,1.85,110,\n"
                                   "b_a,b,after,M,1.85,95,\n");
  CHECK(recs.size() == 4);
  std::set<std::string> persons;
  for (const auto& r : recs) persons.insert(r.person_id);
  CHECK(persons.size() == 2);
}

TEST_CASE("metadata errors carry kind and line") {
  auto parse = [](const std::string& body) { return parse_metadata(std::string(kHeader) + body); };

  try {
    parse("a_b,a,before,F,1.60,70,R1\na_a,a,after,F,abc,62,R1\n");
    FAIL("accepted bad height");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Parse);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK(kind_of([&] { parse("a_b,a,before,F,1.60\n"); }) == ErrorKind::Parse);
  CHECK(kind_of([&] { parse("a_b,a,sometime,F,1.60,70,\n"); }) == ErrorKind::Parse);
  CHECK(kind_of([&] { parse("a_b,a,before,X,1.60,70,\n"); }) == ErrorKind::Parse);
  CHECK(kind_of([&] { parse("a_b,a,before,F,1.60,70,\na_x,a,before,F,1.60,71,\n"); }) == ErrorKind::Integrity);
  CHECK(kind_of([&] { parse("a_b,a,before,F,1.60,70,\na_b,a,after,F,1.60,71,\n"); }) == ErrorKind::Integrity);
  CHECK(kind_of([&] { parse("a_b,a,before,F,1.60,7,\n"); }) == ErrorKind::Domain);
  CHECK(kind_of([] { parse_metadata("id,person\n"); }) == ErrorKind::Parse);
  CHECK(kind_of([] { parse_metadata(""); }) == ErrorKind::Parse);
}

TEST_CASE("metadata save/load round trip") {
  fixtures::TempDir dir("meta");
  const auto ds = fixtures::synthetic_dataset(20, 3);
  std::vector<FaceRecord> recs(ds.records().begin(), ds.records().end());
  save_metadata(dir / "m.csv", recs);
  const auto back = load_metadata(dir / "m.csv");
  REQUIRE(back.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(back[i].record_id == recs[i].record_id);
    CHECK(back[i].height_m == recs[i].height_m);
    CHECK(back[i].weight_kg == recs[i].weight_kg);
    CHECK(back[i].bmi == recs[i].bmi);
    CHECK(back[i].race == recs[i].race);
  }
}

TEST_CASE("embedding round trip of 3 vectors of dim 8 is bit exact") {
  fixtures::TempDir dir("emb");
  const auto v = random_vectors(3, 8, 1);
  write_embeddings(dir / "e.f2be", v);
  CHECK(bit_equal(read_embeddings(dir / "e.f2be"), v));
}

TEST_CASE("embedding round trip property") {
  SplitMix64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const auto count = 1 + rng.below(12);
    const auto dim = 1 + rng.below(40);
    auto v = random_vectors(count, dim, rng.next());
    // Extremes survive too.
    v.begin()->second.values[0] = std::numeric_limits<float>::max();
    if (dim > 1) v.begin()->second.values[1] = -std::numeric_limits<float>::denorm_min();
    const auto bytes = encode_embeddings(v);
    CHECK(bytes.size() == 18 + count * 2 + [&] {
      std::size_t s = 0;
      for (const auto& [id, e] : v) s += id.size() + 4 * dim;
      return s;
    }());
    CHECK(bit_equal(decode_embeddings(bytes), v));
  }
}

TEST_CASE("encoder matches the hand-assembled layout") {
  EmbeddingMap m;
  m["b"] = {"b", {1.5f, -2.0f}};
  m["a"] = {"a", {0.25f, 3.0f}};
  const auto expected = raw_file(2, 2, {{"a", {0.25f, 3.0f}}, {"b", {1.5f, -2.0f}}});
  CHECK(encode_embeddings(m) == expected);
}

TEST_CASE("embedding file errors") {
  CHECK(kind_of([] { decode_embeddings({}); }) == ErrorKind::Format);
  CHECK(kind_of([] { decode_embeddings(raw_file(2, 0, {}, 1, "F2BX")); }) == ErrorKind::Format);
  CHECK(kind_of([] { decode_embeddings(raw_file(2, 0, {}, 2)); }) == ErrorKind::Format);
  CHECK(kind_of([] { decode_embeddings(raw_file(0, 0, {})); }) == ErrorKind::Format);
  // Header promises two records, one present.
  CHECK(kind_of([] { decode_embeddings(raw_file(2, 2, {{"a", {1.0f, 2.0f}}})); }) == ErrorKind::Corruption);
  CHECK(kind_of([] {
          auto bytes = raw_file(2, 1, {{"a", {1.0f, 2.0f}}});
          bytes.pop_back();
          decode_embeddings(bytes);
        }) == ErrorKind::Corruption);
  CHECK(kind_of([] {
          auto bytes = raw_file(2, 1, {{"a", {1.0f, 2.0f}}});
          bytes.push_back(std::byte{0});
          decode_embeddings(bytes);
        }) == ErrorKind::Corruption);
  CHECK(kind_of([] { decode_embeddings(raw_file(2, 1, {{"a", {1.0f, NAN}}})); }) == ErrorKind::Validation);
  CHECK(kind_of([] { decode_embeddings(raw_file(1, 1, {{"a", {INFINITY}}})); }) == ErrorKind::Validation);
  CHECK(kind_of([] { decode_embeddings(raw_file(1, 2, {{"a", {1.0f}}, {"a", {2.0f}}})); }) ==
        ErrorKind::Integrity);

  fixtures::TempDir dir("emb_err");
  { std::ofstream(dir / "empty.f2be"); }
  CHECK(kind_of([&] { read_embeddings(dir / "empty.f2be"); }) == ErrorKind::Format);
  CHECK(kind_of([&] { read_embeddings(dir / "missing.f2be"); }) == ErrorKind::Io);
}

TEST_CASE("writer validation") {
  EmbeddingMap mixed;
  mixed["a"] = {"a", {1.0f, 2.0f}};
  mixed["b"] = {"b", {1.0f}};
  CHECK(kind_of([&] { encode_embeddings(mixed); }) == ErrorKind::Validation);
  CHECK(kind_of([] { encode_embeddings({}); }) == ErrorKind::Validation);
  EmbeddingMap nan;
  nan["a"] = {"a", {NAN}};
  CHECK(kind_of([&] { encode_embeddings(nan); }) == ErrorKind::Validation);
}

TEST_CASE("build_dataset joins and reports orphans") {
  std::vector<FaceRecord> recs = {
      make_record("p1_b", "p1", Role::Before, Gender::Male, 1.8, 90.0),
      make_record("p1_a", "p1", Role::After, Gender::Male, 1.8, 80.0),
      make_record("p2_b", "p2", Role::Before, Gender::Female, 1.6, 60.0),
  };
  EmbeddingMap emb;
  emb["p1_b"] = {"p1_b", {3.0f, 4.0f}};
  emb["p1_a"] = {"p1_a", {1.0f, 0.0f}};
  const auto res = build_dataset(recs, emb);
  CHECK(res.dataset.size() == 2);
  CHECK(res.report.orphan_records == std::vector<std::string>{"p2_b"});
  CHECK(res.report.orphan_embeddings.empty());
  const auto row = res.dataset.row(res.dataset.index_of("p1_b"));
  CHECK(row[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(row[1] == doctest::Approx(0.8).epsilon(1e-15));

  const auto raw = build_dataset(recs, emb, false);
  CHECK(raw.dataset.row(0)[0] == 3.0);
  CHECK(!raw.dataset.normalized());
  CHECK(kind_of([&] { res.dataset.index_of("nope"); }) == ErrorKind::Validation);
}

TEST_CASE("normalize_unit") {
  std::vector<double> v = {3.0, 4.0};
  normalize_unit(v);
  CHECK(v[0] == doctest::Approx(0.6));
  CHECK(v[1] == doctest::Approx(0.8));
  std::vector<double> z = {0.0, 0.0};
  CHECK(kind_of([&] { normalize_unit(z); }) == ErrorKind::Validation);

  std::vector<FaceRecord> recs = {make_record("p1_b", "p1", Role::Before, Gender::Male, 1.8, 90.0),
                                  make_record("p1_a", "p1", Role::After, Gender::Male, 1.8, 80.0)};
  EmbeddingMap emb;
  emb["p1_b"] = {"p1_b", {0.0f, 0.0f}};
  emb["p1_a"] = {"p1_a", {1.0f, 0.0f}};
  CHECK(kind_of([&] { build_dataset(recs, emb); }) == ErrorKind::Validation);
  CHECK(build_dataset(recs, emb, false).dataset.size() == 2);
}

TEST_CASE("dataset invariants under injected mismatches") {
  SplitMix64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    SynthConfig cfg;
    cfg.persons = 5 + rng.below(20);
    cfg.dim = 1 + rng.below(6);
    cfg.seed = rng.next();
    auto data = make_synthetic(cfg);
    // Drop random embeddings, add strays, drop some metadata rows.
    std::set<std::string> dropped_emb, dropped_meta;
    for (const auto& r : data.records) {
      if (rng.uniform() < 0.1) dropped_emb.insert(r.record_id);
      else if (rng.uniform() < 0.05) dropped_meta.insert(r.record_id);
    }
    for (const auto& id : dropped_emb) data.embeddings.erase(id);
    data.embeddings["stray_" + std::to_string(trial)] = {"stray", std::vector<float>(cfg.dim, 1.0f)};
    std::vector<FaceRecord> recs;
    for (const auto& r : data.records)
      if (!dropped_meta.count(r.record_id)) recs.push_back(r);

    const auto res = build_dataset(recs, data.embeddings);
    const auto& ds = res.dataset;
    std::map<std::string, int> roles;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto& r = ds.record(i);
      CHECK(data.embeddings.count(r.record_id) == 1);
      CHECK(ds.index_of(r.record_id) == i);
      roles[r.person_id] |= r.role == Role::Before ? 1 : 2;
      double sq = 0.0;
      for (double x : ds.row(i)) sq += x * x;
      CHECK(sq == doctest::Approx(1.0).epsilon(1e-12));
    }
    for (const auto& [p, mask] : roles) CHECK(mask == 3);
    CHECK(res.report.orphan_records.size() == dropped_emb.size() - [&] {
      std::size_t n = 0;
      for (const auto& id : dropped_emb) n += dropped_meta.count(id);
      return n;
    }());
    CHECK(res.report.orphan_embeddings.size() == 1 + dropped_meta.size());
    CHECK(ds.size() + res.report.orphan_records.size() <= recs.size());
  }
}
