#include "core/ingest.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "core/csv.hpp"
#include "core/error.hpp"

namespace f2b {

namespace {

constexpr std::string_view kMetadataHeader = "record_id,person_id,role,gender,height_m,weight_kg,race";

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

[[noreturn]] void parse_fail(std::size_t line, const std::string& what) {
  fail(ErrorKind::Parse, "line " + std::to_string(line) + ": " + what);
}

// Little-endian cursor over the F2BE byte stream.
class Reader {
 public:
  explicit Reader(std::span<const std::byte> bytes) : bytes_(bytes) {}

  bool has(std::size_t n) const { return bytes_.size() - pos_ >= n; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  template <typename U>
  U uint() {
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      v |= static_cast<U>(std::to_integer<std::uint8_t>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }

  std::string text(std::size_t n) {
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::byte> bytes_;
  std::size_t pos_ = 0;
};

template <typename U>
void put_uint(std::vector<std::byte>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFF));
}

}  // namespace

std::vector<FaceRecord> parse_metadata(std::string_view text) {
  std::vector<FaceRecord> records;
  std::set<std::string> ids;
  std::set<std::pair<std::string, Role>> person_roles;

  std::size_t line_no = 0;
  bool seen_header = false;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = csv::trim(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty()) continue;

    if (!seen_header) {
      if (line != kMetadataHeader) parse_fail(line_no, "expected header '" + std::string(kMetadataHeader) + "'");
      seen_header = true;
      continue;
    }

    const auto fields = csv::split(line);
    if (fields.size() != 7) parse_fail(line_no, "expected 7 fields, got " + std::to_string(fields.size()));
    const auto record_id = std::string(csv::trim(fields[0]));
    const auto person_id = std::string(csv::trim(fields[1]));
    if (record_id.empty() || person_id.empty()) parse_fail(line_no, "empty record_id or person_id");

    Role role{};
    Gender gender{};
    try {
      role = parse_role(csv::trim(fields[2]));
      gender = parse_gender(csv::trim(fields[3]));
    } catch (const Error& e) {
      parse_fail(line_no, e.what());
    }
    const auto height = csv::to_double(fields[4]);
    const auto weight = csv::to_double(fields[5]);
    if (!height) parse_fail(line_no, "bad height_m '" + std::string(fields[4]) + "'");
    if (!weight) parse_fail(line_no, "bad weight_kg '" + std::string(fields[5]) + "'");

    if (!ids.insert(record_id).second)
      fail(ErrorKind::Integrity, "line " + std::to_string(line_no) + ": duplicate record_id " + record_id);
    if (!person_roles.emplace(person_id, role).second)
      fail(ErrorKind::Integrity, "line " + std::to_string(line_no) + ": duplicate (person_id, role) (" +
                                     person_id + ", " + to_string(role) + ")");

    try {
      records.push_back(make_record(record_id, person_id, role, gender, *height, *weight,
                                    std::string(csv::trim(fields[6]))));
    } catch (const Error& e) {
      fail(ErrorKind::Domain, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!seen_header) parse_fail(line_no, "missing header");
  return records;
}

std::vector<FaceRecord> load_metadata(const std::filesystem::path& path) {
  return parse_metadata(read_file(path));
}

void save_metadata(const std::filesystem::path& path, std::span<const FaceRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << kMetadataHeader << '\n';
  out << std::setprecision(17);
  for (const auto& r : records) {
    out << r.record_id << ',' << r.person_id << ',' << to_string(r.role) << ',' << to_string(r.gender)
        << ',' << r.height_m << ',' << r.weight_kg << ',' << r.race << '\n';
  }
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

EmbeddingMap decode_embeddings(std::span<const std::byte> bytes) {
  Reader in(bytes);
  if (!in.has(4 + 2 + 4 + 8)) fail(ErrorKind::Format, "embedding file shorter than its header");
  if (std::memcmp(bytes.data(), kEmbeddingMagic, 4) != 0) fail(ErrorKind::Format, "bad magic, expected F2BE");
  in.text(4);
  const auto version = in.uint<std::uint16_t>();
  if (version != kEmbeddingVersion)
    fail(ErrorKind::Format, "unsupported embedding file version " + std::to_string(version));
  const auto dim = in.uint<std::uint32_t>();
  const auto count = in.uint<std::uint64_t>();
  if (dim == 0) fail(ErrorKind::Format, "embedding dim must be positive");

  EmbeddingMap out;
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto where = "record " + std::to_string(k) + " of " + std::to_string(count);
    if (!in.has(2)) fail(ErrorKind::Corruption, "truncated at " + where);
    const auto len = in.uint<std::uint16_t>();
    if (!in.has(len + std::size_t{4} * dim)) fail(ErrorKind::Corruption, "truncated at " + where);
    EmbeddingVector v;
    v.record_id = in.text(len);
    v.values.resize(dim);
    for (auto& x : v.values) {
      x = std::bit_cast<float>(in.uint<std::uint32_t>());
      if (!std::isfinite(x)) fail(ErrorKind::Validation, "non-finite value in embedding " + v.record_id);
    }
    auto id = v.record_id;
    if (!out.emplace(id, std::move(v)).second) fail(ErrorKind::Integrity, "duplicate embedding id " + id);
  }
  if (in.remaining() != 0)
    fail(ErrorKind::Corruption, std::to_string(in.remaining()) + " trailing bytes after last record");
  return out;
}

EmbeddingMap read_embeddings(const std::filesystem::path& path) {
  const auto data = read_file(path);
  return decode_embeddings(std::as_bytes(std::span(data.data(), data.size())));
}

std::vector<std::byte> encode_embeddings(const EmbeddingMap& vectors) {
  if (vectors.empty()) fail(ErrorKind::Validation, "no embeddings to write");
  const auto dim = vectors.begin()->second.values.size();
  if (dim == 0 || dim > UINT32_MAX) fail(ErrorKind::Validation, "embedding dim out of range");

  std::vector<std::byte> out;
  out.reserve(18 + vectors.size() * (16 + 4 * dim));
  for (char c : kEmbeddingMagic) out.push_back(static_cast<std::byte>(c));
  put_uint<std::uint16_t>(out, kEmbeddingVersion);
  put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
  put_uint<std::uint64_t>(out, vectors.size());
  for (const auto& [id, v] : vectors) {
    if (v.values.size() != dim)
      fail(ErrorKind::Validation, "mixed dims: " + id + " has " + std::to_string(v.values.size()) +
                                      ", expected " + std::to_string(dim));
    if (id.size() > UINT16_MAX) fail(ErrorKind::Validation, "record id too long: " + id.substr(0, 32));
    put_uint<std::uint16_t>(out, static_cast<std::uint16_t>(id.size()));
    for (char c : id) out.push_back(static_cast<std::byte>(c));
    for (float x : v.values) {
      if (!std::isfinite(x)) fail(ErrorKind::Validation, "non-finite value in embedding " + id);
      put_uint<std::uint32_t>(out, std::bit_cast<std::uint32_t>(x));
    }
  }
  return out;
}

void write_embeddings(const std::filesystem::path& path, const EmbeddingMap& vectors) {
  const auto bytes = encode_embeddings(vectors);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

std::optional<std::size_t> Dataset::find(std::string_view record_id) const {
  const auto it = index_.find(std::string(record_id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Dataset::index_of(std::string_view record_id) const {
  if (auto i = find(record_id)) return *i;
  fail(ErrorKind::Validation, "record " + std::string(record_id) + " not in dataset");
}

std::vector<std::string> Dataset::record_ids() const {
  std::vector<std::string> ids;
  ids.reserve(records_.size());
  for (const auto& r : records_) ids.push_back(r.record_id);
  return ids;
}

void normalize_unit(std::span<double> values) {
  double sq = 0.0;
  for (double x : values) sq += x * x;
  if (!(sq > 0.0)) fail(ErrorKind::Validation, "cannot normalize a zero vector");
  const double norm = std::sqrt(sq);
  for (double& x : values) x /= norm;
}

struct DatasetBuilder {
  static BuildResult build(std::span<const FaceRecord> records, const EmbeddingMap& embeddings,
                           bool normalize) {
    BuildResult result;
    auto& report = result.report;
    auto& ds = result.dataset;

    std::set<std::string> metadata_ids;
    for (const auto& r : records) metadata_ids.insert(r.record_id);
    for (const auto& [id, v] : embeddings)
      if (!metadata_ids.count(id)) report.orphan_embeddings.push_back(id);

    // Persons count as complete only if both roles survive the join.
    std::map<std::string, int> roles_present;
    for (const auto& r : records) {
      if (!embeddings.count(r.record_id)) {
        report.orphan_records.push_back(r.record_id);
        continue;
      }
      roles_present[r.person_id] |= (r.role == Role::Before ? 1 : 2);
    }
    for (const auto& [person, mask] : roles_present)
      if (mask != 3) report.incomplete_persons.push_back(person);

    ds.normalized_ = normalize;
    for (const auto& r : records) {
      const auto it = embeddings.find(r.record_id);
      if (it == embeddings.end() || roles_present[r.person_id] != 3) continue;
      const auto& values = it->second.values;
      if (ds.records_.empty()) {
        ds.dim_ = values.size();
        if (ds.dim_ == 0) fail(ErrorKind::Validation, "embedding dim must be positive");
      }
      if (values.size() != ds.dim_)
        fail(ErrorKind::Validation, "mixed dims at " + r.record_id);
      const auto offset = ds.features_.size();
      ds.features_.insert(ds.features_.end(), values.begin(), values.end());
      if (normalize) {
        try {
          normalize_unit(std::span(ds.features_).subspan(offset, ds.dim_));
        } catch (const Error&) {
          fail(ErrorKind::Validation, "zero-norm embedding for " + r.record_id);
        }
      }
      if (!ds.index_.emplace(r.record_id, ds.records_.size()).second)
        fail(ErrorKind::Integrity, "duplicate record_id " + r.record_id);
      ds.records_.push_back(r);
    }
    return result;
  }
};

BuildResult build_dataset(std::span<const FaceRecord> records, const EmbeddingMap& embeddings,
                          bool normalize) {
  return DatasetBuilder::build(records, embeddings, normalize);
}

}  // namespace f2b
