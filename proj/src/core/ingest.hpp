#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "core/domain.hpp"

namespace f2b {

struct EmbeddingVector {
  std::string record_id;
  std::vector<float> values;
};

// Keyed and ordered by record id, which is also the on-disk record order.
using EmbeddingMap = std::map<std::string, EmbeddingVector>;

inline constexpr char kEmbeddingMagic[4] = {'F', '2', 'B', 'E'};
inline constexpr std::uint16_t kEmbeddingVersion = 1;

std::vector<FaceRecord> load_metadata(const std::filesystem::path& path);
std::vector<FaceRecord> parse_metadata(std::string_view text);
void save_metadata(const std::filesystem::path& path, std::span<const FaceRecord> records);

EmbeddingMap read_embeddings(const std::filesystem::path& path);
EmbeddingMap decode_embeddings(std::span<const std::byte> bytes);
void write_embeddings(const std::filesystem::path& path, const EmbeddingMap& vectors);
std::vector<std::byte> encode_embeddings(const EmbeddingMap& vectors);

// Immutable join of records and their (optionally unit-normalized) embeddings.
// Rows are stored in 64-bit precision, aligned with records().
class Dataset {
 public:
  Dataset() = default;

  std::size_t size() const { return records_.size(); }
  std::size_t dim() const { return dim_; }
  bool normalized() const { return normalized_; }
  std::span<const FaceRecord> records() const { return records_; }
  const FaceRecord& record(std::size_t index) const { return records_.at(index); }
  std::span<const double> row(std::size_t index) const {
    return {features_.data() + index * dim_, dim_};
  }

  std::optional<std::size_t> find(std::string_view record_id) const;
  // Throws a Validation error for unknown ids.
  std::size_t index_of(std::string_view record_id) const;

  std::vector<std::string> record_ids() const;

 private:
  friend struct DatasetBuilder;
  std::vector<FaceRecord> records_;
  std::vector<double> features_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t dim_ = 0;
  bool normalized_ = false;
};

// Everything build_dataset left out, and why.
struct BuildReport {
  std::vector<std::string> orphan_records;     // metadata rows with no embedding
  std::vector<std::string> orphan_embeddings;  // embeddings with no metadata row
  std::vector<std::string> incomplete_persons; // person ids missing a before or after record
  bool clean() const {
    return orphan_records.empty() && orphan_embeddings.empty() && incomplete_persons.empty();
  }
};

struct BuildResult {
  Dataset dataset;
  BuildReport report;
};

BuildResult build_dataset(std::span<const FaceRecord> records, const EmbeddingMap& embeddings,
                          bool normalize = true);

// Scales a vector to unit Euclidean norm in place; zero vectors are rejected.
void normalize_unit(std::span<double> values);

}  // namespace f2b
