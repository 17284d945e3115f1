#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "core/ingest.hpp"
#include "core/synth.hpp"

namespace fixtures {

inline f2b::Dataset synthetic_dataset(std::size_t persons, std::uint64_t seed, std::size_t dim = 16,
                                      double noise = 0.5, bool normalize = true) {
  f2b::SynthConfig cfg;
  cfg.persons = persons;
  cfg.dim = dim;
  cfg.noise_sd = noise;
  cfg.seed = seed;
  const auto data = f2b::make_synthetic(cfg);
  return f2b::build_dataset(data.records, data.embeddings, normalize).dataset;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("f2b_" + tag + "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures
