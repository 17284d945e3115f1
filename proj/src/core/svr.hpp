#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "core/ingest.hpp"

namespace f2b {

enum class KernelKind { Linear, Rbf };

struct KernelSpec {
  KernelKind kind = KernelKind::Linear;
  double gamma = 0.0;  // Rbf only; 0 means "1 / dim" until resolved at train time

  static KernelSpec linear() { return {KernelKind::Linear, 0.0}; }
  static KernelSpec rbf(double gamma) { return {KernelKind::Rbf, gamma}; }
};

double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> y);

struct SvrHyperParams {
  double c = 1.0;
  double epsilon = 1.0;      // tube half-width in BMI units
  double tolerance = 1e-3;   // stop once the maximal KKT violation drops below this
  std::uint64_t max_passes = 0;  // 0 = 10 * n; one pass is 2n pair updates

  void validate() const;
};

struct SupportVector {
  std::string record_id;
  std::vector<double> vec;
  double coeff = 0.0;
};

struct SvrModel {
  KernelSpec kernel;
  SvrHyperParams params;
  bool normalize = true;
  std::size_t dim = 0;
  double bias = 0.0;
  std::vector<SupportVector> support;
};

struct TrainStats {
  std::uint64_t iterations = 0;
  double max_violation = 0.0;   // final m(alpha) - M(alpha) gap
  double dual_objective = 0.0;  // maximization form
};

struct TrainResult {
  SvrModel model;
  TrainStats stats;
};

// Kernel rows are cached densely up to this many training points; above it an
// LRU cache of at most cache_rows rows is used. Results do not depend on either.
struct CacheConfig {
  std::size_t dense_limit = 8192;
  std::size_t cache_rows = 1024;
};

// Epsilon-SVR by SMO over the 2n-variable dual
//   min 1/2 b'Qb + p'b   s.t. y'b = 0, 0 <= b <= C
// with second-order working-pair selection. The solver is deterministic; the
// seed is accepted for interface symmetry with the other stages and does not
// influence the result.
TrainResult train_detailed(const Dataset& ds, std::span<const std::size_t> rows, const KernelSpec& kernel,
                           const SvrHyperParams& params, std::uint64_t seed = 0,
                           const CacheConfig& cache = {});

SvrModel train(const Dataset& ds, std::span<const std::string> ids, const KernelSpec& kernel,
               const SvrHyperParams& params, std::uint64_t seed = 0);

// Raw-matrix entry point used by the dataset overload and by tests.
// `features` is row-major n x dim.
TrainResult train_matrix(std::span<const double> features, std::size_t dim, std::span<const double> targets,
                         const KernelSpec& kernel, const SvrHyperParams& params,
                         const CacheConfig& cache = {});

double predict(const SvrModel& model, std::span<const double> x);

void save_model(const std::filesystem::path& path, const SvrModel& model);
SvrModel load_model(const std::filesystem::path& path);
std::string model_to_json(const SvrModel& model);
SvrModel model_from_json(std::string_view text);

}  // namespace f2b
