#pragma once

#include <cstdint>
#include <vector>

#include "core/ingest.hpp"

namespace f2b {

// Synthetic before/after cohort whose BMI is linear in a unit-norm embedding:
//   bmi = intercept + w . e + N(0, noise_sd)
// Each person has an identity direction; their two embeddings are that
// direction perturbed independently and renormalized. Used for tests, demos,
// and for exercising the pipeline without the original images.
struct SynthConfig {
  std::size_t persons = 200;
  std::size_t dim = 16;
  double noise_sd = 0.5;
  double intercept = 31.0;
  double bmi_spread = 7.0;       // standard deviation of w . e
  double within_person = 0.5;    // perturbation scale between a person's two images
  double male_fraction = 0.58;
  std::uint64_t seed = 42;
};

struct SynthData {
  std::vector<FaceRecord> records;
  EmbeddingMap embeddings;
  std::vector<double> weights;
  double intercept = 0.0;
};

SynthData make_synthetic(const SynthConfig& config);

}  // namespace f2b
