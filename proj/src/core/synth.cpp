#include "core/synth.hpp"

#include <cmath>
#include <cstdio>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace f2b {

namespace {

std::vector<double> unit(std::vector<double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double norm = std::sqrt(sq);
  for (double& x : v) x /= norm;
  return v;
}

std::string padded(const char* prefix, std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%05zu", prefix, k);
  return buf;
}

}  // namespace

SynthData make_synthetic(const SynthConfig& cfg) {
  if (cfg.persons == 0 || cfg.dim == 0) fail(ErrorKind::Validation, "synthetic cohort needs persons and dim");
  SplitMix64 rng(cfg.seed);
  SynthData out;
  out.intercept = cfg.intercept;

  // E[(w.e)^2] = |w|^2 / dim for e uniform on the sphere.
  out.weights.resize(cfg.dim);
  for (double& x : out.weights) x = rng.normal();
  out.weights = unit(std::move(out.weights));
  for (double& x : out.weights) x *= cfg.bmi_spread * std::sqrt(static_cast<double>(cfg.dim));

  const char* races[] = {"R1", "R2", "R3"};
  std::size_t made = 0;
  while (made < cfg.persons) {
    std::vector<double> identity(cfg.dim);
    for (double& x : identity) x = rng.normal();
    const bool male = rng.uniform() < cfg.male_fraction;
    const std::string race = races[rng.below(3)];
    const double height = male ? 1.62 + 0.3 * rng.uniform() : 1.50 + 0.28 * rng.uniform();

    std::vector<double> bmis;
    std::vector<std::vector<double>> embs;
    for (int role = 0; role < 2; ++role) {
      std::vector<double> e(cfg.dim);
      for (std::size_t k = 0; k < cfg.dim; ++k) e[k] = identity[k] + cfg.within_person * rng.normal();
      e = unit(std::move(e));
      double bmi = cfg.intercept + cfg.noise_sd * rng.normal();
      for (std::size_t k = 0; k < cfg.dim; ++k) bmi += out.weights[k] * e[k];
      bmis.push_back(bmi);
      embs.push_back(std::move(e));
    }
    const auto in_range = [&](double bmi) {
      const double w = bmi * height * height;
      return bmi > 13.0 && w > kMinWeightKg + 1.0 && w < kMaxWeightKg - 1.0;
    };
    if (!in_range(bmis[0]) || !in_range(bmis[1])) continue;

    const auto person = padded("p", made);
    for (int role = 0; role < 2; ++role) {
      const auto id = person + (role == 0 ? "_b" : "_a");
      out.records.push_back(make_record(id, person, role == 0 ? Role::Before : Role::After,
                                        male ? Gender::Male : Gender::Female, height,
                                        bmis[role] * height * height, race));
      EmbeddingVector v;
      v.record_id = id;
      v.values.assign(embs[role].begin(), embs[role].end());
      out.embeddings.emplace(id, std::move(v));
    }
    ++made;
  }
  return out;
}

}  // namespace f2b
