#include "core/domain.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>

#include "core/error.hpp"

namespace f2b {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Integrity: return "integrity error";
    case ErrorKind::Format: return "format error";
    case ErrorKind::Corruption: return "corruption error";
    case ErrorKind::Validation: return "validation error";
    case ErrorKind::Io: return "i/o error";
    case ErrorKind::Convergence: return "convergence error";
    case ErrorKind::Capacity: return "capacity error";
    case ErrorKind::UndefinedCorrelation: return "undefined correlation";
  }
  return "unknown error";
}

namespace {

void check_range(const char* field, double value, double lo, double hi) {
  if (!std::isfinite(value) || value <= lo || value >= hi) {
    std::ostringstream msg;
    msg << field << " = " << value << " outside (" << lo << ", " << hi << ")";
    fail(ErrorKind::Domain, msg.str());
  }
}

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

double compute_bmi(double weight_kg, double height_m) {
  check_range("weight_kg", weight_kg, 0.0, std::numeric_limits<double>::infinity());
  check_range("height_m", height_m, 0.0, std::numeric_limits<double>::infinity());
  return weight_kg / (height_m * height_m);
}

BmiCategory categorize(double bmi) {
  if (!std::isfinite(bmi) || bmi <= kBmiFloor) {
    std::ostringstream msg;
    msg << "bmi = " << bmi << " must exceed " << kBmiFloor;
    fail(ErrorKind::Domain, msg.str());
  }
  if (bmi <= 18.5) return BmiCategory::Underweight;
  if (bmi <= 25.0) return BmiCategory::Normal;
  if (bmi <= 30.0) return BmiCategory::Overweight;
  if (bmi <= 35.0) return BmiCategory::ModeratelyObese;
  if (bmi <= 40.0) return BmiCategory::SeverelyObese;
  return BmiCategory::VerySeverelyObese;
}

FaceRecord make_record(std::string record_id, std::string person_id, Role role, Gender gender,
                       double height_m, double weight_kg, std::string race) {
  check_range("weight_kg", weight_kg, kMinWeightKg, kMaxWeightKg);
  check_range("height_m", height_m, kMinHeightM, kMaxHeightM);
  FaceRecord r;
  r.bmi = compute_bmi(weight_kg, height_m);
  r.record_id = std::move(record_id);
  r.person_id = std::move(person_id);
  r.role = role;
  r.gender = gender;
  r.height_m = height_m;
  r.weight_kg = weight_kg;
  r.race = std::move(race);
  return r;
}

const char* to_string(Role role) noexcept { return role == Role::Before ? "before" : "after"; }

const char* to_string(Gender gender) noexcept { return gender == Gender::Male ? "M" : "F"; }

const char* to_string(BmiCategory category) noexcept {
  switch (category) {
    case BmiCategory::Underweight: return "underweight";
    case BmiCategory::Normal: return "normal";
    case BmiCategory::Overweight: return "overweight";
    case BmiCategory::ModeratelyObese: return "moderately obese";
    case BmiCategory::SeverelyObese: return "severely obese";
    case BmiCategory::VerySeverelyObese: return "very severely obese";
  }
  return "?";
}

Gender parse_gender(std::string_view text) {
  const auto t = lower(text);
  if (t == "m" || t == "male") return Gender::Male;
  if (t == "f" || t == "female") return Gender::Female;
  fail(ErrorKind::Parse, "unknown gender '" + std::string(text) + "'");
}

Role parse_role(std::string_view text) {
  const auto t = lower(text);
  if (t == "before") return Role::Before;
  if (t == "after") return Role::After;
  fail(ErrorKind::Parse, "unknown role '" + std::string(text) + "'");
}

}  // namespace f2b
