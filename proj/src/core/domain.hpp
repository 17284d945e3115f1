#pragma once

#include <string>
#include <string_view>

namespace f2b {

enum class Role { Before, After };
enum class Gender { Male, Female };

enum class BmiCategory {
  Underweight,
  Normal,
  Overweight,
  ModeratelyObese,
  SeverelyObese,
  VerySeverelyObese,
};

inline constexpr double kMinHeightM = 0.5;
inline constexpr double kMaxHeightM = 2.8;
inline constexpr double kMinWeightKg = 20.0;
inline constexpr double kMaxWeightKg = 400.0;
inline constexpr double kBmiFloor = 10.0;

struct FaceRecord {
  std::string record_id;
  std::string person_id;
  Role role = Role::Before;
  Gender gender = Gender::Male;
  double height_m = 0.0;
  double weight_kg = 0.0;
  double bmi = 0.0;
  std::string race;  // empty when unlabeled
};

// weight / height^2. Throws a Domain error naming the offending field when
// either input is not a positive finite number. The narrower record ranges
// are enforced by make_record and at ingest.
double compute_bmi(double weight_kg, double height_m);

// Bins are open below and closed above at 18.5, 25, 30, 35, 40. Anything in
// (10, 18.5] is Underweight, including predictions below 16.
BmiCategory categorize(double bmi);

// Rejects heights outside (0.5, 2.8) m and weights outside (20, 400) kg.
FaceRecord make_record(std::string record_id, std::string person_id, Role role, Gender gender,
                       double height_m, double weight_kg, std::string race = {});

const char* to_string(Role role) noexcept;
const char* to_string(Gender gender) noexcept;
const char* to_string(BmiCategory category) noexcept;

// Accepts "M"/"F" as written in metadata files and the words male/female.
Gender parse_gender(std::string_view text);
Role parse_role(std::string_view text);

}  // namespace f2b
