#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vchatter {

enum class ExposureLevel { Low, Medium, High };

enum class Gender { Male, Female, Unspecified };

std::string_view level_name(ExposureLevel level);
std::optional<ExposureLevel> parse_level(std::string_view word);  // also accepts mild/moderate/severe

std::string_view gender_name(Gender g);
std::optional<Gender> parse_gender(std::string_view word);

struct RoleSpec {
  std::string name;
  Gender gender = Gender::Unspecified;
  std::string profile_text;

  bool operator==(const RoleSpec&) const = default;
};

/// A therapist-authored exposure plan: who the participant talks to, the
/// situation, and what they must accomplish.
struct ExposurePlanCard {
  ExposureLevel level = ExposureLevel::Low;
  std::vector<RoleSpec> roles;
  std::string scenario_text;
  std::string task_text;
  std::vector<std::string> hints;

  bool operator==(const ExposurePlanCard&) const = default;
};

}  // namespace vchatter
