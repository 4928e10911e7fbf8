#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace vchatter::instruments {

inline constexpr std::size_t kLsasItems = 24;
inline constexpr std::size_t kSasAItems = 18;
inline constexpr std::size_t kUclaItems = 20;

struct LsasItem {
  int fear = 0;
  int avoidance = 0;
};

struct LsasResponse {
  std::vector<LsasItem> items;
};

enum class LsasBand { Subclinical, PotentialSAD, ClinicalSAD };

struct LsasThresholds {
  int potential = 30;  // 30 <= total < 60
  int clinical = 60;   // total >= 60
};

struct LsasScore {
  int fear_sum = 0;
  int avoidance_sum = 0;
  int total = 0;
  LsasBand band = LsasBand::Subclinical;

  bool operator==(const LsasScore&) const = default;
};

struct SasAResponse {
  std::vector<int> items;
  std::vector<std::size_t> reverse_set;  // empty by default
};

struct UclaResponse {
  std::vector<int> items;
  std::vector<std::size_t> reverse_set;
};

struct SocialAttitude {
  int contravene = 0;
  int fear = 0;
  int isolation = 0;

  bool operator==(const SocialAttitude&) const = default;
};

LsasBand lsas_band(int total, const LsasThresholds& thresholds = {});
std::string_view band_name(LsasBand band);

LsasScore score_lsas(const LsasResponse& r, const LsasThresholds& thresholds = {});
int score_sas_a(const SasAResponse& r);
int score_ucla(const UclaResponse& r);
SocialAttitude score_social_attitude(const SocialAttitude& r);

// Conventional reverse-keyed items of the 20-item UCLA scale (0-based).
std::vector<std::size_t> default_ucla_reverse_set();

/// Definition of one scale as read from the instrument definitions file.
struct InstrumentDef {
  std::string id;
  std::size_t item_count = 0;
  int item_min = 0;
  int item_max = 0;
  std::vector<std::size_t> reverse_set;
  std::vector<std::string> item_labels;
  std::optional<LsasThresholds> thresholds;
};

/// Versioned catalog of instrument definitions. Scorers never depend on it;
/// the service uses it to fill in reverse sets and item wording.
class InstrumentCatalog {
 public:
  static InstrumentCatalog builtin();
  static InstrumentCatalog from_json(const nlohmann::json& doc);
  static InstrumentCatalog load(const std::filesystem::path& path);

  int version() const { return version_; }
  const InstrumentDef& get(std::string_view id) const;
  bool contains(std::string_view id) const;

 private:
  int version_ = 1;
  std::map<std::string, InstrumentDef, std::less<>> defs_;
};

// Instrument ids used on the wire.
inline constexpr std::string_view kLsasId = "lsas";
inline constexpr std::string_view kSasAId = "sas-a";
inline constexpr std::string_view kUclaId = "ucla";
inline constexpr std::string_view kSocialAttitudeId = "social-attitude";

/// Scored submission of any instrument, in a uniform shape for storage and the API.
struct ScaleScore {
  std::string instrument;
  int total = 0;
  std::optional<LsasScore> lsas;
  std::optional<SocialAttitude> attitude;
};

/// Parses a JSON payload for `instrument`, validates and scores it.
/// Reverse sets come from the catalog, not the payload.
ScaleScore score_payload(std::string_view instrument, const nlohmann::json& payload,
                         const InstrumentCatalog& catalog);

nlohmann::json to_json(const ScaleScore& s);
ScaleScore scale_score_from_json(const nlohmann::json& j);

}  // namespace vchatter::instruments
