#include "vchatter/instruments.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "vchatter/error.hpp"

namespace vchatter::instruments {

namespace {

using nlohmann::json;

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::Validation, what); }

void check_length(std::string_view scale, std::size_t got, std::size_t want) {
  if (got != want) {
    invalid(std::string(scale) + ": expected " + std::to_string(want) + " items, got " +
            std::to_string(got));
  }
}

void check_item(std::string_view scale, std::size_t index, std::string_view field, int v, int lo,
                int hi) {
  if (v < lo || v > hi) {
    std::string msg = std::string(scale) + ": item " + std::to_string(index);
    if (!field.empty()) msg += " (" + std::string(field) + ")";
    msg += " = " + std::to_string(v) + " outside " + std::to_string(lo) + ".." + std::to_string(hi);
    invalid(msg);
  }
}

// Validates a reverse set and returns it as a lookup table.
std::vector<bool> reverse_mask(std::string_view scale, const std::vector<std::size_t>& set,
                               std::size_t n) {
  std::vector<bool> mask(n, false);
  for (std::size_t idx : set) {
    if (idx >= n) {
      invalid(std::string(scale) + ": reverse index " + std::to_string(idx) + " out of bounds");
    }
    mask[idx] = true;
  }
  return mask;
}

int sum_likert(std::string_view scale, const std::vector<int>& items,
               const std::vector<std::size_t>& reverse_set, std::size_t n, int lo, int hi) {
  check_length(scale, items.size(), n);
  const auto mask = reverse_mask(scale, reverse_set, n);
  int total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    check_item(scale, i, "", items[i], lo, hi);
    total += mask[i] ? (lo + hi - items[i]) : items[i];
  }
  return total;
}

std::vector<int> int_array(const json& j, std::string_view scale) {
  const json& arr = j.is_object() && j.contains("items") ? j.at("items") : j;
  if (!arr.is_array()) invalid(std::string(scale) + ": items must be an array");
  std::vector<int> out;
  out.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_number_integer()) invalid(std::string(scale) + ": items must be integers");
    out.push_back(v.get<int>());
  }
  return out;
}

int int_field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key) || !j.at(key).is_number_integer()) {
    invalid(std::string("social-attitude: missing integer field '") + key + "'");
  }
  return j.at(key).get<int>();
}

const char* const kLsasLabels[kLsasItems] = {
    "Telephoning in public",
    "Participating in small groups",
    "Eating in public places",
    "Drinking with others in public places",
    "Talking to people in authority",
    "Acting, performing or giving a talk in front of an audience",
    "Going to a party",
    "Working while being observed",
    "Writing while being observed",
    "Calling someone you don't know very well",
    "Talking with people you don't know very well",
    "Meeting strangers",
    "Urinating in a public bathroom",
    "Entering a room when others are already seated",
    "Being the center of attention",
    "Speaking up at a meeting",
    "Taking a test",
    "Expressing disagreement or disapproval to people you don't know very well",
    "Looking at people you don't know very well in the eyes",
    "Giving a report to a group",
    "Trying to pick up someone",
    "Returning goods to a store",
    "Giving a party",
    "Resisting a high pressure salesperson",
};

}  // namespace

LsasBand lsas_band(int total, const LsasThresholds& t) {
  if (total >= t.clinical) return LsasBand::ClinicalSAD;
  if (total >= t.potential) return LsasBand::PotentialSAD;
  return LsasBand::Subclinical;
}

std::string_view band_name(LsasBand band) {
  switch (band) {
    case LsasBand::Subclinical: return "Subclinical";
    case LsasBand::PotentialSAD: return "PotentialSAD";
    case LsasBand::ClinicalSAD: return "ClinicalSAD";
  }
  return "Subclinical";
}

LsasScore score_lsas(const LsasResponse& r, const LsasThresholds& thresholds) {
  check_length("lsas", r.items.size(), kLsasItems);
  LsasScore s;
  for (std::size_t i = 0; i < r.items.size(); ++i) {
    check_item("lsas", i, "fear", r.items[i].fear, 0, 3);
    check_item("lsas", i, "avoidance", r.items[i].avoidance, 0, 3);
    s.fear_sum += r.items[i].fear;
    s.avoidance_sum += r.items[i].avoidance;
  }
  s.total = s.fear_sum + s.avoidance_sum;
  s.band = lsas_band(s.total, thresholds);
  return s;
}

int score_sas_a(const SasAResponse& r) {
  return sum_likert("sas-a", r.items, r.reverse_set, kSasAItems, 1, 5);
}

int score_ucla(const UclaResponse& r) {
  return sum_likert("ucla", r.items, r.reverse_set, kUclaItems, 1, 4);
}

SocialAttitude score_social_attitude(const SocialAttitude& r) {
  check_item("social-attitude", 0, "contravene", r.contravene, 1, 7);
  check_item("social-attitude", 1, "fear", r.fear, 1, 7);
  check_item("social-attitude", 2, "isolation", r.isolation, 1, 7);
  return r;
}

std::vector<std::size_t> default_ucla_reverse_set() { return {0, 4, 5, 8, 9, 14, 15, 18, 19}; }

InstrumentCatalog InstrumentCatalog::builtin() {
  InstrumentCatalog c;
  InstrumentDef lsas{std::string(kLsasId), kLsasItems, 0, 3, {}, {}, LsasThresholds{}};
  lsas.item_labels.assign(std::begin(kLsasLabels), std::end(kLsasLabels));
  c.defs_.emplace(lsas.id, std::move(lsas));
  c.defs_.emplace(kSasAId, InstrumentDef{std::string(kSasAId), kSasAItems, 1, 5, {}, {}, {}});
  c.defs_.emplace(kUclaId, InstrumentDef{std::string(kUclaId), kUclaItems, 1, 4,
                                         default_ucla_reverse_set(), {}, {}});
  c.defs_.emplace(kSocialAttitudeId,
                  InstrumentDef{std::string(kSocialAttitudeId), 3, 1, 7, {},
                                {"contravene", "fear", "isolation"}, {}});
  return c;
}

InstrumentCatalog InstrumentCatalog::from_json(const json& doc) {
  InstrumentCatalog c = builtin();
  try {
    c.version_ = doc.at("version").get<int>();
    for (const auto& item : doc.at("instruments")) {
      const std::string id = item.at("id").get<std::string>();
      auto it = c.defs_.find(id);
      if (it == c.defs_.end()) invalid("instrument definitions: unknown scale id '" + id + "'");
      InstrumentDef& def = it->second;
      // Item counts and ranges are structural; the file may only restate them.
      if (item.value("item_count", def.item_count) != def.item_count ||
          item.value("item_min", def.item_min) != def.item_min ||
          item.value("item_max", def.item_max) != def.item_max) {
        invalid("instrument definitions: structure of '" + id + "' does not match the scorer");
      }
      if (item.contains("reverse_set")) {
        def.reverse_set = item.at("reverse_set").get<std::vector<std::size_t>>();
        reverse_mask(id, def.reverse_set, def.item_count);
      }
      if (item.contains("item_labels")) {
        def.item_labels = item.at("item_labels").get<std::vector<std::string>>();
      }
      if (item.contains("thresholds")) {
        const auto& t = item.at("thresholds");
        def.thresholds = LsasThresholds{t.at("potential").get<int>(), t.at("clinical").get<int>()};
      }
    }
  } catch (const json::exception& e) {
    invalid(std::string("instrument definitions: ") + e.what());
  }
  return c;
}

InstrumentCatalog InstrumentCatalog::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open instrument definitions " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    invalid("instrument definitions " + path.string() + ": " + e.what());
  }
  return from_json(doc);
}

const InstrumentDef& InstrumentCatalog::get(std::string_view id) const {
  auto it = defs_.find(id);
  if (it == defs_.end()) invalid("unknown instrument '" + std::string(id) + "'");
  return it->second;
}

bool InstrumentCatalog::contains(std::string_view id) const { return defs_.find(id) != defs_.end(); }

ScaleScore score_payload(std::string_view instrument, const json& payload,
                         const InstrumentCatalog& catalog) {
  const InstrumentDef& def = catalog.get(instrument);
  ScaleScore out;
  out.instrument = def.id;
  if (instrument == kLsasId) {
    const json& arr = payload.is_object() && payload.contains("items") ? payload.at("items") : payload;
    if (!arr.is_array()) invalid("lsas: items must be an array");
    LsasResponse r;
    for (const auto& it : arr) {
      if (it.is_array() && it.size() == 2 && it[0].is_number_integer() && it[1].is_number_integer()) {
        r.items.push_back({it[0].get<int>(), it[1].get<int>()});
      } else if (it.is_object() && it.contains("fear") && it.contains("avoidance") &&
                 it.at("fear").is_number_integer() && it.at("avoidance").is_number_integer()) {
        r.items.push_back({it.at("fear").get<int>(), it.at("avoidance").get<int>()});
      } else {
        invalid("lsas: item " + std::to_string(r.items.size()) +
                " must be {fear, avoidance} or [fear, avoidance]");
      }
    }
    out.lsas = score_lsas(r, def.thresholds.value_or(LsasThresholds{}));
    out.total = out.lsas->total;
  } else if (instrument == kSasAId) {
    out.total = score_sas_a({int_array(payload, instrument), def.reverse_set});
  } else if (instrument == kUclaId) {
    out.total = score_ucla({int_array(payload, instrument), def.reverse_set});
  } else {
    SocialAttitude a{int_field(payload, "contravene"), int_field(payload, "fear"),
                     int_field(payload, "isolation")};
    out.attitude = score_social_attitude(a);
    out.total = a.contravene + a.fear + a.isolation;
  }
  return out;
}

json to_json(const ScaleScore& s) {
  json j{{"instrument", s.instrument}, {"total", s.total}};
  if (s.lsas) {
    j["fear_sum"] = s.lsas->fear_sum;
    j["avoidance_sum"] = s.lsas->avoidance_sum;
    j["band"] = band_name(s.lsas->band);
  }
  if (s.attitude) {
    j["contravene"] = s.attitude->contravene;
    j["fear"] = s.attitude->fear;
    j["isolation"] = s.attitude->isolation;
  }
  return j;
}

ScaleScore scale_score_from_json(const json& j) {
  ScaleScore s;
  s.instrument = j.at("instrument").get<std::string>();
  s.total = j.at("total").get<int>();
  if (j.contains("band")) {
    LsasScore l;
    l.fear_sum = j.at("fear_sum").get<int>();
    l.avoidance_sum = j.at("avoidance_sum").get<int>();
    l.total = s.total;
    const auto band = j.at("band").get<std::string>();
    l.band = band == "ClinicalSAD"    ? LsasBand::ClinicalSAD
             : band == "PotentialSAD" ? LsasBand::PotentialSAD
                                      : LsasBand::Subclinical;
    s.lsas = l;
  }
  if (j.contains("contravene")) {
    s.attitude = SocialAttitude{j.at("contravene").get<int>(), j.at("fear").get<int>(),
                                j.at("isolation").get<int>()};
  }
  return s;
}

}  // namespace vchatter::instruments
