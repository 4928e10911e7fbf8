#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "support.hpp"
#include "vchatter/instruments.hpp"

using namespace vchatter;
using namespace vchatter::instruments;
using vtest::error_of;

namespace {

LsasResponse uniform_lsas(int fear, int avoid) {
  return LsasResponse{std::vector<LsasItem>(kLsasItems, LsasItem{fear, avoid})};
}

}  // namespace

TEST_CASE("lsas extremes and bands") {
  CHECK(score_lsas(uniform_lsas(0, 0)).total == 0);
  CHECK(score_lsas(uniform_lsas(3, 3)).total == 144);
  CHECK(score_lsas(uniform_lsas(3, 3)).band == LsasBand::ClinicalSAD);

  CHECK(lsas_band(0) == LsasBand::Subclinical);
  CHECK(lsas_band(29) == LsasBand::Subclinical);
  CHECK(lsas_band(30) == LsasBand::PotentialSAD);
  CHECK(lsas_band(59) == LsasBand::PotentialSAD);
  CHECK(lsas_band(60) == LsasBand::ClinicalSAD);
  CHECK(lsas_band(83) == LsasBand::ClinicalSAD);

  // Custom thresholds come from configuration.
  CHECK(lsas_band(40, {50, 90}) == LsasBand::Subclinical);
}

TEST_CASE("lsas subscales add up") {
  auto r = uniform_lsas(1, 2);
  r.items[0] = {3, 0};
  const auto s = score_lsas(r);
  CHECK(s.fear_sum == 23 + 3);
  CHECK(s.avoidance_sum == 46);
  CHECK(s.total == s.fear_sum + s.avoidance_sum);
}

TEST_CASE("lsas validation names the item") {
  auto r = uniform_lsas(1, 1);
  r.items[7].avoidance = 4;
  try {
    score_lsas(r);
    FAIL("expected a validation error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Validation);
    CHECK(std::string(e.what()).find("7") != std::string::npos);
  }
  r.items.pop_back();
  CHECK(error_of([&] { score_lsas(r); }) == ErrorCode::Validation);
  CHECK(error_of([&] { score_lsas(uniform_lsas(-1, 0)); }) == ErrorCode::Validation);
}

TEST_CASE("sas-a sums items and applies reversal") {
  std::vector<int> items(kSasAItems, 3);
  CHECK(score_sas_a({items, {}}) == 54);
  items[0] = 5;
  CHECK(score_sas_a({items, {}}) == 56);
  CHECK(score_sas_a({items, {0}}) == 52);  // 5 -> 1
  CHECK(error_of([&] { score_sas_a({std::vector<int>(kSasAItems, 6), {}}); }) == ErrorCode::Validation);
  CHECK(error_of([&] { score_sas_a({std::vector<int>(17, 3), {}}); }) == ErrorCode::Validation);
  CHECK(error_of([&] { score_sas_a({items, {18}}); }) == ErrorCode::Validation);
}

TEST_CASE("ucla reverse-keyed items") {
  const auto rev = default_ucla_reverse_set();
  CHECK(rev == std::vector<std::size_t>{0, 4, 5, 8, 9, 14, 15, 18, 19});
  std::vector<int> ones(kUclaItems, 1);
  // Nine reversed items at 1 count as 4.
  CHECK(score_ucla({ones, rev}) == 11 * 1 + 9 * 4);
  CHECK(score_ucla({ones, {}}) == 20);
  CHECK(error_of([&] { score_ucla({std::vector<int>(kUclaItems, 0), rev}); }) == ErrorCode::Validation);
}

TEST_CASE("social attitude range") {
  CHECK(score_social_attitude({1, 4, 7}) == SocialAttitude{1, 4, 7});
  CHECK(error_of([] { score_social_attitude({0, 4, 7}); }) == ErrorCode::Validation);
  CHECK(error_of([] { score_social_attitude({1, 4, 8}); }) == ErrorCode::Validation);
}

TEST_CASE("random responses agree with an independent summation") {
  std::mt19937_64 rng(11);
  auto draw = [&](int lo, int hi) { return lo + static_cast<int>(rng() % static_cast<unsigned>(hi - lo + 1)); };
  const auto rev = default_ucla_reverse_set();
  const std::set<std::size_t> rev_set(rev.begin(), rev.end());
  for (int trial = 0; trial < 500; ++trial) {
    LsasResponse l;
    int fear = 0, avoid = 0;
    for (std::size_t i = 0; i < kLsasItems; ++i) {
      l.items.push_back({draw(0, 3), draw(0, 3)});
      fear += l.items.back().fear;
      avoid += l.items.back().avoidance;
    }
    const auto s = score_lsas(l);
    REQUIRE(s.total == fear + avoid);
    REQUIRE(s.band == (s.total >= 60 ? LsasBand::ClinicalSAD
                                     : s.total >= 30 ? LsasBand::PotentialSAD : LsasBand::Subclinical));

    std::vector<int> u;
    int expect = 0;
    for (std::size_t i = 0; i < kUclaItems; ++i) {
      u.push_back(draw(1, 4));
      expect += rev_set.count(i) ? 5 - u.back() : u.back();
    }
    REQUIRE(score_ucla({u, rev}) == expect);
  }
}

TEST_CASE("catalog from the shipped definitions file") {
  const auto cat = InstrumentCatalog::load(vtest::asset_dir() / "instruments.json");
  CHECK(cat.version() == 1);
  CHECK(cat.get("lsas").item_count == 24);
  CHECK(cat.get("lsas").item_labels.size() == 24);
  CHECK(cat.get("ucla").reverse_set == default_ucla_reverse_set());
  CHECK(cat.contains("social-attitude"));
  CHECK_FALSE(cat.contains("bdi"));
  CHECK(error_of([&] { cat.get("bdi"); }) == ErrorCode::Validation);
}

TEST_CASE("catalog may override settings but not structure") {
  nlohmann::json doc = vtest::load_json(vtest::asset_dir() / "instruments.json");
  auto& defs = doc["instruments"];
  auto find = [&](const std::string& id) -> nlohmann::json& {
    if (defs.is_object()) return defs[id];
    for (auto& d : defs) {
      if (d["id"] == id) return d;
    }
    throw std::runtime_error("missing " + id);
  };
  find("ucla")["reverse_set"] = {1, 2};
  const auto cat = InstrumentCatalog::from_json(doc);
  CHECK(cat.get("ucla").reverse_set == std::vector<std::size_t>{1, 2});

  find("lsas")["item_count"] = 30;
  CHECK(error_of([&] { InstrumentCatalog::from_json(doc); }) == ErrorCode::Validation);
}

TEST_CASE("payload scoring") {
  const auto cat = InstrumentCatalog::builtin();
  nlohmann::json lsas = nlohmann::json::array();
  for (int i = 0; i < 24; ++i) lsas.push_back(i < 12 ? nlohmann::json{2, 2} : nlohmann::json{{"fear", 1}, {"avoidance", 2}});
  const auto s = score_payload(kLsasId, {{"items", lsas}}, cat);
  CHECK(s.total == 12 * 4 + 12 * 3);
  REQUIRE(s.lsas);
  CHECK(s.lsas->band == LsasBand::ClinicalSAD);

  // Bare arrays are accepted too.
  CHECK(score_payload(kSasAId, nlohmann::json(std::vector<int>(18, 2)), cat).total == 36);

  const auto a = score_payload(kSocialAttitudeId, {{"contravene", 5}, {"fear", 4}, {"isolation", 3}}, cat);
  REQUIRE(a.attitude);
  CHECK(a.attitude->fear == 4);

  CHECK(error_of([&] { score_payload(kSocialAttitudeId, {{"fear", 4}}, cat); }) == ErrorCode::Validation);
  CHECK(error_of([&] { score_payload(kUclaId, {{"items", "x"}}, cat); }) == ErrorCode::Validation);
  CHECK(error_of([&] { score_payload(kLsasId, {{"items", {{1, 2, 3}}}}, cat); }) == ErrorCode::Validation);

  const auto round = scale_score_from_json(to_json(s));
  CHECK(round.total == s.total);
  CHECK(round.lsas == s.lsas);
}
