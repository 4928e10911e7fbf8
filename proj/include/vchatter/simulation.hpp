#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vchatter/agents.hpp"
#include "vchatter/protocol.hpp"
#include "vchatter/stats.hpp"
#include "vchatter/store.hpp"

namespace vchatter::simulation {

/// A captured prompt bundle with the request it belonged to.
struct BundleRecord {
  std::string agent_kind;
  int day = 0;
  std::string phase;
  agents::PromptBundle bundle;
};

nlohmann::json to_json(const BundleRecord& r);

struct IsolationViolation {
  std::size_t bundle_index = 0;
  std::string fragment;
};

/// Every `window`-byte substring of an interlocutor turn that shows up in a
/// therapist bundle without occurring in any participant-authored text.
std::vector<IsolationViolation> memory_isolation_violations(
    const std::vector<BundleRecord>& bundles, const std::vector<std::string>& interlocutor_texts,
    const std::vector<std::string>& participant_texts, std::size_t window = 20);

struct SimulationResult {
  bool ok = false;
  std::vector<std::string> violations;  // first one is the reason for failure
  protocol::SessionState final_state;
  nlohmann::json report;
};

struct SimulationOptions {
  std::filesystem::path asset_dir;
  std::int64_t start_ms = 1'700'000'000'000;  // fixed clock origin
};

/// Drives one scripted participant through the whole protocol in-process and
/// writes `out_dir/{store/, transcripts/, bundles.jsonl, final_state.json,
/// report.json}`. Script format is documented in the README.
SimulationResult run_simulation(const nlohmann::json& script, const std::filesystem::path& out_dir,
                                const SimulationOptions& opts);
SimulationResult run_simulation(const std::filesystem::path& script_path,
                                const std::filesystem::path& out_dir, const SimulationOptions& opts);

/// `n` participants with complete protocols and seeded pre/post scales.
/// Throws Validation for n < 1.
void seed_cohort(const std::filesystem::path& data_dir, int n, std::uint64_t seed,
                 const std::filesystem::path& asset_dir);

/// Cohort report of a data directory; throws NotFound when it holds no
/// sessions and InsufficientCohort below two complete participants.
stats::OutcomeReport report(const std::filesystem::path& data_dir);

/// Checks transcript files (one file, a transcripts directory, a session
/// directory, or a whole data directory). Returns violations; empty is valid.
std::vector<std::string> validate_path(const std::filesystem::path& path);

}  // namespace vchatter::simulation
