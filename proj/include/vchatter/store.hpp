#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "vchatter/instruments.hpp"
#include "vchatter/protocol.hpp"
#include "vchatter/transcript.hpp"

namespace vchatter::store {

enum class Timing { Pre, Post };

std::string_view timing_name(Timing t);
std::optional<Timing> parse_timing(std::string_view s);

using ScaleKey = std::pair<std::string, Timing>;  // (instrument id, timing)

struct StoredSession {
  protocol::SessionState snapshot;
  std::vector<protocol::SessionEvent> events;
  std::map<ScaleKey, instruments::ScaleScore> scales;
  bool opt_in = false;
};

struct CohortRecord {
  std::string pseudonym;
  std::string session_id;
  std::map<std::string, double> pre;   // keyed by outcome measure ("SAS-A", "Fear", ...)
  std::map<std::string, double> post;
};

nlohmann::json to_json(const CohortRecord& r);

/// Letters, digits, '-' and '_', 1 to 64 characters.
bool valid_pseudonym(std::string_view s);

/// Value of an outcome measure taken from a session's scale submissions.
std::optional<double> measure_value(const std::map<ScaleKey, instruments::ScaleScore>& scales,
                                    std::string_view measure, Timing timing);

/// Per-session directory layout under `root/sessions/<id>/`:
///   meta.json, snapshot.json, events.jsonl, scales.json, staged_plan.json,
///   transcripts/<channel-id>.jsonl
/// One writer per session at a time; readers share.
class Store {
 public:
  explicit Store(std::filesystem::path root);

  /// VCHATTER_DATA_DIR, else `fallback`.
  static std::filesystem::path data_dir_from_env(const std::filesystem::path& fallback = "vchatter-data");

  const std::filesystem::path& root() const { return root_; }

  void create_session(const protocol::SessionState& initial, bool opt_in);
  bool exists(const std::string& session_id) const;
  std::vector<std::string> list_sessions() const;

  /// Verifies that replaying the event log reproduces the snapshot.
  /// Throws NotFound or CorruptLog.
  StoredSession load_session(const std::string& session_id) const;
  protocol::SessionState snapshot(const std::string& session_id) const;

  /// Appends the event then rewrites the snapshot. Returns the new state.
  protocol::SessionState apply_event(const std::string& session_id,
                                     const protocol::SessionEvent& event,
                                     const protocol::ProtocolConfig& config = {});

  /// Assigns the next seq on the entry's channel and persists it before
  /// returning. Throws ChannelMismatch when the channel is not open in the
  /// current phase, SessionClosed after the session ended.
  std::int64_t append_turn(const std::string& session_id, TranscriptEntry entry);
  std::vector<TranscriptEntry> read_channel(const std::string& session_id, const Channel& channel) const;
  std::vector<Channel> channels(const std::string& session_id) const;

  void put_scale(const std::string& session_id, std::string_view instrument, Timing timing,
                 const instruments::ScaleScore& score);

  void stage_plan(const std::string& session_id, const ExposurePlanCard& card);
  std::optional<ExposurePlanCard> staged_plan(const std::string& session_id) const;
  void clear_staged_plan(const std::string& session_id);

  /// Participants with pre and post values for every requested measure
  /// (all outcome measures when `measures` is empty), ordered by
  /// (pseudonym, session id).
  std::vector<CohortRecord> export_cohort(const std::vector<std::string>& measures = {}) const;

 private:
  std::filesystem::path dir(const std::string& session_id) const;
  std::shared_mutex& lock_for(const std::string& session_id) const;
  void require(const std::string& session_id) const;
  StoredSession load_unlocked(const std::string& session_id) const;

  std::filesystem::path root_;
  mutable std::mutex locks_mu_;
  mutable std::map<std::string, std::unique_ptr<std::shared_mutex>> locks_;
};

}  // namespace vchatter::store
