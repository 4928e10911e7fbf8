#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "vchatter/presence.hpp"

namespace vchatter {

/// A conversation stream: the therapist channel, or one interlocutor slot of
/// one day's scenario.
struct Channel {
  enum class Kind { Therapist, Scenario } kind = Kind::Therapist;
  int day = 0;
  int slot = 0;

  static Channel therapist() { return {}; }
  static Channel scenario(int day, int slot) { return {Kind::Scenario, day, slot}; }

  bool is_therapist() const { return kind == Kind::Therapist; }
  /// "therapist" or "scenario-<day>-<slot>"; also the transcript file stem.
  std::string id() const;
  static std::optional<Channel> parse(std::string_view id);

  bool operator==(const Channel&) const = default;
  auto operator<=>(const Channel&) const = default;
};

struct Author {
  enum class Kind { Participant, Agent } kind = Kind::Participant;
  std::string profile_ref;  // agent authors only, e.g. "agent-p", "agent-h/3/0"

  static Author participant() { return {}; }
  static Author agent(std::string ref) { return {Kind::Agent, std::move(ref)}; }
  bool is_participant() const { return kind == Kind::Participant; }
  /// "participant" or "agent:<profile_ref>".
  std::string id() const;
  static std::optional<Author> parse(std::string_view id);

  bool operator==(const Author&) const = default;
};

struct TranscriptEntry {
  std::int64_t seq = 0;
  Channel channel;
  Author author;
  std::string text;
  presence::Sentiment sentiment = presence::Sentiment::Neutral;
  std::optional<presence::ExpressionState> expression;  // agent turns only
  std::optional<presence::AudioRef> audio;
  bool audio_warning = false;  // synthesis failed; message delivered without audio
  bool hint = false;           // help reply during exposure
  std::int64_t timestamp_ms = 0;

  bool operator==(const TranscriptEntry&) const = default;
};

nlohmann::json to_json(const TranscriptEntry& e);
TranscriptEntry transcript_entry_from_json(const nlohmann::json& j);

}  // namespace vchatter
