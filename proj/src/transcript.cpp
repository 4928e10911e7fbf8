#include "vchatter/transcript.hpp"

#include <charconv>

#include "vchatter/error.hpp"

namespace vchatter {

namespace {

std::optional<int> to_int(std::string_view s) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

std::string Channel::id() const {
  if (is_therapist()) return "therapist";
  return "scenario-" + std::to_string(day) + "-" + std::to_string(slot);
}

std::optional<Channel> Channel::parse(std::string_view id) {
  if (id == "therapist") return therapist();
  constexpr std::string_view kPrefix = "scenario-";
  if (id.substr(0, kPrefix.size()) != kPrefix) return std::nullopt;
  id.remove_prefix(kPrefix.size());
  const auto dash = id.find('-');
  if (dash == std::string_view::npos) return std::nullopt;
  auto d = to_int(id.substr(0, dash));
  auto s = to_int(id.substr(dash + 1));
  if (!d || !s || *d < 1 || *s < 0) return std::nullopt;
  return scenario(*d, *s);
}

std::string Author::id() const {
  return is_participant() ? std::string("participant") : "agent:" + profile_ref;
}

std::optional<Author> Author::parse(std::string_view id) {
  if (id == "participant") return participant();
  if (id.substr(0, 6) == "agent:" && id.size() > 6) return agent(std::string(id.substr(6)));
  return std::nullopt;
}

nlohmann::json to_json(const TranscriptEntry& e) {
  nlohmann::json j{{"seq", e.seq},
                   {"channel", e.channel.id()},
                   {"author", e.author.id()},
                   {"text", e.text},
                   {"sentiment", presence::sentiment_name(e.sentiment)},
                   {"timestamp_ms", e.timestamp_ms}};
  if (e.expression) j["expression"] = presence::expression_name(*e.expression);
  if (e.audio) j["audio"] = presence::to_json(*e.audio);
  if (e.audio_warning) j["audio_warning"] = true;
  if (e.hint) j["hint"] = true;
  return j;
}

TranscriptEntry transcript_entry_from_json(const nlohmann::json& j) {
  try {
    TranscriptEntry e;
    e.seq = j.at("seq").get<std::int64_t>();
    auto ch = Channel::parse(j.at("channel").get<std::string>());
    auto au = Author::parse(j.at("author").get<std::string>());
    auto se = presence::parse_sentiment(j.at("sentiment").get<std::string>());
    if (!ch || !au || !se) throw Error(ErrorCode::CorruptLog, "transcript entry has bad fields");
    e.channel = *ch;
    e.author = *au;
    e.sentiment = *se;
    e.text = j.at("text").get<std::string>();
    e.timestamp_ms = j.at("timestamp_ms").get<std::int64_t>();
    if (j.contains("expression")) {
      auto ex = presence::parse_expression(j["expression"].get<std::string>());
      if (!ex) throw Error(ErrorCode::CorruptLog, "transcript entry has bad expression");
      e.expression = *ex;
    }
    if (j.contains("audio")) e.audio = presence::audio_from_json(j["audio"]);
    e.audio_warning = j.value("audio_warning", false);
    e.hint = j.value("hint", false);
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::CorruptLog, std::string("transcript entry: ") + ex.what());
  }
}

}  // namespace vchatter
