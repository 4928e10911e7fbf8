#include <fstream>
#include <random>

#include "vchatter/provider.hpp"

namespace vchatter::provider {

namespace {

using nlohmann::json;

bool is_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

// Byte offsets that start a UTF-8 code point, plus text.size().
std::vector<std::size_t> boundaries(std::string_view text) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (!is_continuation(static_cast<unsigned char>(text[i]))) out.push_back(i);
  }
  out.push_back(text.size());
  return out;
}

std::optional<ErrorCode> fault_from_name(const std::string& name) {
  if (name == "timeout") return ErrorCode::Timeout;
  if (name == "rate_limited") return ErrorCode::RateLimited;
  if (name == "malformed") return ErrorCode::MalformedResponse;
  if (name == "auth") return ErrorCode::AuthFailed;
  return std::nullopt;
}

[[noreturn]] void raise_fault(ErrorCode code, const std::string& key, double retry_after_s) {
  if (code == ErrorCode::RateLimited) {
    throw RateLimitedError("scripted rate limit at " + key, retry_after_s);
  }
  throw Error(code, "scripted fault at " + key);
}

}  // namespace

std::string_view role_name(Role r) {
  switch (r) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

void validate_messages(std::span<const ChatMessage> messages) {
  if (messages.empty()) throw Error(ErrorCode::Validation, "completion request has no messages");
  if (messages.front().role != Role::System) {
    throw Error(ErrorCode::Validation, "first completion message must be the system message");
  }
  bool has_user = false;
  for (const auto& m : messages) {
    if (m.role == Role::User) has_user = true;
    if (m.role != Role::System && m.content.empty()) {
      throw Error(ErrorCode::Validation, "user and assistant messages must be nonempty");
    }
  }
  if (!has_user) throw Error(ErrorCode::Validation, "completion request has no user message");
}

std::string script_key(std::string_view kind, int day, std::string_view phase, int turn) {
  return std::string(kind) + "/" + std::to_string(day) + "/" + std::string(phase) + "/" +
         std::to_string(turn);
}

std::vector<std::string> split_chunks(std::string_view text, const ChunkPolicy& policy) {
  std::vector<std::string> chunks;
  if (text.empty()) return chunks;
  const auto cuts = boundaries(text);  // code point starts + end
  const std::size_t points = cuts.size() - 1;
  std::vector<std::size_t> split_at;  // indices into cuts
  if (policy.kind == ChunkPolicy::Kind::FixedThree) {
    const std::size_t parts = std::min<std::size_t>(3, points);
    for (std::size_t k = 1; k < parts; ++k) split_at.push_back(points * k / parts);
  } else {
    std::mt19937_64 rng(policy.seed);
    for (std::size_t i = 1; i < points; ++i) {
      if (rng() % 4 == 0) split_at.push_back(i);
    }
  }
  std::size_t prev = 0;
  for (std::size_t idx : split_at) {
    chunks.emplace_back(text.substr(cuts[prev], cuts[idx] - cuts[prev]));
    prev = idx;
  }
  chunks.emplace_back(text.substr(cuts[prev]));
  return chunks;
}

ScriptedProvider::ScriptedProvider(std::map<std::string, Entry> script, bool strict,
                                   ChunkPolicy chunking)
    : script_(std::move(script)), strict_(strict), chunking_(chunking) {}

ScriptedProvider::Script ScriptedProvider::parse_script(const json& doc) {
  const json& table = doc.contains("responses") ? doc.at("responses") : doc;
  if (!table.is_object()) throw Error(ErrorCode::Validation, "provider script must be a JSON object");
  std::map<std::string, Entry> script;
  for (const auto& [key, value] : table.items()) {
    Entry e;
    if (value.is_string()) {
      e.text = value.get<std::string>();
    } else if (value.is_object()) {
      e.text = value.value("text", "");
      if (value.contains("error")) {
        e.fault = fault_from_name(value.at("error").get<std::string>());
        if (!e.fault) throw Error(ErrorCode::Validation, "provider script: unknown fault at " + key);
        e.fault_times = value.value("times", -1);
        e.retry_after_s = value.value("retry_after", 0.0);
      }
      e.fail_after_chunks = value.value("fail_after_chunks", -1);
    } else {
      throw Error(ErrorCode::Validation, "provider script: entry " + key + " must be text or object");
    }
    script.emplace(key, std::move(e));
  }
  return script;
}

ScriptedProvider::Script ScriptedProvider::load_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open provider script " + path.string());
  try {
    return parse_script(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Validation, "provider script " + path.string() + ": " + e.what());
  }
}

std::string ScriptedProvider::resolve(const CompletionParams& params, std::string* key_out,
                                      int* fail_after) {
  if (!params.tag) {
    throw Error(ErrorCode::MalformedResponse, "scripted provider needs a request tag");
  }
  std::lock_guard lock(mu_);
  const auto& tag = *params.tag;
  const std::string base = tag.agent_kind + "/" + std::to_string(tag.day) + "/" + tag.phase;
  const int turn = turns_[base];
  const std::string key = script_key(tag.agent_kind, tag.day, tag.phase, turn);
  *key_out = key;
  auto it = script_.find(key);
  if (it == script_.end()) {
    if (strict_) throw Error(ErrorCode::MalformedResponse, "provider script has no entry for " + key);
    ++turns_[base];
    served_.push_back(key);
    return "(no scripted reply for " + key + ")";
  }
  const Entry& e = it->second;
  if (e.fault) {
    const int attempt = attempts_[key]++;
    if (e.fault_times < 0 || attempt < e.fault_times) raise_fault(*e.fault, key, e.retry_after_s);
  }
  if (e.text.empty()) {
    throw Error(ErrorCode::MalformedResponse, "scripted reply for " + key + " is empty");
  }
  *fail_after = e.fail_after_chunks;
  ++turns_[base];
  served_.push_back(key);
  return e.text;
}

std::string ScriptedProvider::complete(std::span<const ChatMessage> messages,
                                       const CompletionParams& params) {
  validate_messages(messages);
  std::string key;
  int fail_after = -1;
  return resolve(params, &key, &fail_after);
}

std::string ScriptedProvider::complete_streaming(std::span<const ChatMessage> messages,
                                                 const CompletionParams& params,
                                                 const ChunkSink& sink) {
  validate_messages(messages);
  std::string key;
  int fail_after = -1;
  std::string text = resolve(params, &key, &fail_after);
  const auto chunks = split_chunks(text, chunking_);
  if (chunks.empty()) throw Error(ErrorCode::MalformedResponse, "stream for " + key + " had no chunks");
  std::string assembled;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    if (fail_after >= 0 && static_cast<int>(i) == fail_after) {
      sink(StreamChunk{"", ErrorCode::MalformedResponse});
      throw Error(ErrorCode::MalformedResponse, "scripted stream broke after " +
                                                    std::to_string(i) + " chunks at " + key);
    }
    sink(StreamChunk{chunks[i], std::nullopt});
    assembled += chunks[i];
  }
  return assembled;
}

std::vector<std::string> ScriptedProvider::served_keys() const {
  std::lock_guard lock(mu_);
  return served_;
}

void ScriptedProvider::reset() {
  std::lock_guard lock(mu_);
  turns_.clear();
  attempts_.clear();
  served_.clear();
}

}  // namespace vchatter::provider
