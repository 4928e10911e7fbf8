#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vchatter/error.hpp"

namespace vchatter::provider {

enum class Role { System, User, Assistant };

std::string_view role_name(Role r);

struct ChatMessage {
  Role role = Role::User;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

/// Identifies which agent turn a request belongs to. Remote providers ignore
/// it; the scripted provider uses it to pick the response.
struct RequestTag {
  std::string agent_kind;  // "therapist" | "interlocutor" | "sentiment"
  int day = 0;
  std::string phase;
};

struct CompletionParams {
  std::string model_id = "gpt-4";
  double temperature = 0.7;
  int max_tokens = 1024;
  std::chrono::milliseconds timeout{30000};
  std::optional<std::int64_t> seed;
  std::optional<RequestTag> tag;
};

struct StreamChunk {
  std::string text;
  std::optional<ErrorCode> error;  // set only on the terminal error chunk
};

using ChunkSink = std::function<void(const StreamChunk&)>;

/// Throws Validation unless messages start with a System message, contain at
/// least one User message, and User/Assistant contents are nonempty.
void validate_messages(std::span<const ChatMessage> messages);

class Provider {
 public:
  virtual ~Provider() = default;

  virtual std::string complete(std::span<const ChatMessage> messages,
                               const CompletionParams& params) = 0;

  /// Delivers ordered chunks whose concatenation equals the returned text. On a
  /// mid-stream failure the sink gets one chunk with `error` set, then the
  /// error is thrown.
  virtual std::string complete_streaming(std::span<const ChatMessage> messages,
                                         const CompletionParams& params, const ChunkSink& sink) = 0;
};

// ---------------------------------------------------------------------------
// Scripted mock

/// Key format "kind/day/phase/turn", e.g. "therapist/1/Assessment/0".
std::string script_key(std::string_view kind, int day, std::string_view phase, int turn);

/// How the mock splits a response into stream chunks.
struct ChunkPolicy {
  enum class Kind { FixedThree, Seeded } kind = Kind::FixedThree;
  std::uint64_t seed = 0;
};

/// Splits `text` on UTF-8 code point boundaries. FixedThree yields up to
/// three near-equal parts; Seeded yields a pseudo-random partition.
std::vector<std::string> split_chunks(std::string_view text, const ChunkPolicy& policy);

/// Deterministic provider backed by a keyed script. Turn indices advance per
/// (kind, day, phase) only when a response is delivered, so a retried request
/// sees the same key.
class ScriptedProvider final : public Provider {
 public:
  struct Entry {
    std::string text;
    std::optional<ErrorCode> fault;  // injected failure
    int fault_times = -1;            // -1: always; else fail this many attempts first
    double retry_after_s = 0.0;
    int fail_after_chunks = -1;      // streaming: fail after delivering N chunks
  };

  ScriptedProvider(std::map<std::string, Entry> script, bool strict = true,
                   ChunkPolicy chunking = {});

  using Script = std::map<std::string, Entry>;

  /// Accepts either a flat key->value object or {"responses": {...}}. A value
  /// is response text or {"text", "error", "times", "retry_after",
  /// "fail_after_chunks"}.
  static Script parse_script(const nlohmann::json& doc);
  static Script load_script(const std::filesystem::path& path);

  std::string complete(std::span<const ChatMessage> messages,
                       const CompletionParams& params) override;
  std::string complete_streaming(std::span<const ChatMessage> messages,
                                 const CompletionParams& params, const ChunkSink& sink) override;

  /// Every key this provider has answered, in call order.
  std::vector<std::string> served_keys() const;
  void reset();

 private:
  std::string resolve(const CompletionParams& params, std::string* key_out, int* fail_after);

  std::map<std::string, Entry> script_;
  bool strict_;
  ChunkPolicy chunking_;
  mutable std::mutex mu_;
  std::map<std::string, int> turns_;
  std::map<std::string, int> attempts_;
  std::vector<std::string> served_;
};

// ---------------------------------------------------------------------------
// Retry wrapper

struct RetryPolicy {
  int max_retries = 3;
  std::vector<std::chrono::milliseconds> backoff{std::chrono::seconds(1), std::chrono::seconds(2),
                                                 std::chrono::seconds(4)};
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Retries Timeout and RateLimited failures with exponential backoff. Never
/// retries AuthFailed or MalformedResponse, and never retries a stream that
/// already delivered a chunk.
class RetryingProvider final : public Provider {
 public:
  RetryingProvider(std::shared_ptr<Provider> inner, RetryPolicy policy = {}, Sleeper sleeper = {});

  std::string complete(std::span<const ChatMessage> messages,
                       const CompletionParams& params) override;
  std::string complete_streaming(std::span<const ChatMessage> messages,
                                 const CompletionParams& params, const ChunkSink& sink) override;

  /// Attempts used by the most recent call on this instance.
  int attempts_made() const { return last_attempts_.load(); }

 private:
  template <typename Call>
  std::string run(const CompletionParams& params, Call&& call);

  std::shared_ptr<Provider> inner_;
  RetryPolicy policy_;
  Sleeper sleeper_;
  std::atomic<int> last_attempts_{0};
};

// ---------------------------------------------------------------------------
// Remote chat-completion API

struct HttpProviderConfig {
  std::string base_url;  // e.g. https://api.example.com/v1
  std::string api_key;
  std::string model_id;
};

class HttpProvider final : public Provider {
 public:
  explicit HttpProvider(HttpProviderConfig config);

  std::string complete(std::span<const ChatMessage> messages,
                       const CompletionParams& params) override;
  std::string complete_streaming(std::span<const ChatMessage> messages,
                                 const CompletionParams& params, const ChunkSink& sink) override;

  /// Request body sent to `{base_url}/chat/completions`.
  nlohmann::json request_body(std::span<const ChatMessage> messages,
                              const CompletionParams& params, bool stream) const;

 private:
  HttpProviderConfig config_;
  std::string host_;
  std::string path_prefix_;
};

/// VCHATTER_MOCK_SCRIPT selects the scripted provider; otherwise
/// VCHATTER_PROVIDER_URL / VCHATTER_PROVIDER_KEY / VCHATTER_MODEL configure
/// the remote one. The result is wrapped in a RetryingProvider.
std::shared_ptr<Provider> make_provider_from_env();

}  // namespace vchatter::provider
