#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "vchatter/provider.hpp"

namespace vchatter::provider {

namespace {

using nlohmann::json;
using std::chrono::milliseconds;

bool transient(ErrorCode c) { return c == ErrorCode::Timeout || c == ErrorCode::RateLimited; }

[[noreturn]] void raise_for_status(int status, const httplib::Headers& headers,
                                   const std::string& body) {
  if (status == 401 || status == 403) {
    throw Error(ErrorCode::AuthFailed, "provider rejected credentials (HTTP " + std::to_string(status) + ")");
  }
  if (status == 429) {
    double retry_after = 0.0;
    auto it = headers.find("Retry-After");
    if (it != headers.end()) retry_after = std::atof(it->second.c_str());
    throw RateLimitedError("provider rate limit (HTTP 429)", retry_after);
  }
  if (status == 408 || status >= 500) {
    throw Error(ErrorCode::Timeout, "provider unavailable (HTTP " + std::to_string(status) + ")");
  }
  throw Error(ErrorCode::MalformedResponse,
              "provider returned HTTP " + std::to_string(status) + ": " + body.substr(0, 200));
}

std::string content_of(const json& choice, const char* field) {
  if (!choice.contains(field)) return {};
  const auto& part = choice.at(field);
  if (!part.contains("content") || part.at("content").is_null()) return {};
  return part.at("content").get<std::string>();
}

}  // namespace

// ---------------------------------------------------------------------------

RetryingProvider::RetryingProvider(std::shared_ptr<Provider> inner, RetryPolicy policy,
                                   Sleeper sleeper)
    : inner_(std::move(inner)), policy_(std::move(policy)), sleeper_(std::move(sleeper)) {
  if (!sleeper_) sleeper_ = [](milliseconds d) { std::this_thread::sleep_for(d); };
}

template <typename Call>
std::string RetryingProvider::run(const CompletionParams& params, Call&& call) {
  // Wall-time budget: one timeout per permitted attempt.
  const milliseconds budget = params.timeout * (policy_.max_retries + 1);
  milliseconds spent{0};
  last_attempts_ = 0;
  for (int attempt = 0;; ++attempt) {
    const auto start = std::chrono::steady_clock::now();
    ++last_attempts_;
    try {
      return call();
    } catch (const Error& e) {
      spent += std::chrono::duration_cast<milliseconds>(std::chrono::steady_clock::now() - start);
      if (!transient(e.code()) || attempt >= policy_.max_retries) throw;
      milliseconds wait = policy_.backoff.empty()
                              ? milliseconds(0)
                              : policy_.backoff[std::min<std::size_t>(
                                    static_cast<std::size_t>(attempt), policy_.backoff.size() - 1)];
      if (auto* rl = dynamic_cast<const RateLimitedError*>(&e)) {
        wait = std::max(wait, milliseconds(static_cast<long long>(rl->retry_after_s() * 1000.0)));
      }
      if (spent + wait > budget) throw;
      sleeper_(wait);
      spent += wait;
    }
  }
}

std::string RetryingProvider::complete(std::span<const ChatMessage> messages,
                                       const CompletionParams& params) {
  validate_messages(messages);
  return run(params, [&] { return inner_->complete(messages, params); });
}

std::string RetryingProvider::complete_streaming(std::span<const ChatMessage> messages,
                                                 const CompletionParams& params,
                                                 const ChunkSink& sink) {
  validate_messages(messages);
  bool delivered = false;
  ChunkSink tracking = [&](const StreamChunk& c) {
    if (!c.error) delivered = true;
    // Swallow error chunks for failures that will be retried.
    if (c.error && !delivered && transient(*c.error)) return;
    sink(c);
  };
  return run(params, [&] {
    try {
      return inner_->complete_streaming(messages, params, tracking);
    } catch (const Error& e) {
      if (delivered) {
        // Partial output already reached the client: surface as a terminal failure.
        throw Error(ErrorCode::MalformedResponse,
                    std::string("stream interrupted: ") + e.what());
      }
      throw;
    }
  });
}

// ---------------------------------------------------------------------------

HttpProvider::HttpProvider(HttpProviderConfig config) : config_(std::move(config)) {
  // Split "scheme://host[:port]/prefix" into the client target and path prefix.
  const auto scheme_end = config_.base_url.find("://");
  const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto path_start = config_.base_url.find('/', host_start);
  host_ = config_.base_url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : config_.base_url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  if (host_.empty()) throw Error(ErrorCode::Validation, "provider base URL is empty");
}

json HttpProvider::request_body(std::span<const ChatMessage> messages,
                                const CompletionParams& params, bool stream) const {
  json msgs = json::array();
  for (const auto& m : messages) msgs.push_back({{"role", role_name(m.role)}, {"content", m.content}});
  json body{{"model", config_.model_id.empty() ? params.model_id : config_.model_id},
            {"messages", msgs},
            {"temperature", params.temperature},
            {"max_tokens", params.max_tokens},
            {"stream", stream}};
  if (params.seed) body["seed"] = *params.seed;
  return body;
}

namespace {

httplib::Client make_client(const std::string& host, const CompletionParams& params,
                            const std::string& key) {
  httplib::Client cli(host);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(params.timeout).count();
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(params.timeout).count() % 1000000;
  cli.set_connection_timeout(static_cast<time_t>(secs), static_cast<time_t>(usecs));
  cli.set_read_timeout(static_cast<time_t>(secs), static_cast<time_t>(usecs));
  cli.set_write_timeout(static_cast<time_t>(secs), static_cast<time_t>(usecs));
  if (!key.empty()) cli.set_bearer_token_auth(key);
  return cli;
}

[[noreturn]] void raise_transport(httplib::Error err) {
  throw Error(ErrorCode::Timeout, "provider transport failure: " + httplib::to_string(err));
}

}  // namespace

std::string HttpProvider::complete(std::span<const ChatMessage> messages,
                                   const CompletionParams& params) {
  validate_messages(messages);
  auto cli = make_client(host_, params, config_.api_key);
  const auto body = request_body(messages, params, false).dump();
  auto res = cli.Post(path_prefix_ + "/chat/completions", body, "application/json");
  if (!res) raise_transport(res.error());
  if (res->status != 200) raise_for_status(res->status, res->headers, res->body);
  std::string text;
  try {
    const auto doc = json::parse(res->body);
    text = content_of(doc.at("choices").at(0), "message");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedResponse, std::string("provider response: ") + e.what());
  }
  if (text.empty()) throw Error(ErrorCode::MalformedResponse, "provider returned empty content");
  return text;
}

std::string HttpProvider::complete_streaming(std::span<const ChatMessage> messages,
                                             const CompletionParams& params, const ChunkSink& sink) {
  validate_messages(messages);
  auto cli = make_client(host_, params, config_.api_key);
  const auto body = request_body(messages, params, true).dump();

  std::string pending;
  std::string assembled;
  std::string error_body;
  bool bad_payload = false;
  int status = 0;
  httplib::Headers headers;

  httplib::Request req;
  req.method = "POST";
  req.path = path_prefix_ + "/chat/completions";
  req.headers = {{"Accept", "text/event-stream"}};
  req.body = body;
  req.set_header("Content-Type", "application/json");
  req.response_handler = [&](const httplib::Response& r) {
    status = r.status;
    headers = r.headers;
    return true;
  };
  req.content_receiver = [&](const char* data, size_t len, uint64_t, uint64_t) {
    if (status != 200) {
      error_body.append(data, len);
      return true;
    }
    pending.append(data, len);
    std::size_t nl;
    while ((nl = pending.find('\n')) != std::string::npos) {
      std::string line = pending.substr(0, nl);
      pending.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.rfind("data:", 0) != 0) continue;
      std::string payload = line.substr(5);
      if (!payload.empty() && payload.front() == ' ') payload.erase(0, 1);
      if (payload == "[DONE]") {
        continue;
      }
      try {
        const auto doc = json::parse(payload);
        const std::string piece = content_of(doc.at("choices").at(0), "delta");
        if (!piece.empty()) {
          sink(StreamChunk{piece, std::nullopt});
          assembled += piece;
        }
      } catch (const json::exception&) {
        bad_payload = true;
        return false;
      }
    }
    return true;
  };

  httplib::Response res;
  httplib::Error err = httplib::Error::Success;
  const bool ok = cli.send(req, res, err);
  if (status != 0 && status != 200) raise_for_status(status, headers, error_body);
  if (!ok || bad_payload) {
    const ErrorCode code = bad_payload ? ErrorCode::MalformedResponse : ErrorCode::Timeout;
    sink(StreamChunk{"", code});
    if (bad_payload) throw Error(code, "provider stream carried an unparseable event");
    raise_transport(err);
  }
  if (assembled.empty()) throw Error(ErrorCode::MalformedResponse, "provider stream had no chunks");
  return assembled;
}

std::shared_ptr<Provider> make_provider_from_env() {
  auto env = [](const char* name) -> std::string {
    const char* v = std::getenv(name);
    return v ? v : "";
  };
  std::shared_ptr<Provider> inner;
  if (const auto script = env("VCHATTER_MOCK_SCRIPT"); !script.empty()) {
    inner = std::make_shared<ScriptedProvider>(ScriptedProvider::load_script(script));
  } else {
    const auto url = env("VCHATTER_PROVIDER_URL");
    if (url.empty()) {
      throw Error(ErrorCode::Validation,
                  "set VCHATTER_MOCK_SCRIPT or VCHATTER_PROVIDER_URL to choose a provider");
    }
    inner = std::make_shared<HttpProvider>(
        HttpProviderConfig{url, env("VCHATTER_PROVIDER_KEY"), env("VCHATTER_MODEL")});
  }
  return std::make_shared<RetryingProvider>(std::move(inner));
}

}  // namespace vchatter::provider
