#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vchatter/agents.hpp"
#include "vchatter/instruments.hpp"
#include "vchatter/presence.hpp"
#include "vchatter/protocol.hpp"
#include "vchatter/provider.hpp"
#include "vchatter/stats.hpp"
#include "vchatter/store.hpp"

namespace vchatter::service {

/// Stable wire form of any engine error.
struct ApiError {
  std::string code;
  std::string message;
  bool retryable = false;
  std::vector<std::string> details;
};

ApiError to_api_error(const Error& e);
nlohmann::json to_json(const ApiError& e);
int http_status(ErrorCode code);

/// One persisted turn as the client sees it.
struct MessageEnvelope {
  std::int64_t seq = 0;
  std::string channel;
  std::string author;
  std::string text;
  presence::Sentiment sentiment = presence::Sentiment::Neutral;
  std::optional<presence::ExpressionState> expression;
  std::optional<presence::AudioRef> audio;
  bool audio_warning = false;
  bool hint = false;
  std::string phase;
  int day = 0;
};

MessageEnvelope envelope_of(const TranscriptEntry& e, const protocol::SessionState& s);
nlohmann::json to_json(const MessageEnvelope& m);

struct ChatResult {
  std::optional<MessageEnvelope> participant;  // absent when nothing was said
  MessageEnvelope reply;
  protocol::SessionState state;
  std::optional<ExposurePlanCard> staged_plan;  // Planning replies that parse
  std::optional<ApiError> plan_error;           // Planning replies that do not
  std::vector<std::string> warnings;
};

nlohmann::json to_json(const ChatResult& r);

struct ConfirmResult {
  protocol::SessionState state;
  std::vector<std::string> warnings;
};

struct ServiceConfig {
  std::filesystem::path asset_dir;  // templates/, lexicon.txt, instruments.json
  protocol::ProtocolConfig protocol;
  provider::CompletionParams params;
  presence::ExpressionTable expressions;
  bool provider_sentiment = false;  // ask the provider before falling back to the lexicon
};

/// Milliseconds since the epoch.
using Clock = std::function<std::int64_t()>;
using IdGenerator = std::function<std::string()>;

Clock system_clock();
IdGenerator random_ids();

/// Receives every prompt bundle sent to the provider, for audits.
using BundleObserver =
    std::function<void(const std::string& session_id, const provider::RequestTag& tag,
                       const agents::PromptBundle& bundle)>;

/// Session lifecycle, both agent kinds, plan confirmation, scales, outcomes.
/// A second concurrent mutation on one session fails with Busy.
class Service {
 public:
  Service(std::shared_ptr<store::Store> store, std::shared_ptr<provider::Provider> provider,
          std::shared_ptr<presence::Synthesizer> synth, ServiceConfig config,
          Clock clock = system_clock(), IdGenerator ids = random_ids());

  std::string create_session(const std::string& pseudonym, bool opt_in);
  protocol::SessionState get_session(const std::string& session_id) const;
  /// State plus staged plan, open channels, and their transcripts.
  nlohmann::json session_view(const std::string& session_id) const;

  /// Therapist turn. `finish` fires the current phase's completion event
  /// after the reply (Assessment, Debrief, FinalSummary). A message on a
  /// finished day first closes it.
  ChatResult post_therapist_message(const std::string& session_id, const std::string& text,
                                    bool finish = false, const provider::ChunkSink& sink = {});

  ConfirmResult confirm_plan(const std::string& session_id, const agents::PlanEdits& edits = {});

  /// Interlocutor turn on `slot`; with `help`, a therapist hint instead.
  ChatResult post_scenario_message(const std::string& session_id, int slot,
                                   const std::string& text, bool help = false,
                                   const provider::ChunkSink& sink = {});

  /// Ends the exposure and opens the debrief from the participant's summary.
  ChatResult complete_task(const std::string& session_id, protocol::TaskOutcome outcome,
                           const std::string& summary, const provider::ChunkSink& sink = {});

  instruments::ScaleScore submit_scale(const std::string& session_id, const std::string& instrument,
                                       store::Timing timing, const nlohmann::json& payload);

  stats::OutcomeReport get_outcomes() const;

  void set_bundle_observer(BundleObserver observer) { observer_ = std::move(observer); }
  store::Store& store() { return *store_; }
  const instruments::InstrumentCatalog& catalog() const { return catalog_; }

 private:
  class SessionGuard;
  std::mutex& session_mutex(const std::string& session_id);

  MessageEnvelope persist(const std::string& session_id, TranscriptEntry entry,
                          const agents::AgentProfile* speaker);
  std::string generate(const std::string& session_id, const agents::PromptBundle& bundle,
                       const provider::RequestTag& tag, const provider::ChunkSink& sink);
  agents::TherapistContext therapist_context(const std::string& session_id,
                                             const protocol::SessionState& s) const;
  TranscriptEntry turn(const Channel& ch, Author author, std::string text,
                       const protocol::SessionState& s);
  protocol::SessionState fire(const std::string& session_id, protocol::SessionEvent event);

  std::shared_ptr<store::Store> store_;
  std::shared_ptr<provider::Provider> provider_;
  std::shared_ptr<presence::Synthesizer> synth_;
  ServiceConfig config_;
  Clock clock_;
  IdGenerator ids_;
  agents::TemplateStore templates_;
  presence::Lexicon lexicon_;
  instruments::InstrumentCatalog catalog_;
  BundleObserver observer_;
  std::mutex sessions_mu_;
  std::map<std::string, std::unique_ptr<std::mutex>> session_mutexes_;
};

/// {"roles": [{"text"?, "gender"?} | null, ...], "scenario"?: "..."}
agents::PlanEdits plan_edits_from_json(const nlohmann::json& j);

/// Outcome report over every complete participant in `store`. Throws
/// InsufficientCohort below two.
stats::OutcomeReport outcomes_from_store(const store::Store& store);

/// Plan cards confirmed so far, keyed by day, recovered from the event log.
std::map<int, ExposurePlanCard> confirmed_plans(const store::StoredSession& s);

}  // namespace vchatter::service
