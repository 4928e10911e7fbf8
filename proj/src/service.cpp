#include "vchatter/service.hpp"

#include <chrono>
#include <random>

#include "vchatter/error.hpp"

namespace vchatter::service {

using nlohmann::json;
using protocol::EventKind;
using protocol::Phase;
using protocol::SessionEvent;
using protocol::SessionState;

// ---------------------------------------------------------------------------
// Errors

ApiError to_api_error(const Error& e) {
  return {std::string(code_name(e.code())), e.what(), is_retryable(e.code()), e.details()};
}

json to_json(const ApiError& e) {
  json j{{"code", e.code}, {"message", e.message}, {"retryable", e.retryable}};
  if (!e.details.empty()) j["details"] = e.details;
  return j;
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound:
      return 404;
    case ErrorCode::IllegalTransition:
    case ErrorCode::SessionClosed:
    case ErrorCode::WrongPhase:
    case ErrorCode::ChannelMismatch:
    case ErrorCode::TimingViolation:
    case ErrorCode::NoStagedPlan:
    case ErrorCode::TooSoon:
    case ErrorCode::Busy:
      return 409;
    case ErrorCode::MissingSection:
    case ErrorCode::EmptySection:
    case ErrorCode::DuplicateSection:
    case ErrorCode::RoleCountMismatch:
    case ErrorCode::LevelMismatch:
    case ErrorCode::PlanValidation:
    case ErrorCode::PlanLevelMismatch:
    case ErrorCode::MissingPlan:
    case ErrorCode::InsufficientCohort:
    case ErrorCode::NoEffectiveSamples:
    case ErrorCode::InsufficientData:
    case ErrorCode::MissingMeasure:
    case ErrorCode::ParticipantMismatch:
      return 422;
    case ErrorCode::Validation:
    case ErrorCode::BlankEdit:
    case ErrorCode::SlotOutOfRange:
      return 400;
    case ErrorCode::RateLimited:
      return 429;
    case ErrorCode::Timeout:
      return 504;
    case ErrorCode::MalformedResponse:
    case ErrorCode::AuthFailed:
    case ErrorCode::SynthesisFailed:
      return 502;
    case ErrorCode::CorruptLog:
    case ErrorCode::Storage:
      return 500;
  }
  return 500;
}

// ---------------------------------------------------------------------------
// Envelopes

MessageEnvelope envelope_of(const TranscriptEntry& e, const SessionState& s) {
  return {e.seq,        e.channel.id(),  e.author.id(), e.text,
          e.sentiment,  e.expression,    e.audio,       e.audio_warning,
          e.hint,       std::string(protocol::phase_name(s.phase)), s.day};
}

json to_json(const MessageEnvelope& m) {
  json j{{"seq", m.seq},          {"channel", m.channel},
         {"author", m.author},    {"text", m.text},
         {"sentiment", presence::sentiment_name(m.sentiment)},
         {"phase", m.phase},      {"day", m.day}};
  j["expression"] = m.expression ? json(presence::expression_name(*m.expression)) : json(nullptr);
  j["audio_ref"] = m.audio ? presence::to_json(*m.audio) : json(nullptr);
  if (m.audio_warning) j["audio_warning"] = true;
  if (m.hint) j["hint"] = true;
  return j;
}

json to_json(const ChatResult& r) {
  json j{{"reply", to_json(r.reply)}, {"state", protocol::to_json(r.state)}};
  if (r.participant) j["participant"] = to_json(*r.participant);
  if (r.staged_plan) j["staged_plan"] = protocol::to_json(*r.staged_plan);
  if (r.plan_error) j["plan_error"] = to_json(*r.plan_error);
  if (!r.warnings.empty()) j["warnings"] = r.warnings;
  return j;
}

Clock system_clock() {
  return [] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
  };
}

IdGenerator random_ids() {
  auto rng = std::make_shared<std::mt19937_64>(std::random_device{}());
  auto mu = std::make_shared<std::mutex>();
  return [rng, mu] {
    std::lock_guard lock(*mu);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string id = "s-";
    for (int i = 0; i < 16; ++i) id += kHex[(*rng)() & 0xF];
    return id;
  };
}

agents::PlanEdits plan_edits_from_json(const json& j) {
  agents::PlanEdits edits;
  if (j.is_null()) return edits;
  try {
    if (j.contains("roles")) {
      for (const auto& r : j.at("roles")) {
        std::optional<std::string> text;
        std::optional<Gender> gender;
        if (r.is_object()) {
          if (r.contains("text")) text = r["text"].get<std::string>();
          if (r.contains("gender")) {
            gender = parse_gender(r["gender"].get<std::string>());
            if (!gender) throw Error(ErrorCode::Validation, "unknown gender in plan edit");
          }
        } else if (r.is_string()) {
          text = r.get<std::string>();
        } else if (!r.is_null()) {
          throw Error(ErrorCode::Validation, "role edits must be objects, strings or null");
        }
        edits.role_texts.push_back(text);
        edits.role_genders.push_back(gender);
      }
    }
    if (j.contains("scenario")) edits.scenario_text = j.at("scenario").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Validation, std::string("plan edits: ") + e.what());
  }
  return edits;
}

stats::OutcomeReport outcomes_from_store(const store::Store& store) {
  const auto records = store.export_cohort();
  if (records.size() < 2) {
    throw Error(ErrorCode::InsufficientCohort,
                "outcome report needs at least 2 participants with pre and post scales, have " +
                    std::to_string(records.size()));
  }
  std::map<std::string, stats::PairedSample> cohort;
  for (const auto& m : stats::outcome_measures()) {
    auto& sample = cohort[m];
    for (const auto& r : records) {
      sample.pre.push_back(r.pre.at(m));
      sample.post.push_back(r.post.at(m));
    }
  }
  return stats::build_outcome_report(cohort);
}

std::map<int, ExposurePlanCard> confirmed_plans(const store::StoredSession& s) {
  std::map<int, ExposurePlanCard> out;
  int day = 1;
  for (const auto& e : s.events) {
    if (e.kind == EventKind::PlanConfirmed && e.plan) out[day] = *e.plan;
    // Day advances on DayClosed; the final DayClosed closes the session.
    if (e.kind == EventKind::DayClosed) ++day;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Service

class Service::SessionGuard {
 public:
  SessionGuard(Service& svc, const std::string& session_id)
      : lock_(svc.session_mutex(session_id), std::try_to_lock) {
    if (!lock_.owns_lock()) {
      throw Error(ErrorCode::Busy, "session " + session_id + " is handling another request");
    }
  }

 private:
  std::unique_lock<std::mutex> lock_;
};

Service::Service(std::shared_ptr<store::Store> store, std::shared_ptr<provider::Provider> provider,
                 std::shared_ptr<presence::Synthesizer> synth, ServiceConfig config, Clock clock,
                 IdGenerator ids)
    : store_(std::move(store)),
      provider_(std::move(provider)),
      synth_(synth ? std::move(synth) : std::make_shared<presence::NullSynthesizer>()),
      config_(std::move(config)),
      clock_(std::move(clock)),
      ids_(std::move(ids)),
      templates_(config_.asset_dir / "templates"),
      lexicon_(presence::Lexicon::load(config_.asset_dir / "lexicon.txt")),
      catalog_(instruments::InstrumentCatalog::load(config_.asset_dir / "instruments.json")) {
  if (!store_ || !provider_) throw Error(ErrorCode::Validation, "service needs a store and a provider");
}

std::mutex& Service::session_mutex(const std::string& session_id) {
  std::lock_guard g(sessions_mu_);
  auto& slot = session_mutexes_[session_id];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

std::string Service::create_session(const std::string& pseudonym, bool opt_in) {
  if (!store::valid_pseudonym(pseudonym)) {
    throw Error(ErrorCode::Validation,
                "pseudonym must be 1-64 letters, digits, '-' or '_' (no display names)");
  }
  const std::string id = ids_();
  store_->create_session(protocol::new_session(id, pseudonym, clock_()), opt_in);
  return id;
}

SessionState Service::get_session(const std::string& session_id) const {
  return store_->snapshot(session_id);
}

json Service::session_view(const std::string& session_id) const {
  const auto state = store_->snapshot(session_id);
  json j{{"state", protocol::to_json(state)}};
  if (auto staged = store_->staged_plan(session_id)) j["staged_plan"] = protocol::to_json(*staged);
  json channels = json::object();
  for (const auto& ch : store_->channels(session_id)) {
    json turns = json::array();
    for (const auto& e : store_->read_channel(session_id, ch)) turns.push_back(vchatter::to_json(e));
    channels[ch.id()] = turns;
  }
  j["channels"] = channels;
  return j;
}

TranscriptEntry Service::turn(const Channel& ch, Author author, std::string text,
                              const SessionState& s) {
  TranscriptEntry e;
  e.channel = ch;
  e.author = std::move(author);
  e.text = std::move(text);
  e.timestamp_ms = clock_();
  provider::CompletionParams p = config_.params;
  p.tag = provider::RequestTag{"sentiment", s.day, std::string(protocol::phase_name(s.phase))};
  e.sentiment = presence::classify_sentiment(e.text, lexicon_,
                                             config_.provider_sentiment ? provider_.get() : nullptr, p);
  return e;
}

MessageEnvelope Service::persist(const std::string& session_id, TranscriptEntry entry,
                                 const agents::AgentProfile* speaker) {
  if (speaker != nullptr) {
    entry.expression = presence::expression_for(entry.sentiment, *speaker, config_.expressions);
    try {
      entry.audio = synth_->synthesize(entry.text, speaker->voice_id);
    } catch (const Error&) {
      entry.audio_warning = true;  // the text still goes out
    }
  }
  entry.seq = store_->append_turn(session_id, entry);
  return envelope_of(entry, store_->snapshot(session_id));
}

std::string Service::generate(const std::string& session_id, const agents::PromptBundle& bundle,
                              const provider::RequestTag& tag, const provider::ChunkSink& sink) {
  if (observer_) observer_(session_id, tag, bundle);
  provider::CompletionParams p = config_.params;
  p.tag = tag;
  const auto messages = bundle.messages();
  return sink ? provider_->complete_streaming(messages, p, sink) : provider_->complete(messages, p);
}

agents::TherapistContext Service::therapist_context(const std::string& session_id,
                                                    const SessionState& s) const {
  agents::TherapistContext ctx;
  const auto stored = store_->load_session(session_id);
  auto it = stored.scales.find({std::string(instruments::kLsasId), store::Timing::Pre});
  if (it != stored.scales.end() && it->second.lsas) ctx.lsas = it->second.lsas;
  const ExposureLevel level = s.schedule[static_cast<std::size_t>(s.day - 1)];
  if (s.phase == Phase::Planning && level != ExposureLevel::High && s.day > 1 &&
      protocol::level_for_day(s.day - 1) == level) {
    const auto plans = confirmed_plans(stored);
    auto prev = plans.find(s.day - 1);
    if (prev != plans.end() && !prev->second.roles.empty()) {
      const Gender g = prev->second.roles.front().gender;
      if (g == Gender::Male) ctx.required_gender = Gender::Female;
      if (g == Gender::Female) ctx.required_gender = Gender::Male;
    }
  }
  return ctx;
}

SessionState Service::fire(const std::string& session_id, SessionEvent event) {
  event.at_ms = clock_();
  return store_->apply_event(session_id, event, config_.protocol);
}

ChatResult Service::post_therapist_message(const std::string& session_id, const std::string& text,
                                           bool finish, const provider::ChunkSink& sink) {
  SessionGuard guard(*this, session_id);
  auto state = store_->snapshot(session_id);
  if (state.phase == Phase::Closed) {
    throw Error(ErrorCode::SessionClosed, "session " + session_id + " is closed");
  }
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw Error(ErrorCode::Validation, "message text is empty");
  }
  if (state.phase == Phase::DayComplete) {
    state = fire(session_id, {EventKind::DayClosed});
  }
  const bool open = state.phase == Phase::Assessment || state.phase == Phase::Planning ||
                    state.phase == Phase::Debrief || state.phase == Phase::FinalSummary;
  if (!open) {
    throw Error(ErrorCode::WrongPhase, "therapist chat is not available in phase " +
                                           std::string(protocol::phase_name(state.phase)));
  }
  if (finish && state.phase == Phase::Planning) {
    throw Error(ErrorCode::WrongPhase, "planning ends by confirming a plan, not by finishing");
  }

  ChatResult out;
  out.participant = persist(session_id, turn(Channel::therapist(), Author::participant(), text, state),
                            nullptr);
  const auto history = store_->read_channel(session_id, Channel::therapist());
  const auto ctx = therapist_context(session_id, state);
  const auto bundle = agents::build_agent_p_prompt(state, history, templates_, ctx);
  const std::string phase(protocol::phase_name(state.phase));
  const std::string reply =
      generate(session_id, bundle, {"therapist", state.day, phase}, sink);

  const auto therapist = agents::therapist_profile();
  out.reply = persist(session_id,
                      turn(Channel::therapist(), Author::agent("agent-p"), reply, state), &therapist);

  if (state.phase == Phase::Planning) {
    const ExposureLevel level = state.schedule[static_cast<std::size_t>(state.day - 1)];
    try {
      auto card = agents::parse_plan_card(reply, level);
      store_->stage_plan(session_id, card);
      out.warnings = agents::plan_warnings(card);
      out.staged_plan = std::move(card);
    } catch (const Error& e) {
      out.plan_error = to_api_error(e);
    }
  }
  if (finish) {
    EventKind k = EventKind::DayClosed;  // FinalSummary -> Closed
    if (state.phase == Phase::Assessment) k = EventKind::AssessmentDone;
    if (state.phase == Phase::Debrief) k = EventKind::DebriefDone;
    state = fire(session_id, {k});
  }
  out.state = store_->snapshot(session_id);
  return out;
}

ConfirmResult Service::confirm_plan(const std::string& session_id, const agents::PlanEdits& edits) {
  SessionGuard guard(*this, session_id);
  auto state = store_->snapshot(session_id);
  if (state.phase != Phase::Planning) {
    throw Error(ErrorCode::WrongPhase, "plans can only be confirmed during planning");
  }
  auto staged = store_->staged_plan(session_id);
  if (!staged) throw Error(ErrorCode::NoStagedPlan, "no plan card has been staged yet");
  const auto card = agents::apply_user_edits(*staged, edits);

  ConfirmResult out;
  out.warnings = agents::plan_warnings(card);
  if (card.level != ExposureLevel::High) {
    const auto plans = confirmed_plans(store_->load_session(session_id));
    for (const auto& [day, prev] : plans) {
      if (day == state.day || prev.level != card.level) continue;
      std::vector<std::string> blocking;
      for (const auto& v : agents::validate_level_pair(prev, card)) {
        if (v.kind == agents::PairViolation::Kind::GenderPairViolation) {
          blocking.push_back(v.message);
        } else {
          out.warnings.push_back(v.message);
        }
      }
      if (!blocking.empty()) {
        throw Error(ErrorCode::PlanValidation, blocking.front(), blocking);
      }
    }
  }
  SessionEvent confirmed{EventKind::PlanConfirmed};
  confirmed.plan = card;
  fire(session_id, confirmed);
  store_->clear_staged_plan(session_id);
  out.state = fire(session_id, {EventKind::ScenarioInstantiated});
  return out;
}

ChatResult Service::post_scenario_message(const std::string& session_id, int slot,
                                          const std::string& text, bool help,
                                          const provider::ChunkSink& sink) {
  SessionGuard guard(*this, session_id);
  auto state = store_->snapshot(session_id);
  if (state.phase == Phase::Closed) {
    throw Error(ErrorCode::SessionClosed, "session " + session_id + " is closed");
  }
  if (state.phase != Phase::Exposure || !state.active_plan) {
    throw Error(ErrorCode::WrongPhase, "scenario chat is only available during exposure");
  }
  const auto& card = *state.active_plan;
  if (slot < 0 || slot >= static_cast<int>(card.roles.size())) {
    throw Error(ErrorCode::SlotOutOfRange, "day " + std::to_string(state.day) + " has " +
                                               std::to_string(card.roles.size()) +
                                               " interlocutor(s); slot " + std::to_string(slot) +
                                               " does not exist");
  }
  if (!help && text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw Error(ErrorCode::Validation, "message text is empty");
  }
  const Channel ch = Channel::scenario(state.day, slot);
  ChatResult out;

  if (help) {
    state = fire(session_id, {EventKind::HelpRequested});
    if (text.find_first_not_of(" \t\r\n") != std::string::npos) {
      auto t = turn(ch, Author::participant(), text, state);
      t.hint = true;
      out.participant = persist(session_id, std::move(t), nullptr);
    }
    const auto bundle = agents::build_hint_prompt(state, text, templates_,
                                                  therapist_context(session_id, state));
    const std::string reply = generate(session_id, bundle, {"therapist", state.day, "Exposure"}, sink);
    const auto therapist = agents::therapist_profile();
    auto t = turn(ch, Author::agent("agent-p"), reply, state);
    t.hint = true;
    out.reply = persist(session_id, std::move(t), &therapist);
    out.state = store_->snapshot(session_id);
    return out;
  }

  out.participant = persist(session_id, turn(ch, Author::participant(), text, state), nullptr);
  std::vector<TranscriptEntry> history;
  for (auto& e : store_->read_channel(session_id, ch)) {
    if (!e.hint) history.push_back(std::move(e));  // help exchanges stay out of the role-play
  }
  const auto bundle = agents::build_agent_h_prompt(card, slot, history, templates_);
  const std::string reply = generate(
      session_id, bundle, {"interlocutor-" + std::to_string(slot), state.day, "Exposure"}, sink);
  const auto profile = agents::interlocutor_profile(card.roles[static_cast<std::size_t>(slot)]);
  const std::string ref = "agent-h/" + std::to_string(state.day) + "/" + std::to_string(slot);
  out.reply = persist(session_id, turn(ch, Author::agent(ref), reply, state), &profile);
  out.state = store_->snapshot(session_id);
  return out;
}

ChatResult Service::complete_task(const std::string& session_id, protocol::TaskOutcome outcome,
                                  const std::string& summary, const provider::ChunkSink& sink) {
  SessionGuard guard(*this, session_id);
  auto state = store_->snapshot(session_id);
  if (state.phase == Phase::Closed) {
    throw Error(ErrorCode::SessionClosed, "session " + session_id + " is closed");
  }
  if (state.phase != Phase::Exposure) {
    throw Error(ErrorCode::WrongPhase, "tasks can only be completed during exposure");
  }
  SessionEvent done{EventKind::TaskCompleted};
  done.outcome = outcome;
  state = fire(session_id, done);

  // The debrief sees the therapist channel and the participant's own summary only.
  const auto history = store_->read_channel(session_id, Channel::therapist());
  const auto bundle = agents::build_debrief_prompt(state, history, summary, templates_,
                                                   therapist_context(session_id, state));
  ChatResult out;
  if (summary.find_first_not_of(" \t\r\n") != std::string::npos) {
    out.participant =
        persist(session_id, turn(Channel::therapist(), Author::participant(), summary, state), nullptr);
  }
  const std::string reply = generate(session_id, bundle, {"therapist", state.day, "Debrief"}, sink);
  const auto therapist = agents::therapist_profile();
  out.reply = persist(session_id,
                      turn(Channel::therapist(), Author::agent("agent-p"), reply, state), &therapist);
  out.state = store_->snapshot(session_id);
  return out;
}

instruments::ScaleScore Service::submit_scale(const std::string& session_id,
                                              const std::string& instrument, store::Timing timing,
                                              const json& payload) {
  SessionGuard guard(*this, session_id);
  const auto state = store_->snapshot(session_id);
  if (!catalog_.contains(instrument)) {
    throw Error(ErrorCode::Validation, "unknown instrument: " + instrument);
  }
  if (timing == store::Timing::Pre && state.completed_days.count(1) != 0) {
    throw Error(ErrorCode::TimingViolation, "pre-study scales close once day 1 is complete");
  }
  if (timing == store::Timing::Post && state.phase != Phase::FinalSummary &&
      state.phase != Phase::Closed) {
    throw Error(ErrorCode::TimingViolation, "post-study scales open after the final summary");
  }
  auto score = instruments::score_payload(instrument, payload, catalog_);
  store_->put_scale(session_id, instrument, timing, score);
  return score;
}

stats::OutcomeReport Service::get_outcomes() const { return outcomes_from_store(*store_); }

}  // namespace vchatter::service
