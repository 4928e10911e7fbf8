#include "vchatter/protocol.hpp"

#include <algorithm>
#include <cctype>

#include "vchatter/error.hpp"

namespace vchatter {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::string_view level_name(ExposureLevel level) {
  switch (level) {
    case ExposureLevel::Low: return "Low";
    case ExposureLevel::Medium: return "Medium";
    case ExposureLevel::High: return "High";
  }
  return "Low";
}

std::optional<ExposureLevel> parse_level(std::string_view word) {
  const auto w = lower(word);
  if (w == "low" || w == "mild") return ExposureLevel::Low;
  if (w == "medium" || w == "moderate") return ExposureLevel::Medium;
  if (w == "high" || w == "severe") return ExposureLevel::High;
  return std::nullopt;
}

std::string_view gender_name(Gender g) {
  switch (g) {
    case Gender::Male: return "male";
    case Gender::Female: return "female";
    case Gender::Unspecified: return "unspecified";
  }
  return "unspecified";
}

std::optional<Gender> parse_gender(std::string_view word) {
  const auto w = lower(word);
  if (w == "male" || w == "man" || w == "m" || w == "boy") return Gender::Male;
  if (w == "female" || w == "woman" || w == "f" || w == "girl") return Gender::Female;
  if (w == "unspecified") return Gender::Unspecified;
  return std::nullopt;
}

namespace protocol {

namespace {

using nlohmann::json;

[[noreturn]] void illegal(Phase p, EventKind e) {
  throw Error(ErrorCode::IllegalTransition, "event " + std::string(event_name(e)) +
                                                " is not legal in phase " +
                                                std::string(phase_name(p)));
}

}  // namespace

std::string_view phase_name(Phase p) {
  switch (p) {
    case Phase::Assessment: return "Assessment";
    case Phase::Planning: return "Planning";
    case Phase::ScenarioSetup: return "ScenarioSetup";
    case Phase::Exposure: return "Exposure";
    case Phase::Debrief: return "Debrief";
    case Phase::DayComplete: return "DayComplete";
    case Phase::FinalSummary: return "FinalSummary";
    case Phase::Closed: return "Closed";
  }
  return "Closed";
}

std::optional<Phase> parse_phase(std::string_view s) {
  for (Phase p : kAllPhases) {
    if (phase_name(p) == s) return p;
  }
  return std::nullopt;
}

std::string_view event_name(EventKind e) {
  switch (e) {
    case EventKind::AssessmentDone: return "AssessmentDone";
    case EventKind::PlanConfirmed: return "PlanConfirmed";
    case EventKind::ScenarioInstantiated: return "ScenarioInstantiated";
    case EventKind::HelpRequested: return "HelpRequested";
    case EventKind::TaskCompleted: return "TaskCompleted";
    case EventKind::DebriefDone: return "DebriefDone";
    case EventKind::DayClosed: return "DayClosed";
  }
  return "DayClosed";
}

std::optional<EventKind> parse_event(std::string_view s) {
  for (EventKind e : kAllEvents) {
    if (event_name(e) == s) return e;
  }
  return std::nullopt;
}

std::string_view outcome_name(TaskOutcome o) { return o == TaskOutcome::Success ? "success" : "failed"; }

ExposureLevel level_for_day(int day) {
  static constexpr std::array<ExposureLevel, kDays> kSchedule{
      ExposureLevel::Low,    ExposureLevel::Low,  ExposureLevel::Medium,
      ExposureLevel::Medium, ExposureLevel::High, ExposureLevel::High};
  if (day < 1 || day > kDays) {
    throw Error(ErrorCode::Validation, "protocol day " + std::to_string(day) + " outside 1..6");
  }
  return kSchedule[static_cast<std::size_t>(day - 1)];
}

int agent_h_count(ExposureLevel level) { return level == ExposureLevel::High ? 2 : 1; }

int expected_duration(ExposureLevel level) {
  switch (level) {
    case ExposureLevel::Low: return 10;
    case ExposureLevel::Medium: return 20;
    case ExposureLevel::High: return 30;
  }
  return 10;
}

SessionState new_session(std::string session_id, std::string participant_ref,
                         std::int64_t created_at_ms) {
  SessionState s;
  s.session_id = std::move(session_id);
  s.participant_ref = std::move(participant_ref);
  for (int d = 1; d <= kDays; ++d) s.schedule[static_cast<std::size_t>(d - 1)] = level_for_day(d);
  s.created_at_ms = created_at_ms;
  s.updated_at_ms = created_at_ms;
  return s;
}

std::optional<Phase> next_phase(Phase phase, EventKind event, int day) {
  switch (phase) {
    case Phase::Assessment:
      if (event == EventKind::AssessmentDone) return Phase::Planning;
      break;
    case Phase::Planning:
      if (event == EventKind::PlanConfirmed) return Phase::ScenarioSetup;
      break;
    case Phase::ScenarioSetup:
      if (event == EventKind::ScenarioInstantiated) return Phase::Exposure;
      break;
    case Phase::Exposure:
      if (event == EventKind::TaskCompleted) return Phase::Debrief;
      if (event == EventKind::HelpRequested) return Phase::Exposure;
      break;
    case Phase::Debrief:
      if (event == EventKind::DebriefDone) {
        return day >= kDays ? Phase::FinalSummary : Phase::DayComplete;
      }
      break;
    case Phase::DayComplete:
      if (event == EventKind::DayClosed) return Phase::Planning;
      break;
    case Phase::FinalSummary:
      if (event == EventKind::DayClosed) return Phase::Closed;
      break;
    case Phase::Closed:
      break;
  }
  return std::nullopt;
}

SessionState advance(const SessionState& state, const SessionEvent& event,
                     const ProtocolConfig& config) {
  if (state.phase == Phase::Closed) {
    throw Error(ErrorCode::SessionClosed, "session " + state.session_id + " is closed");
  }
  const auto target = next_phase(state.phase, event.kind, state.day);
  if (!target) illegal(state.phase, event.kind);

  SessionState next = state;
  next.phase = *target;
  next.updated_at_ms = std::max(state.updated_at_ms, event.at_ms);

  switch (event.kind) {
    case EventKind::PlanConfirmed: {
      if (!event.plan) {
        throw Error(ErrorCode::MissingPlan, "PlanConfirmed carries no plan card");
      }
      const ExposureLevel want = state.schedule[static_cast<std::size_t>(state.day - 1)];
      if (event.plan->level != want) {
        throw Error(ErrorCode::PlanLevelMismatch,
                    "day " + std::to_string(state.day) + " requires a " +
                        std::string(level_name(want)) + " plan, got " +
                        std::string(level_name(event.plan->level)));
      }
      if (static_cast<int>(event.plan->roles.size()) != agent_h_count(want)) {
        throw Error(ErrorCode::PlanLevelMismatch,
                    "a " + std::string(level_name(want)) + " plan needs " +
                        std::to_string(agent_h_count(want)) + " role(s)");
      }
      if (config.min_hours_between_days > 0.0 && state.day > 1) {
        const double gap_h = static_cast<double>(event.at_ms - state.day_closed_at_ms) / 3.6e6;
        if (gap_h < config.min_hours_between_days) {
          throw Error(ErrorCode::TooSoon, "day " + std::to_string(state.day) +
                                              " cannot start before the minimum gap has elapsed");
        }
      }
      next.active_plan = event.plan;
      break;
    }
    case EventKind::ScenarioInstantiated:
      if (!state.active_plan) {
        throw Error(ErrorCode::MissingPlan, "no confirmed plan to instantiate");
      }
      break;
    case EventKind::HelpRequested:
      ++next.help_requests;
      break;
    case EventKind::TaskCompleted:
      next.last_outcome = event.outcome.value_or(TaskOutcome::Success);
      break;
    case EventKind::DebriefDone:
      next.completed_days.insert(state.day);
      break;
    case EventKind::DayClosed:
      if (state.phase == Phase::DayComplete) {
        next.day = state.day + 1;
        next.active_plan.reset();
        next.last_outcome.reset();
        next.day_closed_at_ms = event.at_ms;
      }
      break;
    case EventKind::AssessmentDone:
      break;
  }
  return next;
}

json transition_table_json() {
  json rows = json::array();
  for (Phase p : kAllPhases) {
    for (EventKind e : kAllEvents) {
      if (p == Phase::Debrief && e == EventKind::DebriefDone) {
        rows.push_back({{"from", "Debrief"}, {"event", "DebriefDone"}, {"to", "DayComplete"},
                        {"when", "day < 6"}});
        rows.push_back({{"from", "Debrief"}, {"event", "DebriefDone"}, {"to", "FinalSummary"},
                        {"when", "day = 6"}});
        continue;
      }
      if (auto to = next_phase(p, e, 1)) {
        json row{{"from", phase_name(p)}, {"event", event_name(e)}, {"to", phase_name(*to)}};
        if (p == Phase::DayComplete) row["effect"] = "day += 1";
        if (e == EventKind::HelpRequested) row["effect"] = "hint only; phase unchanged";
        rows.push_back(row);
      }
    }
  }
  json levels = json::array();
  for (int d = 1; d <= kDays; ++d) {
    const auto lvl = level_for_day(d);
    levels.push_back({{"day", d},
                      {"level", level_name(lvl)},
                      {"agent_h_count", agent_h_count(lvl)},
                      {"expected_minutes", expected_duration(lvl)}});
  }
  json phases = json::array();
  for (Phase p : kAllPhases) phases.push_back(phase_name(p));
  return {{"version", 1}, {"phases", phases}, {"transitions", rows}, {"schedule", levels}};
}

json to_json(const ExposurePlanCard& c) {
  json roles = json::array();
  for (const auto& r : c.roles) {
    roles.push_back({{"name", r.name}, {"gender", gender_name(r.gender)}, {"profile_text", r.profile_text}});
  }
  return {{"level", level_name(c.level)},
          {"roles", roles},
          {"scenario_text", c.scenario_text},
          {"task_text", c.task_text},
          {"hints", c.hints}};
}

ExposurePlanCard plan_card_from_json(const json& j) {
  ExposurePlanCard c;
  const auto level = parse_level(j.at("level").get<std::string>());
  if (!level) throw Error(ErrorCode::Validation, "plan card: unknown level");
  c.level = *level;
  for (const auto& r : j.at("roles")) {
    RoleSpec role;
    role.name = r.at("name").get<std::string>();
    role.gender = parse_gender(r.value("gender", "unspecified")).value_or(Gender::Unspecified);
    role.profile_text = r.at("profile_text").get<std::string>();
    c.roles.push_back(std::move(role));
  }
  c.scenario_text = j.at("scenario_text").get<std::string>();
  c.task_text = j.at("task_text").get<std::string>();
  c.hints = j.value("hints", std::vector<std::string>{});
  return c;
}

json to_json(const SessionEvent& e) {
  json j{{"event", event_name(e.kind)}, {"at_ms", e.at_ms}};
  if (e.plan) j["plan"] = to_json(*e.plan);
  if (e.outcome) j["outcome"] = outcome_name(*e.outcome);
  return j;
}

SessionEvent event_from_json(const json& j) {
  SessionEvent e;
  const auto kind = parse_event(j.at("event").get<std::string>());
  if (!kind) throw Error(ErrorCode::CorruptLog, "unknown event kind in log");
  e.kind = *kind;
  e.at_ms = j.at("at_ms").get<std::int64_t>();
  if (j.contains("plan")) e.plan = plan_card_from_json(j.at("plan"));
  if (j.contains("outcome")) {
    e.outcome = j.at("outcome").get<std::string>() == "failed" ? TaskOutcome::Failed
                                                               : TaskOutcome::Success;
  }
  return e;
}

json to_json(const SessionState& s) {
  json schedule = json::array();
  for (auto lvl : s.schedule) schedule.push_back(level_name(lvl));
  json j{{"session_id", s.session_id},
         {"participant_ref", s.participant_ref},
         {"day", s.day},
         {"phase", phase_name(s.phase)},
         {"schedule", schedule},
         {"active_plan", s.active_plan ? to_json(*s.active_plan) : json(nullptr)},
         {"last_outcome", s.last_outcome ? json(outcome_name(*s.last_outcome)) : json(nullptr)},
         {"completed_days", s.completed_days},
         {"help_requests", s.help_requests},
         {"day_closed_at_ms", s.day_closed_at_ms},
         {"created_at_ms", s.created_at_ms},
         {"updated_at_ms", s.updated_at_ms}};
  return j;
}

SessionState state_from_json(const json& j) {
  SessionState s;
  s.session_id = j.at("session_id").get<std::string>();
  s.participant_ref = j.at("participant_ref").get<std::string>();
  s.day = j.at("day").get<int>();
  const auto phase = parse_phase(j.at("phase").get<std::string>());
  if (!phase) throw Error(ErrorCode::CorruptLog, "unknown phase in snapshot");
  s.phase = *phase;
  const auto& sched = j.at("schedule");
  if (!sched.is_array() || sched.size() != kDays) {
    throw Error(ErrorCode::CorruptLog, "snapshot schedule must have 6 entries");
  }
  for (std::size_t i = 0; i < kDays; ++i) {
    const auto lvl = parse_level(sched[i].get<std::string>());
    if (!lvl) throw Error(ErrorCode::CorruptLog, "unknown level in snapshot schedule");
    s.schedule[i] = *lvl;
  }
  if (!j.at("active_plan").is_null()) s.active_plan = plan_card_from_json(j.at("active_plan"));
  if (!j.at("last_outcome").is_null()) {
    s.last_outcome = j.at("last_outcome").get<std::string>() == "failed" ? TaskOutcome::Failed
                                                                         : TaskOutcome::Success;
  }
  s.completed_days = j.at("completed_days").get<std::set<int>>();
  s.help_requests = j.at("help_requests").get<int>();
  s.day_closed_at_ms = j.at("day_closed_at_ms").get<std::int64_t>();
  s.created_at_ms = j.at("created_at_ms").get<std::int64_t>();
  s.updated_at_ms = j.at("updated_at_ms").get<std::int64_t>();
  return s;
}

}  // namespace protocol
}  // namespace vchatter
