#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "vchatter/plan_card.hpp"

namespace vchatter::protocol {

inline constexpr int kDays = 6;

enum class Phase {
  Assessment,
  Planning,
  ScenarioSetup,
  Exposure,
  Debrief,
  DayComplete,
  FinalSummary,
  Closed,
};

enum class EventKind {
  AssessmentDone,
  PlanConfirmed,
  ScenarioInstantiated,
  HelpRequested,
  TaskCompleted,
  DebriefDone,
  DayClosed,
};

enum class TaskOutcome { Success, Failed };

inline constexpr Phase kAllPhases[] = {
    Phase::Assessment,  Phase::Planning,    Phase::ScenarioSetup, Phase::Exposure,
    Phase::Debrief,     Phase::DayComplete, Phase::FinalSummary,  Phase::Closed,
};
inline constexpr EventKind kAllEvents[] = {
    EventKind::AssessmentDone, EventKind::PlanConfirmed, EventKind::ScenarioInstantiated,
    EventKind::HelpRequested,  EventKind::TaskCompleted, EventKind::DebriefDone,
    EventKind::DayClosed,
};

std::string_view phase_name(Phase p);
std::optional<Phase> parse_phase(std::string_view s);
std::string_view event_name(EventKind e);
std::optional<EventKind> parse_event(std::string_view s);
std::string_view outcome_name(TaskOutcome o);

struct SessionEvent {
  EventKind kind = EventKind::AssessmentDone;
  std::int64_t at_ms = 0;
  std::optional<ExposurePlanCard> plan;   // PlanConfirmed
  std::optional<TaskOutcome> outcome;     // TaskCompleted

  bool operator==(const SessionEvent&) const = default;
};

struct SessionState {
  std::string session_id;
  std::string participant_ref;
  int day = 1;
  Phase phase = Phase::Assessment;
  std::array<ExposureLevel, kDays> schedule{};
  std::optional<ExposurePlanCard> active_plan;
  std::optional<TaskOutcome> last_outcome;
  std::set<int> completed_days;
  int help_requests = 0;
  std::int64_t day_closed_at_ms = 0;
  std::int64_t created_at_ms = 0;
  std::int64_t updated_at_ms = 0;

  bool operator==(const SessionState&) const = default;
};

struct ProtocolConfig {
  // Minimum wall-clock gap between closing one day and confirming the next plan.
  double min_hours_between_days = 0.0;
};

/// Exposure level for a protocol day (1-based): each level is visited twice.
ExposureLevel level_for_day(int day);

/// Number of simultaneous interlocutors: two at High, otherwise one.
int agent_h_count(ExposureLevel level);

/// Typical scenario length in minutes, for progress display.
int expected_duration(ExposureLevel level);

SessionState new_session(std::string session_id, std::string participant_ref,
                         std::int64_t created_at_ms);

/// Pure transition function. Throws IllegalTransition, SessionClosed,
/// MissingPlan, PlanLevelMismatch, or TooSoon.
SessionState advance(const SessionState& state, const SessionEvent& event,
                     const ProtocolConfig& config = {});

/// The phase reached by a legal (phase, event) pair, if any, ignoring payload checks.
/// For Debrief/DebriefDone the day decides between DayComplete and FinalSummary.
std::optional<Phase> next_phase(Phase phase, EventKind event, int day);

/// Machine-readable transition table for UI state mirroring.
nlohmann::json transition_table_json();

nlohmann::json to_json(const SessionEvent& e);
SessionEvent event_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SessionState& s);
SessionState state_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExposurePlanCard& c);
ExposurePlanCard plan_card_from_json(const nlohmann::json& j);

}  // namespace vchatter::protocol
