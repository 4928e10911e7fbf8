#include <doctest.h>

#include <functional>
#include <set>
#include <tuple>

#include "schedule_explorer.hpp"
#include "support.hpp"
#include "vchatter/protocol.hpp"

using namespace vchatter;
using namespace vchatter::protocol;
using vtest::error_of;

namespace {

ExposurePlanCard card(ExposureLevel level, std::size_t roles) {
  ExposurePlanCard c;
  c.level = level;
  for (std::size_t i = 0; i < roles; ++i) {
    c.roles.push_back({"R" + std::to_string(i), i % 2 ? Gender::Male : Gender::Female, "someone"});
  }
  c.scenario_text = "a place";
  c.task_text = "say hello";
  return c;
}

SessionEvent ev(EventKind k, std::int64_t at = 0) { return SessionEvent{k, at, std::nullopt, std::nullopt}; }

SessionEvent confirm(ExposureLevel level, std::size_t roles, std::int64_t at = 0) {
  auto e = ev(EventKind::PlanConfirmed, at);
  e.plan = card(level, roles);
  return e;
}

SessionState run(std::initializer_list<SessionEvent> events) {
  auto s = new_session("s", "p", 0);
  for (const auto& e : events) s = advance(s, e);
  return s;
}

}  // namespace

TEST_CASE("fixed schedule") {
  const auto s = new_session("s", "p", 5);
  CHECK(s.phase == Phase::Assessment);
  CHECK(s.day == 1);
  CHECK(s.schedule[0] == ExposureLevel::Low);
  CHECK(s.schedule[5] == ExposureLevel::High);
  CHECK(agent_h_count(ExposureLevel::Medium) == 1);
  CHECK(agent_h_count(ExposureLevel::High) == 2);
  CHECK(error_of([] { level_for_day(0); }) == ErrorCode::Validation);
  CHECK(error_of([] { level_for_day(7); }) == ErrorCode::Validation);
}

TEST_CASE("exhaustive exploration reaches one schedule only") {
  const auto res = vtest::explore_schedules();
  CHECK(res.unexpected_errors == 0);
  CHECK(res.closed_is_terminal);
  REQUIRE(res.completed.size() == 1);
  CHECK(*res.completed.begin() == vtest::expected_schedule());
}

TEST_CASE("wrong payloads are rejected") {
  const auto planning = run({ev(EventKind::AssessmentDone)});
  CHECK(planning.phase == Phase::Planning);
  CHECK(error_of([&] { advance(planning, ev(EventKind::PlanConfirmed)); }) == ErrorCode::MissingPlan);
  CHECK(error_of([&] { advance(planning, confirm(ExposureLevel::High, 2)); }) ==
        ErrorCode::PlanLevelMismatch);
  CHECK(error_of([&] { advance(planning, confirm(ExposureLevel::Low, 2)); }) ==
        ErrorCode::PlanLevelMismatch);
  CHECK(error_of([&] { advance(planning, ev(EventKind::TaskCompleted)); }) ==
        ErrorCode::IllegalTransition);
}

TEST_CASE("one full day") {
  auto done = ev(EventKind::TaskCompleted, 40);
  done.outcome = TaskOutcome::Failed;
  auto s = run({ev(EventKind::AssessmentDone, 10), confirm(ExposureLevel::Low, 1, 20),
                ev(EventKind::ScenarioInstantiated, 30), ev(EventKind::HelpRequested, 35), done});
  CHECK(s.phase == Phase::Debrief);
  CHECK(s.help_requests == 1);
  CHECK(s.last_outcome == TaskOutcome::Failed);
  CHECK(s.active_plan.has_value());
  s = advance(s, ev(EventKind::DebriefDone, 50));
  CHECK(s.phase == Phase::DayComplete);
  CHECK(s.completed_days == std::set<int>{1});
  s = advance(s, ev(EventKind::DayClosed, 60));
  CHECK(s.phase == Phase::Planning);
  CHECK(s.day == 2);
  CHECK_FALSE(s.active_plan.has_value());
  CHECK(s.day_closed_at_ms == 60);
  CHECK(s.updated_at_ms == 60);
}

TEST_CASE("minimum gap between days") {
  ProtocolConfig cfg{24.0};
  auto s = new_session("s", "p", 0);
  for (const auto& e : {ev(EventKind::AssessmentDone), confirm(ExposureLevel::Low, 1),
                        ev(EventKind::ScenarioInstantiated), ev(EventKind::TaskCompleted),
                        ev(EventKind::DebriefDone), ev(EventKind::DayClosed, 1000)}) {
    s = advance(s, e, cfg);
  }
  const std::int64_t hour = 3'600'000;
  CHECK(error_of([&] { advance(s, confirm(ExposureLevel::Low, 1, 1000 + 23 * hour), cfg); }) ==
        ErrorCode::TooSoon);
  CHECK(advance(s, confirm(ExposureLevel::Low, 1, 1000 + 24 * hour), cfg).phase == Phase::ScenarioSetup);
}

TEST_CASE("names and serialization round trip") {
  for (Phase p : kAllPhases) CHECK(parse_phase(phase_name(p)) == p);
  for (EventKind e : kAllEvents) CHECK(parse_event(event_name(e)) == e);
  CHECK_FALSE(parse_phase("Lunch").has_value());

  auto e = confirm(ExposureLevel::High, 2, 77);
  e.plan->hints = {"smile"};
  CHECK(event_from_json(to_json(e)) == e);
  auto t = ev(EventKind::TaskCompleted, 5);
  t.outcome = TaskOutcome::Success;
  CHECK(event_from_json(to_json(t)) == t);

  auto s = run({ev(EventKind::AssessmentDone, 3), confirm(ExposureLevel::Low, 1, 4)});
  CHECK(state_from_json(to_json(s)) == s);

  CHECK(error_of([] { event_from_json({{"event", "Nap"}, {"at_ms", 0}}); }) == ErrorCode::CorruptLog);
}

TEST_CASE("transition table export") {
  const auto t = transition_table_json();
  CHECK(t["schedule"].size() == 6);
  CHECK(t["schedule"][4]["agent_h_count"] == 2);
  int debrief_rows = 0;
  bool help_loop = false;
  for (const auto& row : t["transitions"]) {
    if (row["from"] == "Debrief") ++debrief_rows;
    if (row["event"] == "HelpRequested") help_loop = row["to"] == "Exposure";
    CHECK(row["from"] != "Closed");
  }
  CHECK(debrief_rows == 2);
  CHECK(help_loop);
}
