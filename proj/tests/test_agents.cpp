#include <doctest.h>

#include <thread>

#include "plan_variants.hpp"
#include "support.hpp"
#include "vchatter/agents.hpp"

using namespace vchatter;
using namespace vchatter::agents;
using vtest::error_of;
namespace fs = std::filesystem;
using vtest::hui_text;
using vtest::kHuiRole;
using vtest::kHuiScenario;
using vtest::kHuiTask;
using vtest::replace_once;

namespace {

ExposurePlanCard high_card() {
  ExposurePlanCard c;
  c.level = ExposureLevel::High;
  c.roles = {{"Wei", Gender::Male, "A loud classmate who interrupts."},
             {"Fang", Gender::Female, "A shy classmate who whispers.\nShe likes cats."}};
  c.scenario_text = "A group project meeting in the library.";
  c.task_text = "Propose a plan and get both to agree.";
  c.hints = {"Start with a greeting", "Ask Fang first"};
  return c;
}

}  // namespace

TEST_CASE("hui card parses to the exact partition") {
  const auto card = parse_plan_card(hui_text(), ExposureLevel::Low);
  REQUIRE(card.roles.size() == 1);
  CHECK(card.level == ExposureLevel::Low);
  CHECK(card.roles[0].profile_text == kHuiRole);
  CHECK(card.roles[0].name == "Hui");
  CHECK(card.roles[0].gender == Gender::Unspecified);
  CHECK(card.scenario_text == kHuiScenario);
  CHECK(card.task_text == kHuiTask);
  CHECK(card.hints.empty());
  CHECK(plan_warnings(card).size() == 1);
  CHECK(parse_plan_card(hui_text(), ExposureLevel::Low, {true}) == card);
}

TEST_CASE("render and parse round trip") {
  const auto hui = parse_plan_card(hui_text(), ExposureLevel::Low);
  CHECK(parse_plan_card(render_plan_card(hui), ExposureLevel::Low) == hui);
  CHECK(parse_plan_card(render_plan_card(hui), ExposureLevel::Low, {true}) == hui);

  const auto high = high_card();
  const auto text = render_plan_card(high);
  CHECK(text.rfind("Exposure Level: High\n", 0) == 0);
  CHECK(parse_plan_card(text, ExposureLevel::High) == high);
  CHECK(parse_plan_card(text, ExposureLevel::High, {true}) == high);
  CHECK(plan_warnings(high).empty());

  auto medium = hui;
  medium.level = ExposureLevel::Medium;
  medium.roles[0].gender = Gender::Female;
  medium.hints = {"Speak first"};
  CHECK(parse_plan_card(render_plan_card(medium), ExposureLevel::Medium) == medium);
}

TEST_CASE("lenient header forms") {
  const std::string h = hui_text();
  const auto base = parse_plan_card(h, ExposureLevel::Low);
  std::string marked = replace_once(h, "Interaction Role:", "**Interaction Role:**");
  marked = replace_once(marked, "Exposure Scenario:", "### exposure scenario\xEF\xBC\x9A");
  marked = replace_once(marked, "Your Task:", "YOUR TASK");
  CHECK(parse_plan_card(marked, ExposureLevel::Low) == base);

  const std::string chatty = "Great work today! Here is tomorrow's plan.\n\n" +
                             replace_once(h, "Your Task:\n", "Your Task: ") + "\nGood luck!";
  const auto c = parse_plan_card(chatty, ExposureLevel::Low);
  CHECK(c.task_text == kHuiTask + "\nGood luck!");
  CHECK(c.roles[0].profile_text == kHuiRole);

  CHECK(parse_plan_card("Exposure Level: mild\n\n" + h, ExposureLevel::Low) == base);
}

TEST_CASE("name and gender lines") {
  const auto c = parse_plan_card(
      "Interaction Role:\nName: Chen\nGender: Male\nA neighbour who walks his dog.\n"
      "Exposure Scenario:\nThe lift.\nYour Task:\nSay good morning.\nHints:\n- smile\n* nod\n",
      ExposureLevel::Low);
  CHECK(c.roles[0].name == "Chen");
  CHECK(c.roles[0].gender == Gender::Male);
  CHECK(c.roles[0].profile_text == "A neighbour who walks his dog.");
  CHECK(c.hints == std::vector<std::string>{"smile", "nod"});

  const auto unnamed = parse_plan_card("Interaction Role:\nsomeone at the bus stop\nExposure Scenario:\nx\nYour Task:\ny\n",
                                       ExposureLevel::Low);
  CHECK(unnamed.roles[0].name == "Character-1");
}

TEST_CASE("malformed variants each raise the documented error") {
  const auto variants = vtest::malformed_variants();
  CHECK(variants.size() >= 20);
  for (const auto& v : variants) {
    CAPTURE(v.label);
    CHECK(error_of([&] { parse_plan_card(v.text, v.level, {v.strict}); }) == v.expected);
  }
}

TEST_CASE("role count error carries expected and found") {
  try {
    parse_plan_card(hui_text(), ExposureLevel::High);
    FAIL("expected RoleCountMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RoleCountMismatch);
    CHECK(e.details() == std::vector<std::string>{"2", "1"});
  }
  try {
    parse_plan_card(replace_once(hui_text(), "Your Task:\n", ""), ExposureLevel::Low);
  } catch (const Error& e) {
    CHECK(e.details() == std::vector<std::string>{"Your Task"});
  }
}

TEST_CASE("user edits") {
  const auto card = high_card();
  PlanEdits edits;
  edits.role_texts = {std::nullopt, std::string("Name: Mei\nGender: female\nA calm librarian.")};
  edits.scenario_text = "  The cafeteria.  ";
  const auto out = apply_user_edits(card, edits);
  CHECK(out.roles[0] == card.roles[0]);
  CHECK(out.roles[1].name == "Mei");
  CHECK(out.roles[1].profile_text == "A calm librarian.");
  CHECK(out.scenario_text == "The cafeteria.");
  CHECK(out.task_text == card.task_text);

  PlanEdits named;
  named.role_texts = {std::string("A baker named Lin who hums.")};
  named.role_genders = {Gender::Female};
  const auto n = apply_user_edits(card, named);
  CHECK(n.roles[0].name == "Lin");
  CHECK(n.roles[0].gender == Gender::Female);

  PlanEdits blank;
  blank.role_texts = {std::string("   ")};
  CHECK(error_of([&] { apply_user_edits(card, blank); }) == ErrorCode::BlankEdit);
  PlanEdits blank_scene;
  blank_scene.scenario_text = "\n";
  CHECK(error_of([&] { apply_user_edits(card, blank_scene); }) == ErrorCode::BlankEdit);
  PlanEdits extra;
  extra.role_texts = {std::nullopt, std::nullopt, std::string("x")};
  CHECK(error_of([&] { apply_user_edits(card, extra); }) == ErrorCode::SlotOutOfRange);
  CHECK(PlanEdits{}.empty());
  CHECK_FALSE(edits.empty());
}

TEST_CASE("level pair gender rule") {
  auto a = parse_plan_card(hui_text(), ExposureLevel::Low);
  auto b = a;
  CHECK(validate_level_pair(a, b).at(0).kind == PairViolation::Kind::GenderUnspecified);
  a.roles[0].gender = Gender::Female;
  b.roles[0].gender = Gender::Female;
  CHECK(validate_level_pair(a, b).at(0).kind == PairViolation::Kind::GenderPairViolation);
  b.roles[0].gender = Gender::Male;
  CHECK(validate_level_pair(a, b).empty());
  CHECK(validate_level_pair(high_card(), high_card()).empty());
  CHECK(error_of([&] { validate_level_pair(a, high_card()); }) == ErrorCode::LevelMismatch);
}

TEST_CASE("profiles") {
  const auto t = therapist_profile();
  CHECK(t.display_name == "Miss.Tree");
  CHECK(t.gender == Gender::Female);
  CHECK(t.base_traits == std::vector<std::string>{"outgoing", "gentle", "listener", "patient"});
  const auto h = interlocutor_profile({"Wei", Gender::Male, "x"});
  CHECK(h.voice_id == "agent-h-male");
  CHECK(h.template_id == kAgentHTemplate);
  CHECK(interlocutor_profile({"Q", Gender::Unspecified, "x"}).voice_id == "agent-h-neutral");
}

TEST_CASE("templates") {
  CHECK(render_template("Hi {{ name }}, {{x}}!", {{"name", "Hui"}, {"x", "bye"}}) == "Hi Hui, bye!");
  try {
    render_template("{{a}} {{b}} {{c}}", {{"b", ""}});
    FAIL("expected Validation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Validation);
    CHECK(std::string(e.what()).find("a") != std::string::npos);
    CHECK(std::string(e.what()).find("c") != std::string::npos);
  }

  vtest::TempDir dir;
  TemplateStore store(dir.path());
  CHECK(error_of([&] { store.get("therapist"); }) == ErrorCode::NotFound);
  {
    std::ofstream(dir / "therapist.txt") << "v1 {{therapist_name}}";
  }
  CHECK(store.get("therapist") == "v1 {{therapist_name}}");
  {
    std::ofstream(dir / "therapist.txt") << "v2 {{therapist_name}}";
  }
  fs::last_write_time(dir / "therapist.txt", fs::last_write_time(dir / "therapist.txt") + std::chrono::seconds(5));
  CHECK(store.get("therapist") == "v2 {{therapist_name}}");
}

TEST_CASE("therapist prompts by phase") {
  TemplateStore templates(vtest::asset_dir() / "templates");
  auto s = protocol::new_session("s", "p", 0);
  TherapistContext ctx;
  ctx.lsas = instruments::LsasScore{40, 43, 83, instruments::LsasBand::ClinicalSAD};

  const auto assess = build_agent_p_prompt(s, {}, templates, ctx);
  CHECK(assess.kind == AgentKind::Therapist);
  CHECK(assess.system_text.find("Miss.Tree") != std::string::npos);
  CHECK(assess.system_text.find("LSAS") != std::string::npos);
  CHECK(assess.system_text.find("83") != std::string::npos);
  CHECK(assess.system_text.find("{{") == std::string::npos);
  CHECK(assess.messages().front().role == provider::Role::System);

  s = protocol::advance(s, {protocol::EventKind::AssessmentDone});
  ctx.required_gender = Gender::Male;
  const auto plan = build_agent_p_prompt(s, {}, templates, ctx);
  CHECK(plan.system_text.find("Exposure Scenario:") != std::string::npos);
  CHECK(plan.system_text.find("must be male") != std::string::npos);
  CHECK(plan.system_text.find("Character-2") == std::string::npos);

  std::vector<TranscriptEntry> history{
      {1, Channel::therapist(), Author::participant(), "hello", presence::Sentiment::Neutral}};
  CHECK(build_agent_p_prompt(s, history, templates).context_messages.size() == 1);
  history.push_back({2, Channel::scenario(1, 0), Author::participant(), "hi Hui"});
  CHECK(error_of([&] { build_agent_p_prompt(s, history, templates); }).has_value());

  auto closed = s;
  closed.phase = protocol::Phase::Closed;
  CHECK(error_of([&] { build_agent_p_prompt(closed, {}, templates); }) == ErrorCode::SessionClosed);
  CHECK(error_of([&] { build_debrief_prompt(s, {}, "done", templates); }) == ErrorCode::WrongPhase);
  CHECK(error_of([&] { build_hint_prompt(s, "help", templates); }) == ErrorCode::WrongPhase);
}

TEST_CASE("debrief and hint prompts") {
  TemplateStore templates(vtest::asset_dir() / "templates");
  auto s = protocol::new_session("s", "p", 0);
  auto card = parse_plan_card(hui_text(), ExposureLevel::Low);
  card.hints = {"Offer to meet halfway"};
  s = protocol::advance(s, {protocol::EventKind::AssessmentDone});
  protocol::SessionEvent confirm{protocol::EventKind::PlanConfirmed};
  confirm.plan = card;
  s = protocol::advance(s, confirm);
  s = protocol::advance(s, {protocol::EventKind::ScenarioInstantiated});

  const auto hint = build_hint_prompt(s, "What do I say?", templates);
  CHECK(hint.system_text.find(kHuiTask) != std::string::npos);
  CHECK(hint.system_text.find("Offer to meet halfway") != std::string::npos);
  REQUIRE(hint.context_messages.size() == 1);
  CHECK(hint.context_messages[0].content == "What do I say?");

  protocol::SessionEvent failed{protocol::EventKind::TaskCompleted};
  failed.outcome = protocol::TaskOutcome::Failed;
  s = protocol::advance(s, failed);
  const auto d = build_debrief_prompt(s, {}, "I froze.", templates);
  CHECK(d.system_text.find("reasons for the failure") != std::string::npos);
  CHECK(d.context_messages.back().content == "I froze.");
  const auto quiet = build_debrief_prompt(s, {}, "  ", templates);
  CHECK(quiet.context_messages.back().content == "[The patient finished the task without a summary.]");
  CHECK(quiet.system_text.find("has not summarized") != std::string::npos);
}

TEST_CASE("interlocutor prompt") {
  TemplateStore templates(vtest::asset_dir() / "templates");
  const auto card = high_card();
  const std::vector<TranscriptEntry> history{
      {1, Channel::scenario(5, 1), Author::participant(), "Hi Fang"},
      {2, Channel::scenario(5, 1), Author::agent("agent-h/5/1"), "Oh, hello."}};
  const auto b = build_agent_h_prompt(card, 1, history, templates);
  CHECK(b.kind == AgentKind::Interlocutor);
  CHECK(b.system_text.find("She likes cats.") != std::string::npos);
  CHECK(b.system_text.find(card.scenario_text) != std::string::npos);
  CHECK(b.system_text.find("Wei") != std::string::npos);
  CHECK(b.system_text.find("loud classmate") == std::string::npos);
  CHECK(b.system_text.find(card.task_text) == std::string::npos);
  REQUIRE(b.context_messages.size() == 2);
  CHECK(b.context_messages[0].role == provider::Role::User);
  CHECK(b.context_messages[1].role == provider::Role::Assistant);

  CHECK(error_of([&] { build_agent_h_prompt(card, 2, {}, templates); }) == ErrorCode::SlotOutOfRange);
  CHECK(error_of([&] { build_agent_h_prompt(card, 0, history, templates); }) == ErrorCode::Validation);
}
