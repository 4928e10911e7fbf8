#include "vchatter/agents.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>

#include "vchatter/error.hpp"

namespace vchatter::agents {

namespace {

using protocol::Phase;
using protocol::SessionState;
using provider::ChatMessage;
using provider::Role;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

bool blank(std::string_view s) { return trim(s).empty(); }

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      if (!cur.empty() && cur.back() == '\r') cur.pop_back();
      lines.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty() && cur.back() == '\r') cur.pop_back();
  lines.push_back(std::move(cur));
  return lines;
}

std::string join_lines(const std::vector<std::string>& lines, std::size_t from, std::size_t to) {
  std::string out;
  for (std::size_t i = from; i < to; ++i) {
    if (i > from) out += '\n';
    out += lines[i];
  }
  return trim(out);
}

std::string level_word(ExposureLevel level) {
  switch (level) {
    case ExposureLevel::Low: return "mild (low)";
    case ExposureLevel::Medium: return "moderate (medium)";
    case ExposureLevel::High: return "severe (high)";
  }
  return "mild (low)";
}

// ---------------------------------------------------------------------------
// Header recognition

constexpr std::string_view kFullWidthColon = "\xEF\xBC\x9A";  // U+FF1A

bool is_markup(char c) { return c == '*' || c == '#' || c == '_' || c == '>' || c == '`'; }

// Strips surrounding markdown emphasis, heading marks, and list bullets.
std::string strip_markup(std::string_view s) {
  std::string t = trim(s);
  std::size_t b = 0;
  while (b < t.size() && (is_markup(t[b]) || t[b] == ' ' || t[b] == '\t')) ++b;
  if (b + 1 < t.size() && (t[b] == '-' || t[b] == '+') && t[b + 1] == ' ') b += 2;
  std::size_t e = t.size();
  while (e > b && (is_markup(t[e - 1]) || t[e - 1] == ' ')) --e;
  return t.substr(b, e - b);
}

struct HeaderMatch {
  std::string name;     // canonical header
  std::string inline_;  // content after the colon on the same line
};

// Matches `line` against `names` (canonical spellings). Lenient mode folds
// case, ignores markup and accepts "："; a bare header without a colon must
// fill the whole line.
std::optional<HeaderMatch> match_header(std::string_view line,
                                        const std::vector<std::pair<std::string, std::string>>& names,
                                        bool strict) {
  if (strict) {
    for (const auto& [canonical, spelling] : names) {
      if (spelling != canonical) continue;
      const std::string head = canonical + ":";
      if (line.rfind(head, 0) == 0) {
        return HeaderMatch{canonical, trim(line.substr(head.size()))};
      }
    }
    return std::nullopt;
  }
  const std::string stripped = strip_markup(line);
  const std::string folded = lower(stripped);
  for (const auto& [canonical, spelling] : names) {
    const std::string want = lower(spelling);
    if (folded.rfind(want, 0) != 0) continue;
    std::string rest = stripped.substr(want.size());
    // Tolerate markup between the name and the colon ("**Your Task**:").
    std::size_t k = 0;
    while (k < rest.size() && (is_markup(rest[k]) || rest[k] == ' ')) ++k;
    rest.erase(0, k);
    if (rest.empty()) return HeaderMatch{canonical, ""};
    if (rest[0] == ':') return HeaderMatch{canonical, strip_markup(rest.substr(1))};
    if (rest.rfind(kFullWidthColon, 0) == 0) {
      return HeaderMatch{canonical, strip_markup(rest.substr(kFullWidthColon.size()))};
    }
  }
  return std::nullopt;
}

const std::vector<std::pair<std::string, std::string>>& section_names() {
  static const std::vector<std::pair<std::string, std::string>> kNames{
      {std::string(kRoleSection), "Interaction Roles"},
      {std::string(kRoleSection), std::string(kRoleSection)},
      {std::string(kScenarioSection), std::string(kScenarioSection)},
      {std::string(kTaskSection), std::string(kTaskSection)},
      {std::string(kHintsSection), std::string(kHintsSection)},
      {std::string(kLevelSection), std::string(kLevelSection)},
  };
  return kNames;
}

// "Character-1", "Character 1", "Character1" -> index 0-based.
std::optional<std::pair<int, std::string>> match_character(std::string_view line, bool strict) {
  static const std::regex kLenient(R"(^character[\s\-_]*(\d+)\s*(?::|\xEF\xBC\x9A)?\s*(.*)$)",
                                   std::regex::icase);
  static const std::regex kStrict(R"(^Character-(\d+):\s*(.*)$)");
  const std::string s = strict ? std::string(line) : strip_markup(line);
  std::smatch m;
  if (!std::regex_match(s, m, strict ? kStrict : kLenient)) return std::nullopt;
  if (!strict) {
    // Prose that merely starts with "character" is not a marker.
    const std::string after_number = s.substr(static_cast<std::size_t>(m.position(1) + m.length(1)));
    const std::string t = trim(after_number);
    if (!t.empty() && t[0] != ':' && t.rfind(kFullWidthColon, 0) != 0) return std::nullopt;
  }
  return std::make_pair(std::stoi(m[1].str()) - 1, trim(m[2].str()));
}

std::optional<std::string> match_field(std::string_view line, std::string_view field, bool strict) {
  auto hm = match_header(line, {{std::string(field), std::string(field)}}, strict);
  if (!hm || hm->inline_.empty()) return std::nullopt;
  return hm->inline_;
}

std::string name_from_profile(std::string_view profile) {
  static const std::regex kNamed(R"(\bnamed\s+([A-Z][A-Za-z'\-]*))");
  std::smatch m;
  const std::string s(profile);
  if (std::regex_search(s, m, kNamed)) return m[1].str();
  return {};
}

struct RoleBlock {
  std::optional<std::string> name;
  std::optional<Gender> gender;
  bool gender_line = false;
  std::string profile;
};

RoleBlock parse_role_block(std::string_view text, bool strict) {
  RoleBlock block;
  std::vector<std::string> kept;
  for (const auto& line : split_lines(text)) {
    if (auto v = match_field(line, "Gender", strict)) {
      block.gender_line = true;
      block.gender = parse_gender(strip_markup(*v));
      continue;
    }
    if (auto v = match_field(line, "Name", strict)) {
      block.name = *v;
      continue;
    }
    kept.push_back(line);
  }
  block.profile = join_lines(kept, 0, kept.size());
  return block;
}

[[noreturn]] void missing(std::string_view section) {
  throw Error(ErrorCode::MissingSection,
              "plan card is missing section '" + std::string(section) + "'", {std::string(section)});
}

[[noreturn]] void empty_section(std::string_view section) {
  throw Error(ErrorCode::EmptySection, "plan card section '" + std::string(section) + "' is empty",
              {std::string(section)});
}

// ---------------------------------------------------------------------------
// Prompt helpers

void append_history(std::vector<ChatMessage>& out, std::span<const TranscriptEntry> history) {
  for (const auto& e : history) {
    if (blank(e.text)) continue;
    out.push_back({e.author.is_participant() ? Role::User : Role::Assistant, e.text});
  }
}

void require_therapist_channel(std::span<const TranscriptEntry> history) {
  for (const auto& e : history) {
    if (!e.channel.is_therapist()) {
      throw Error(ErrorCode::Validation,
                  "therapist prompt received a turn from channel " + e.channel.id());
    }
  }
}

std::string therapist_base(const TemplateStore& templates, const TherapistContext& ctx) {
  return render_template(templates.get(kTherapistTemplate),
                         {{"therapist_name", ctx.therapist_name},
                          {"patient_description", ctx.patient_description}});
}

std::string lsas_line(const TherapistContext& ctx) {
  if (!ctx.lsas) return {};
  return "The patient's self-reported LSAS total is " + std::to_string(ctx.lsas->total) + " (" +
         std::string(instruments::band_name(ctx.lsas->band)) + ").\n";
}

std::string day_line(const SessionState& s) {
  return "Today is day " + std::to_string(s.day) + " of " + std::to_string(protocol::kDays) +
         " of the exposure plan. Today's exposure level is " +
         level_word(s.schedule[static_cast<std::size_t>(s.day - 1)]) + ".\n";
}

std::string planning_directive(const SessionState& s, const TherapistContext& ctx) {
  const ExposureLevel level = s.schedule[static_cast<std::size_t>(s.day - 1)];
  std::ostringstream d;
  d << "Current step: planning.\n" << day_line(s);
  d << "Present exactly one " << level_word(level)
    << " exposure scenario now, and only one. Write it in this format:\n"
    << "Interaction Role:\n";
  if (level == ExposureLevel::High) {
    d << "Character-1:\nName: <name>\nGender: male or female\n<profile of the first character>\n"
      << "Character-2:\nName: <name>\nGender: male or female\n<profile of the second character>\n"
      << "The two characters must be one male and one female, and the scenario must require "
         "interacting with both at the same time.\n";
  } else {
    d << "Name: <name>\nGender: male or female\n<profile of the character>\n";
  }
  d << "Exposure Scenario:\n<the situation>\n"
    << "Your Task:\n<one sentence stating what the patient must accomplish>\n"
    << "Hints:\n- <optional short tips for the patient>\n"
    << "Always include the Gender line for every character.\n";
  if (ctx.required_gender && level != ExposureLevel::High) {
    d << "The previous scenario at this level featured a "
      << (*ctx.required_gender == Gender::Male ? "female" : "male")
      << " character, so this scenario's character must be " << gender_name(*ctx.required_gender)
      << ".\n";
  }
  return d.str();
}

std::string debrief_directive(const SessionState& s, bool failed, bool summary_missing) {
  std::ostringstream d;
  d << "Current step: debrief after today's exposure task (day " << s.day << ").\n"
    << "Ask the patient how they completed the task and what difficulties they met. Work with "
       "them to solve those difficulties and give advice based on what they tell you about their "
       "performance. You only know what the patient reports; you did not see the conversation.\n";
  if (failed) {
    d << "The patient reported that they did not complete the task. Help them summarize the "
         "reasons for the failure, then suggest how the next scenario can be adjusted.\n";
  }
  if (summary_missing) {
    d << "The patient has not summarized the interaction yet. Before giving feedback, ask them to "
         "describe in their own words what happened in the scenario.\n";
  }
  if (s.day < protocol::kDays) {
    d << "Close by encouraging the patient and preparing them for tomorrow's scenario.\n";
  }
  return d.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Profiles

std::string_view agent_kind_name(AgentKind k) {
  return k == AgentKind::Therapist ? "therapist" : "interlocutor";
}

const std::vector<std::string>& base_traits() {
  static const std::vector<std::string> kTraits{"outgoing", "gentle", "listener", "patient"};
  return kTraits;
}

AgentProfile therapist_profile() {
  return {AgentKind::Therapist, "Miss.Tree", Gender::Female, base_traits(), "therapist-female",
          kTherapistTemplate};
}

AgentProfile interlocutor_profile(const RoleSpec& role) {
  std::string voice = "agent-h-";
  voice += role.gender == Gender::Unspecified ? "neutral" : std::string(gender_name(role.gender));
  return {AgentKind::Interlocutor, role.name, role.gender, base_traits(), voice, kAgentHTemplate};
}

// ---------------------------------------------------------------------------
// Templates

std::string render_template(std::string_view text, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(text.size());
  std::vector<std::string> unknown;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto open = text.find("{{", i);
    if (open == std::string_view::npos) {
      out.append(text.substr(i));
      break;
    }
    const auto close = text.find("}}", open + 2);
    if (close == std::string_view::npos) {
      out.append(text.substr(i));
      break;
    }
    out.append(text.substr(i, open - i));
    const std::string name = trim(text.substr(open + 2, close - open - 2));
    auto it = vars.find(name);
    if (it == vars.end()) {
      unknown.push_back(name);
    } else {
      out += it->second;
    }
    i = close + 2;
  }
  if (!unknown.empty()) {
    std::string msg = "template placeholders without values:";
    for (const auto& u : unknown) msg += " " + u;
    throw Error(ErrorCode::Validation, msg, unknown);
  }
  return out;
}

TemplateStore::TemplateStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::string TemplateStore::get(const std::string& template_id) const {
  const auto path = dir_ / (template_id + ".txt");
  std::error_code ec;
  const auto mtime = std::filesystem::last_write_time(path, ec);
  if (ec) throw Error(ErrorCode::NotFound, "template not found: " + path.string());
  std::lock_guard lock(mu_);
  auto it = cache_.find(template_id);
  if (it != cache_.end() && it->second.mtime == mtime) return it->second.text;
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::NotFound, "cannot read template " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  cache_[template_id] = Cached{mtime, buf.str()};
  return cache_[template_id].text;
}

std::vector<ChatMessage> PromptBundle::messages() const {
  std::vector<ChatMessage> out;
  out.reserve(context_messages.size() + 1);
  out.push_back({Role::System, system_text});
  out.insert(out.end(), context_messages.begin(), context_messages.end());
  return out;
}

// ---------------------------------------------------------------------------
// Prompt builders

PromptBundle build_agent_p_prompt(const SessionState& session,
                                  std::span<const TranscriptEntry> history,
                                  const TemplateStore& templates, const TherapistContext& ctx) {
  if (session.phase == Phase::Closed) {
    throw Error(ErrorCode::SessionClosed, "session " + session.session_id + " is closed");
  }
  require_therapist_channel(history);

  std::string directive;
  switch (session.phase) {
    case Phase::Assessment:
      directive =
          "Current step: assessment (day 1).\n"
          "Use the Liebowitz Social Anxiety Scale (LSAS) to guide the assessment: ask about "
          "fear and avoidance in concrete social situations and estimate how severe the "
          "patient's social anxiety is. Explore and uncover the source of the patient's fears: "
          "which situations frighten them most and why. Ask one question at a time and do not "
          "propose an exposure scenario yet.\n" +
          lsas_line(ctx);
      break;
    case Phase::Planning:
      directive = planning_directive(session, ctx) + lsas_line(ctx);
      break;
    case Phase::Debrief:
      directive = debrief_directive(
          session, session.last_outcome == protocol::TaskOutcome::Failed, false);
      break;
    case Phase::FinalSummary:
      directive =
          "Current step: final summary. The patient has completed all six exposure scenarios.\n"
          "Summarize their performance over the whole plan based on what they reported, point "
          "out shortcomings with suggestions for the future, praise what they did well, and "
          "express that you look forward to meeting them again.\n";
      break;
    default:
      directive = "Current step: " + std::string(protocol::phase_name(session.phase)) + ".\n" +
                  day_line(session) + "Support the patient briefly and keep them on track.\n";
      break;
  }

  PromptBundle b;
  b.kind = AgentKind::Therapist;
  b.system_text = therapist_base(templates, ctx) + "\n" + directive;
  append_history(b.context_messages, history);
  return b;
}

PromptBundle build_debrief_prompt(const SessionState& session,
                                  std::span<const TranscriptEntry> history,
                                  std::string_view user_summary, const TemplateStore& templates,
                                  const TherapistContext& ctx) {
  if (session.phase == Phase::Closed) {
    throw Error(ErrorCode::SessionClosed, "session " + session.session_id + " is closed");
  }
  if (session.phase != Phase::Debrief) {
    throw Error(ErrorCode::WrongPhase, "debrief prompt requested in phase " +
                                           std::string(protocol::phase_name(session.phase)));
  }
  require_therapist_channel(history);
  const bool missing = blank(user_summary);
  PromptBundle b;
  b.kind = AgentKind::Therapist;
  b.system_text =
      therapist_base(templates, ctx) + "\n" +
      debrief_directive(session, session.last_outcome == protocol::TaskOutcome::Failed, missing);
  append_history(b.context_messages, history);
  if (missing) {
    b.context_messages.push_back({Role::User, "[The patient finished the task without a summary.]"});
  } else {
    b.context_messages.push_back({Role::User, std::string(user_summary)});
  }
  return b;
}

PromptBundle build_hint_prompt(const SessionState& session, std::string_view help_text,
                               const TemplateStore& templates, const TherapistContext& ctx) {
  if (session.phase != Phase::Exposure || !session.active_plan) {
    throw Error(ErrorCode::WrongPhase, "hints are only available during exposure");
  }
  const auto& card = *session.active_plan;
  std::ostringstream d;
  d << "Current step: the patient is in the middle of today's exposure scenario and asked you "
       "for help. Give one or two short, concrete hints that help them take the next step. Do "
       "not complete the task for them.\n"
    << "Scenario:\n" << card.scenario_text << "\nTheir task:\n" << card.task_text << "\n";
  if (!card.hints.empty()) {
    d << "Hints you prepared when planning:\n";
    for (const auto& h : card.hints) d << "- " << h << "\n";
  }
  PromptBundle b;
  b.kind = AgentKind::Therapist;
  b.system_text = therapist_base(templates, ctx) + "\n" + d.str();
  b.context_messages.push_back(
      {Role::User, blank(help_text) ? std::string("I need a hint.") : std::string(help_text)});
  return b;
}

PromptBundle build_agent_h_prompt(const ExposurePlanCard& card, int slot,
                                  std::span<const TranscriptEntry> history,
                                  const TemplateStore& templates) {
  if (slot < 0 || slot >= static_cast<int>(card.roles.size())) {
    throw Error(ErrorCode::SlotOutOfRange, "slot " + std::to_string(slot) + " but the card has " +
                                               std::to_string(card.roles.size()) + " role(s)");
  }
  for (const auto& e : history) {
    if (e.channel.is_therapist() || e.channel.slot != slot) {
      throw Error(ErrorCode::Validation,
                  "interlocutor prompt received a turn from channel " + e.channel.id());
    }
  }
  const auto& role = card.roles[static_cast<std::size_t>(slot)];
  PromptBundle b;
  b.kind = AgentKind::Interlocutor;
  b.system_text = render_template(templates.get(kAgentHTemplate),
                                  {{"characteristic", role.profile_text},
                                   {"scenario", card.scenario_text}});
  for (std::size_t i = 0; i < card.roles.size(); ++i) {
    if (static_cast<int>(i) == slot) continue;
    b.system_text += "\nAnother character, " + card.roles[i].name +
                     ", is in the same scene and the person may talk to both of you.\n";
  }
  append_history(b.context_messages, history);
  return b;
}

// ---------------------------------------------------------------------------
// Plan cards

ExposurePlanCard parse_plan_card(std::string_view text, ExposureLevel expected_level,
                                 const ParseOptions& opts) {
  if (blank(text)) throw Error(ErrorCode::Validation, "plan card text is empty");
  const auto lines = split_lines(text);

  struct Section {
    std::string name;
    std::string inline_;
    std::size_t begin;  // first body line
    std::size_t end;
  };
  std::vector<Section> sections;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (auto hm = match_header(lines[i], section_names(), opts.strict)) {
      if (!sections.empty()) sections.back().end = i;
      sections.push_back({hm->name, hm->inline_, i + 1, lines.size()});
    }
  }
  std::map<std::string, std::string> bodies;
  for (const auto& s : sections) {
    if (bodies.count(s.name) != 0) {
      throw Error(ErrorCode::DuplicateSection, "plan card repeats section '" + s.name + "'", {s.name});
    }
    std::string body = s.inline_;
    const std::string rest = join_lines(lines, s.begin, s.end);
    if (!rest.empty()) body = body.empty() ? rest : body + "\n" + rest;
    bodies[s.name] = trim(body);
  }
  for (auto name : {kRoleSection, kScenarioSection, kTaskSection}) {
    if (bodies.count(std::string(name)) == 0) missing(name);
  }
  for (auto name : {kRoleSection, kScenarioSection, kTaskSection}) {
    if (bodies[std::string(name)].empty()) empty_section(name);
  }

  if (auto it = bodies.find(std::string(kLevelSection)); it != bodies.end()) {
    const auto stated = parse_level(strip_markup(it->second));
    if (!stated || *stated != expected_level) {
      throw Error(ErrorCode::LevelMismatch, "plan card level '" + it->second +
                                                "' does not match expected " +
                                                std::string(level_name(expected_level)));
    }
  }

  ExposurePlanCard card;
  card.level = expected_level;
  card.scenario_text = bodies[std::string(kScenarioSection)];
  card.task_text = bodies[std::string(kTaskSection)];

  // Role blocks: either one block, or Character-N sub-blocks.
  const auto role_lines = split_lines(bodies[std::string(kRoleSection)]);
  std::vector<std::pair<std::size_t, std::string>> markers;  // line index, inline text
  for (std::size_t i = 0; i < role_lines.size(); ++i) {
    if (auto m = match_character(role_lines[i], opts.strict)) markers.emplace_back(i, m->second);
  }
  std::vector<std::string> blocks;
  if (markers.empty()) {
    blocks.push_back(bodies[std::string(kRoleSection)]);
  } else {
    for (std::size_t k = 0; k < markers.size(); ++k) {
      const std::size_t end = k + 1 < markers.size() ? markers[k + 1].first : role_lines.size();
      std::string body = markers[k].second;
      const std::string rest = join_lines(role_lines, markers[k].first + 1, end);
      if (!rest.empty()) body = body.empty() ? rest : body + "\n" + rest;
      blocks.push_back(body);
    }
  }
  const int expected_roles = protocol::agent_h_count(expected_level);
  if (static_cast<int>(blocks.size()) != expected_roles) {
    throw Error(ErrorCode::RoleCountMismatch,
                "expected " + std::to_string(expected_roles) + " role(s), found " +
                    std::to_string(blocks.size()),
                {std::to_string(expected_roles), std::to_string(blocks.size())});
  }
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    RoleBlock rb = parse_role_block(blocks[k], opts.strict);
    if (rb.profile.empty()) empty_section(kRoleSection);
    RoleSpec role;
    role.profile_text = rb.profile;
    role.gender = rb.gender.value_or(Gender::Unspecified);
    role.name = rb.name.value_or(name_from_profile(rb.profile));
    if (role.name.empty()) role.name = "Character-" + std::to_string(k + 1);
    card.roles.push_back(std::move(role));
  }

  if (auto it = bodies.find(std::string(kHintsSection)); it != bodies.end()) {
    for (const auto& line : split_lines(it->second)) {
      std::string h = trim(line);
      if (h.rfind("- ", 0) == 0 || h.rfind("* ", 0) == 0) h = trim(h.substr(2));
      if (h.rfind("\xE2\x80\xA2", 0) == 0) h = trim(h.substr(3));  // bullet
      if (!h.empty()) card.hints.push_back(h);
    }
  }
  return card;
}

std::string render_plan_card(const ExposurePlanCard& card) {
  std::ostringstream out;
  out << kLevelSection << ": " << level_name(card.level) << "\n\n";
  out << kRoleSection << ":\n";
  const bool numbered = card.roles.size() > 1;
  for (std::size_t i = 0; i < card.roles.size(); ++i) {
    const auto& r = card.roles[i];
    if (numbered) out << "Character-" << (i + 1) << ":\n";
    if (!r.name.empty()) out << "Name: " << r.name << "\n";
    if (r.gender != Gender::Unspecified) out << "Gender: " << gender_name(r.gender) << "\n";
    out << r.profile_text << "\n";
  }
  out << "\n" << kScenarioSection << ":\n" << card.scenario_text << "\n";
  out << "\n" << kTaskSection << ":\n" << card.task_text << "\n";
  if (!card.hints.empty()) {
    out << "\n" << kHintsSection << ":\n";
    for (const auto& h : card.hints) out << "- " << h << "\n";
  }
  return out.str();
}

std::vector<std::string> plan_warnings(const ExposurePlanCard& card) {
  std::vector<std::string> out;
  for (const auto& r : card.roles) {
    if (r.gender == Gender::Unspecified) {
      out.push_back("role '" + r.name + "' has no gender line; edit the plan to set one");
    }
  }
  return out;
}

bool PlanEdits::empty() const {
  auto none = [](const auto& v) {
    return std::all_of(v.begin(), v.end(), [](const auto& x) { return !x.has_value(); });
  };
  return !scenario_text && none(role_texts) && none(role_genders);
}

ExposurePlanCard apply_user_edits(const ExposurePlanCard& card, const PlanEdits& edits) {
  if (edits.role_texts.size() > card.roles.size() || edits.role_genders.size() > card.roles.size()) {
    throw Error(ErrorCode::SlotOutOfRange, "edits address more roles than the card has");
  }
  ExposurePlanCard out = card;
  for (std::size_t i = 0; i < edits.role_texts.size(); ++i) {
    if (!edits.role_texts[i]) continue;
    if (blank(*edits.role_texts[i])) {
      throw Error(ErrorCode::BlankEdit, "role " + std::to_string(i + 1) + " profile edit is blank");
    }
    RoleBlock rb = parse_role_block(*edits.role_texts[i], false);
    if (rb.profile.empty()) {
      throw Error(ErrorCode::BlankEdit, "role " + std::to_string(i + 1) + " profile edit is blank");
    }
    auto& role = out.roles[i];
    role.profile_text = rb.profile;
    if (rb.name) {
      role.name = *rb.name;
    } else if (auto derived = name_from_profile(rb.profile); !derived.empty()) {
      role.name = derived;
    }
    if (rb.gender) role.gender = *rb.gender;
  }
  for (std::size_t i = 0; i < edits.role_genders.size(); ++i) {
    if (edits.role_genders[i]) out.roles[i].gender = *edits.role_genders[i];
  }
  if (edits.scenario_text) {
    if (blank(*edits.scenario_text)) throw Error(ErrorCode::BlankEdit, "scenario edit is blank");
    out.scenario_text = trim(*edits.scenario_text);
  }
  return out;
}

std::vector<PairViolation> validate_level_pair(const ExposurePlanCard& first,
                                               const ExposurePlanCard& second) {
  if (first.level != second.level) {
    throw Error(ErrorCode::LevelMismatch, "cards are at different levels (" +
                                              std::string(level_name(first.level)) + ", " +
                                              std::string(level_name(second.level)) + ")");
  }
  if (first.level == ExposureLevel::High) return {};
  if (first.roles.empty() || second.roles.empty()) {
    throw Error(ErrorCode::Validation, "level pair check needs a role on each card");
  }
  const Gender a = first.roles.front().gender;
  const Gender b = second.roles.front().gender;
  if (a == Gender::Unspecified || b == Gender::Unspecified) {
    return {{PairViolation::Kind::GenderUnspecified,
             "cannot check the gender pairing: a character has no gender"}};
  }
  if (a == b) {
    return {{PairViolation::Kind::GenderPairViolation,
             "both " + std::string(level_name(first.level)) + " scenarios feature a " +
                 std::string(gender_name(a)) + " character; one must be male and one female"}};
  }
  return {};
}

}  // namespace vchatter::agents
