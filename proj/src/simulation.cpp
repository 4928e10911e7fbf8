#include "vchatter/simulation.hpp"

#include <algorithm>
#include <fstream>
#include <cstdio>
#include <random>
#include <set>
#include <sstream>
#include <string_view>
#include <unordered_set>

#include "vchatter/error.hpp"
#include "vchatter/instruments.hpp"
#include "vchatter/presence.hpp"
#include "vchatter/provider.hpp"
#include "vchatter/service.hpp"

namespace vchatter::simulation {

namespace fs = std::filesystem;
using nlohmann::json;
using protocol::EventKind;
using protocol::Phase;

namespace {

void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Storage, "cannot write " + p.string());
  out << text;
}

json read_json_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Validation, p.string() + ": " + e.what());
  }
}

// The walk every complete session follows, HelpRequested aside.
std::vector<EventKind> canonical_events() {
  std::vector<EventKind> out{EventKind::AssessmentDone};
  for (int d = 1; d <= protocol::kDays; ++d) {
    out.insert(out.end(), {EventKind::PlanConfirmed, EventKind::ScenarioInstantiated,
                           EventKind::TaskCompleted, EventKind::DebriefDone, EventKind::DayClosed});
  }
  return out;
}

class Walker {
 public:
  Walker(const json& script, service::Service& svc) : script_(script), svc_(svc) {
    utterances_ = script.value("utterances", json::object());
  }

  std::string run() {
    id_ = svc_.create_session(script_.value("participant", "sim-participant"),
                              script_.value("opt_in", false));
    submit_scales("pre", store::Timing::Pre);
    for (int day = 1; day <= protocol::kDays; ++day) {
      if (day == 1) talk(day, "Assessment", /*finish_last=*/true);
      plan(day);
      expose(day);
      task(day);
      talk(day, "Debrief", true, /*allow_empty=*/false);
    }
    talk(protocol::kDays, "FinalSummary", true);
    submit_scales("post", store::Timing::Post);
    return id_;
  }

  const std::string& session_id() const { return id_; }

 private:
  std::optional<json> utterance(int day, std::string_view phase, int turn) const {
    const auto key = provider::script_key("participant", day, phase, turn);
    if (!utterances_.contains(key)) return std::nullopt;
    return std::optional<json>(std::in_place, utterances_.at(key));
  }

  int count(int day, std::string_view phase) const {
    int n = 0;
    while (utterance(day, phase, n)) ++n;
    return n;
  }

  [[noreturn]] void stall(int day, std::string_view phase, const std::string& why) const {
    throw Error(ErrorCode::Validation, "stalled at day " + std::to_string(day) + " " +
                                           std::string(phase) + ": " + why);
  }

  void talk(int day, std::string_view phase, bool finish_last, bool allow_empty = false) {
    const int n = count(day, phase);
    if (n == 0 && !allow_empty) stall(day, phase, "no participant utterance scripted");
    for (int k = 0; k < n; ++k) {
      svc_.post_therapist_message(id_, utterance(day, phase, k)->get<std::string>(),
                                  finish_last && k == n - 1, chunk_sink_);
    }
  }

  void plan(int day) {
    const int n = count(day, "Planning");
    if (n == 0) stall(day, "Planning", "no participant utterance scripted");
    std::optional<service::ApiError> last_error;
    bool staged = false;
    for (int k = 0; k < n; ++k) {
      auto r = svc_.post_therapist_message(id_, utterance(day, "Planning", k)->get<std::string>(),
                                           false, chunk_sink_);
      if (r.staged_plan) staged = true;
      if (r.plan_error) last_error = r.plan_error;
    }
    if (!staged) {
      if (last_error) {
        auto code = std::find_if(std::begin(kAllErrorCodes), std::end(kAllErrorCodes),
                                 [&](ErrorCode c) { return code_name(c) == last_error->code; });
        throw Error(code != std::end(kAllErrorCodes) ? *code : ErrorCode::Validation,
                    "day " + std::to_string(day) + " plan card rejected: " + last_error->message,
                    last_error->details);
      }
      stall(day, "Planning", "no plan card was staged");
    }
    const auto edits = script_.value("plan_edits", json::object());
    const std::string key = std::to_string(day);
    svc_.confirm_plan(id_, edits.contains(key) ? service::plan_edits_from_json(edits.at(key))
                                               : agents::PlanEdits{});
  }

  void expose(int day) {
    const int n = count(day, "Exposure");
    if (n == 0) stall(day, "Exposure", "no participant utterance scripted");
    for (int k = 0; k < n; ++k) {
      const json u = *utterance(day, "Exposure", k);
      if (u.is_string()) {
        svc_.post_scenario_message(id_, 0, u.get<std::string>(), false, chunk_sink_);
      } else {
        svc_.post_scenario_message(id_, u.value("slot", 0), u.value("text", ""),
                                   u.value("help", false), chunk_sink_);
      }
    }
  }

  void task(int day) {
    const auto tasks = script_.value("tasks", json::object());
    const std::string key = std::to_string(day);
    if (!tasks.contains(key)) stall(day, "Exposure", "no task outcome scripted");
    const json t = tasks.at(key);
    const std::string o = t.value("outcome", "success");
    svc_.complete_task(id_,
                       o == "failed" ? protocol::TaskOutcome::Failed : protocol::TaskOutcome::Success,
                       t.value("summary", ""), chunk_sink_);
  }

  void submit_scales(const std::string& which, store::Timing timing) {
    const auto scales = script_.value("scales", json::object());
    if (!scales.contains(which)) return;
    for (const auto& [instrument, payload] : scales.at(which).items()) {
      svc_.submit_scale(id_, instrument, timing, payload);
    }
  }

  const json& script_;
  service::Service& svc_;
  json utterances_;
  std::string id_;
  // Streaming is exercised on every turn; the chunks themselves are not kept.
  provider::ChunkSink chunk_sink_ = [](const provider::StreamChunk&) {};
};

json validation_report(store::Store& st, const std::string& id,
                       const std::vector<BundleRecord>& bundles, std::vector<std::string>& violations) {
  const auto stored = st.load_session(id);
  json report;

  // Phase order.
  std::vector<EventKind> kinds;
  int helps = 0;
  for (const auto& e : stored.events) {
    if (e.kind == EventKind::HelpRequested) {
      ++helps;
    } else {
      kinds.push_back(e.kind);
    }
  }
  const bool order_ok = kinds == canonical_events();
  report["phase_order_ok"] = order_ok;
  report["help_requests"] = helps;
  if (!order_ok) violations.push_back("event log does not follow the canonical phase order");

  // Level schedule.
  const auto plans = service::confirmed_plans(stored);
  json levels = json::array();
  json counts = json::array();
  bool schedule_ok = plans.size() == static_cast<std::size_t>(protocol::kDays);
  for (const auto& [day, card] : plans) {
    levels.push_back(level_name(card.level));
    counts.push_back(card.roles.size());
    if (card.level != protocol::level_for_day(day) ||
        static_cast<int>(card.roles.size()) != protocol::agent_h_count(card.level)) {
      schedule_ok = false;
    }
  }
  report["levels"] = levels;
  report["agent_h_counts"] = counts;
  report["schedule_ok"] = schedule_ok;
  if (!schedule_ok) violations.push_back("confirmed plans do not follow the level schedule");

  // Transcripts.
  std::vector<std::string> interlocutor_texts;
  std::vector<std::string> participant_texts;
  std::set<int> exposure_days;
  json channel_sizes = json::object();
  for (const auto& ch : st.channels(id)) {
    const auto entries = st.read_channel(id, ch);
    channel_sizes[ch.id()] = entries.size();
    for (const auto& e : entries) {
      if (e.author.is_participant()) {
        participant_texts.push_back(e.text);
      } else if (!ch.is_therapist() && !e.hint) {
        interlocutor_texts.push_back(e.text);
      }
      if (!ch.is_therapist() && !e.hint && !e.author.is_participant()) exposure_days.insert(ch.day);
    }
  }
  report["channels"] = channel_sizes;
  report["exposure_transcripts"] = exposure_days.size();
  if (exposure_days.size() != static_cast<std::size_t>(protocol::kDays)) {
    violations.push_back("expected 6 exposure transcripts, found " +
                         std::to_string(exposure_days.size()));
  }

  // Memory isolation.
  const auto leaks = memory_isolation_violations(bundles, interlocutor_texts, participant_texts);
  report["therapist_bundles"] =
      std::count_if(bundles.begin(), bundles.end(),
                    [](const BundleRecord& b) { return b.bundle.kind == agents::AgentKind::Therapist; });
  report["memory_isolation_ok"] = leaks.empty();
  if (!leaks.empty()) {
    violations.push_back("interlocutor text reached a therapist prompt: \"" + leaks.front().fragment +
                         "\"");
  }

  const bool closed = stored.snapshot.phase == Phase::Closed;
  report["closed"] = closed;
  if (!closed) violations.push_back("session did not reach Closed");
  return report;
}

// --- cohort seeding -------------------------------------------------------

class Draws {
 public:
  explicit Draws(std::uint64_t seed) : rng_(seed) {}
  // Raw engine output keeps results identical across standard libraries.
  int in(int lo, int hi) { return lo + static_cast<int>(rng_() % static_cast<std::uint64_t>(hi - lo + 1)); }

 private:
  std::mt19937_64 rng_;
};

ExposurePlanCard seeded_card(int day, Draws& d) {
  ExposurePlanCard c;
  c.level = protocol::level_for_day(day);
  const int n = protocol::agent_h_count(c.level);
  // Pairs alternate genders within a level.
  const Gender first = (day % 2 == 1) ? Gender::Female : Gender::Male;
  for (int s = 0; s < n; ++s) {
    RoleSpec r;
    r.name = "Role" + std::to_string(d.in(1, 99));
    r.gender = s == 0 ? first : (first == Gender::Male ? Gender::Female : Gender::Male);
    r.profile_text = "A seeded conversation partner.";
    c.roles.push_back(r);
  }
  c.scenario_text = "Seeded scenario for day " + std::to_string(day) + ".";
  c.task_text = "Hold a short conversation.";
  return c;
}

json seeded_scales(Draws& d, json& post) {
  json pre;
  json lsas_pre = json::array(), lsas_post = json::array();
  for (std::size_t i = 0; i < instruments::kLsasItems; ++i) {
    const int f = d.in(1, 3), a = d.in(1, 3);
    lsas_pre.push_back({f, a});
    lsas_post.push_back({std::max(0, f - d.in(0, 1)), std::max(0, a - d.in(0, 1))});
  }
  pre["lsas"] = {{"items", lsas_pre}};
  post["lsas"] = {{"items", lsas_post}};

  json sas_pre = json::array(), sas_post = json::array();
  for (std::size_t i = 0; i < instruments::kSasAItems; ++i) {
    const int v = d.in(2, 5);
    sas_pre.push_back(v);
    sas_post.push_back(std::max(1, v - (d.in(0, 2) == 0 ? 1 : 0)));
  }
  pre["sas-a"] = {{"items", sas_pre}};
  post["sas-a"] = {{"items", sas_post}};

  const auto rev = instruments::default_ucla_reverse_set();
  json ucla_pre = json::array(), ucla_post = json::array();
  for (std::size_t i = 0; i < instruments::kUclaItems; ++i) {
    const int v = d.in(1, 4);
    const int step = d.in(0, 3) == 0 ? 1 : 0;
    const bool reversed = std::find(rev.begin(), rev.end(), i) != rev.end();
    ucla_pre.push_back(v);
    ucla_post.push_back(reversed ? std::min(4, v + step) : std::max(1, v - step));
  }
  pre["ucla"] = {{"items", ucla_pre}};
  post["ucla"] = {{"items", ucla_post}};

  json att_pre, att_post;
  for (const char* k : {"contravene", "fear", "isolation"}) {
    const int v = d.in(3, 7);
    att_pre[k] = v;
    att_post[k] = std::max(1, v - d.in(0, 2));
  }
  pre["social-attitude"] = att_pre;
  post["social-attitude"] = att_post;
  return pre;
}

bool is_transcript_file(const fs::path& p) { return p.extension() == ".jsonl" && p.parent_path().filename() == "transcripts"; }

void validate_transcript(const fs::path& file, std::vector<std::string>& out) {
  const auto channel = Channel::parse(file.stem().string());
  if (!channel) {
    out.push_back(file.string() + ": file name is not a channel id");
    return;
  }
  std::ifstream in(file, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  if (!text.empty() && text.back() != '\n') out.push_back(file.string() + ": truncated final line");
  std::istringstream lines(text);
  std::string line;
  std::int64_t expected = 1;
  std::int64_t last_ts = 0;
  while (std::getline(lines, line)) {
    const std::string where = file.string() + " line " + std::to_string(expected);
    try {
      const auto e = transcript_entry_from_json(json::parse(line));
      if (e.seq != expected) out.push_back(where + ": seq " + std::to_string(e.seq) + ", expected " + std::to_string(expected));
      if (!(e.channel == *channel)) out.push_back(where + ": entry belongs to channel " + e.channel.id());
      if (e.timestamp_ms < last_ts) out.push_back(where + ": timestamp goes backwards");
      if (e.text.empty()) out.push_back(where + ": empty text");
      if (e.author.is_participant() && e.expression) out.push_back(where + ": participant turn carries an expression");
      if (!channel->is_therapist() && !e.author.is_participant() && !e.hint &&
          e.author.profile_ref.rfind("agent-h/", 0) != 0) {
        out.push_back(where + ": scenario reply not authored by an interlocutor");
      }
      if (channel->is_therapist() && !e.author.is_participant() && e.author.profile_ref != "agent-p") {
        out.push_back(where + ": therapist channel reply from " + e.author.profile_ref);
      }
      last_ts = e.timestamp_ms;
    } catch (const std::exception& ex) {
      out.push_back(where + ": " + ex.what());
    }
    ++expected;
  }
}

}  // namespace

json to_json(const BundleRecord& r) {
  json msgs = json::array();
  for (const auto& m : r.bundle.context_messages) {
    msgs.push_back({{"role", provider::role_name(m.role)}, {"content", m.content}});
  }
  return {{"agent_kind", r.agent_kind}, {"day", r.day},       {"phase", r.phase},
          {"system", r.bundle.system_text}, {"messages", msgs}};
}

std::vector<IsolationViolation> memory_isolation_violations(
    const std::vector<BundleRecord>& bundles, const std::vector<std::string>& interlocutor_texts,
    const std::vector<std::string>& participant_texts, std::size_t window) {
  std::unordered_set<std::string_view> windows;
  for (const auto& t : interlocutor_texts) {
    for (std::size_t i = 0; i + window <= t.size(); ++i) windows.insert(std::string_view(t).substr(i, window));
  }
  // Fragments the participant typed themselves are allowed through.
  auto user_authored = [&](std::string_view frag) {
    return std::any_of(participant_texts.begin(), participant_texts.end(),
                       [&](const std::string& p) { return p.find(frag) != std::string::npos; });
  };
  std::vector<IsolationViolation> out;
  for (std::size_t b = 0; b < bundles.size(); ++b) {
    if (bundles[b].bundle.kind != agents::AgentKind::Therapist) continue;
    std::vector<std::string_view> parts{bundles[b].bundle.system_text};
    for (const auto& m : bundles[b].bundle.context_messages) parts.push_back(m.content);
    for (auto part : parts) {
      for (std::size_t i = 0; i + window <= part.size(); ++i) {
        const auto frag = part.substr(i, window);
        if (windows.count(frag) != 0 && !user_authored(frag)) {
          out.push_back({b, std::string(frag)});
          break;
        }
      }
    }
  }
  return out;
}

SimulationResult run_simulation(const json& script, const fs::path& out_dir,
                                const SimulationOptions& opts) {
  SimulationResult result;
  std::error_code ec;
  fs::remove_all(out_dir / "store", ec);
  fs::remove_all(out_dir / "transcripts", ec);
  fs::create_directories(out_dir, ec);

  if (!script.is_object() || !script.contains("provider")) {
    throw Error(ErrorCode::Validation, "simulation script needs a \"provider\" section");
  }
  auto st = std::make_shared<store::Store>(out_dir / "store");
  provider::ChunkPolicy chunking;
  if (script.contains("chunk_seed")) {
    chunking = {provider::ChunkPolicy::Kind::Seeded, script.at("chunk_seed").get<std::uint64_t>()};
  }
  auto scripted = std::make_shared<provider::ScriptedProvider>(
      provider::ScriptedProvider::parse_script(script.at("provider")), true, chunking);
  // Retries happen instantly in simulation.
  auto prov = std::make_shared<provider::RetryingProvider>(scripted, provider::RetryPolicy{},
                                                           [](std::chrono::milliseconds) {});
  service::ServiceConfig cfg;
  cfg.asset_dir = opts.asset_dir;
  std::int64_t now = opts.start_ms;
  int next_id = 0;
  service::Service svc(
      st, prov, std::make_shared<presence::NullSynthesizer>(), cfg, [&now] { return now += 1000; },
      [&next_id] {
        char buf[16];
        std::snprintf(buf, sizeof buf, "sim-%04d", ++next_id);
        return std::string(buf);
      });

  std::vector<BundleRecord> bundles;
  svc.set_bundle_observer([&bundles](const std::string&, const provider::RequestTag& tag,
                                     const agents::PromptBundle& b) {
    bundles.push_back({tag.agent_kind, tag.day, tag.phase, b});
  });

  Walker walker(script, svc);
  std::string id;
  try {
    id = walker.run();
  } catch (const Error& e) {
    result.violations.push_back(std::string(code_name(e.code())) + ": " + e.what());
    id = walker.session_id();
  }

  std::string bundle_lines;
  for (const auto& b : bundles) bundle_lines += to_json(b).dump() + "\n";
  write_text(out_dir / "bundles.jsonl", bundle_lines);

  if (!id.empty()) {
    result.final_state = st->snapshot(id);
    write_text(out_dir / "final_state.json", protocol::to_json(result.final_state).dump(2) + "\n");
    fs::create_directories(out_dir / "transcripts");
    for (const auto& ch : st->channels(id)) {
      fs::copy_file(out_dir / "store" / "sessions" / id / "transcripts" / (ch.id() + ".jsonl"),
                    out_dir / "transcripts" / (ch.id() + ".jsonl"),
                    fs::copy_options::overwrite_existing);
    }
    if (result.violations.empty()) {
      result.report = validation_report(*st, id, bundles, result.violations);
    }
    for (const auto& v : validate_path(out_dir / "transcripts")) result.violations.push_back(v);
  }
  result.ok = result.violations.empty();
  result.report["ok"] = result.ok;
  result.report["violations"] = result.violations;
  result.report["session_id"] = id;
  result.report["provider_calls"] = scripted->served_keys().size();
  write_text(out_dir / "report.json", result.report.dump(2) + "\n");
  return result;
}

SimulationResult run_simulation(const fs::path& script_path, const fs::path& out_dir,
                                const SimulationOptions& opts) {
  json script = read_json_file(script_path);
  // A provider section may name a separate script file.
  if (script.contains("provider") && script["provider"].is_string()) {
    script["provider"] = read_json_file(script_path.parent_path() / script["provider"].get<std::string>());
  }
  return run_simulation(script, out_dir, opts);
}

void seed_cohort(const fs::path& data_dir, int n, std::uint64_t seed, const fs::path& asset_dir) {
  if (n < 1) throw Error(ErrorCode::Validation, "cohort size must be at least 1");
  const auto catalog = instruments::InstrumentCatalog::load(asset_dir / "instruments.json");
  store::Store st(data_dir);
  Draws d(seed);
  const std::int64_t base = 1'700'000'000'000;
  for (int i = 1; i <= n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%02d", i);
    const std::string pseudonym = std::string("participant-") + buf;
    const std::string id = "seed-" + std::to_string(seed) + "-" + buf;
    std::int64_t t = base + static_cast<std::int64_t>(i) * 86'400'000LL * 10;
    st.create_session(protocol::new_session(id, pseudonym, t), d.in(0, 1) == 1);

    json post;
    const json pre = seeded_scales(d, post);
    for (const auto& [inst, payload] : pre.items()) {
      st.put_scale(id, inst, store::Timing::Pre, instruments::score_payload(inst, payload, catalog));
    }
    auto fire = [&](EventKind k) {
      protocol::SessionEvent e{k};
      e.at_ms = (t += 60'000);
      return e;
    };
    st.apply_event(id, fire(EventKind::AssessmentDone));
    for (int day = 1; day <= protocol::kDays; ++day) {
      auto confirmed = fire(EventKind::PlanConfirmed);
      confirmed.plan = seeded_card(day, d);
      st.apply_event(id, confirmed);
      st.apply_event(id, fire(EventKind::ScenarioInstantiated));
      auto done = fire(EventKind::TaskCompleted);
      done.outcome = d.in(0, 4) == 0 ? protocol::TaskOutcome::Failed : protocol::TaskOutcome::Success;
      st.apply_event(id, done);
      st.apply_event(id, fire(EventKind::DebriefDone));
      if (day < protocol::kDays) st.apply_event(id, fire(EventKind::DayClosed));
    }
    for (const auto& [inst, payload] : post.items()) {
      st.put_scale(id, inst, store::Timing::Post, instruments::score_payload(inst, payload, catalog));
    }
    st.apply_event(id, fire(EventKind::DayClosed));
  }
}

stats::OutcomeReport report(const fs::path& data_dir) {
  if (!fs::is_directory(data_dir / "sessions")) {
    throw Error(ErrorCode::NotFound, "no data directory at " + data_dir.string());
  }
  store::Store st(data_dir);
  if (st.list_sessions().empty()) {
    throw Error(ErrorCode::NotFound, "data directory " + data_dir.string() + " holds no sessions");
  }
  return service::outcomes_from_store(st);
}

std::vector<std::string> validate_path(const fs::path& path) {
  std::vector<std::string> out;
  if (!fs::exists(path)) return {path.string() + ": does not exist"};
  if (fs::is_regular_file(path)) {
    validate_transcript(path, out);
    return out;
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(path)) {
    if (e.is_regular_file() && is_transcript_file(e.path())) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) validate_transcript(f, out);

  // Session directories also get an event-log replay check.
  std::vector<fs::path> sessions;
  if (fs::exists(path / "snapshot.json")) sessions.push_back(path);
  if (fs::is_directory(path / "sessions")) {
    for (const auto& e : fs::directory_iterator(path / "sessions")) sessions.push_back(e.path());
  }
  std::sort(sessions.begin(), sessions.end());
  for (const auto& s : sessions) {
    try {
      store::Store(s.parent_path().parent_path()).load_session(s.filename().string());
    } catch (const Error& e) {
      out.push_back(s.string() + ": " + e.what());
    }
  }
  if (files.empty() && sessions.empty()) out.push_back(path.string() + ": no transcripts found");
  return out;
}

}  // namespace vchatter::simulation
