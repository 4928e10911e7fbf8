#include "vchatter/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "vchatter/error.hpp"
#include "vchatter/stats.hpp"

namespace vchatter::store {

namespace fs = std::filesystem;
using nlohmann::json;
using protocol::Phase;

namespace {

[[noreturn]] void storage_fail(const std::string& what, const fs::path& p) {
  throw Error(ErrorCode::Storage, what + " " + p.string() + ": " + std::strerror(errno));
}

void write_all(int fd, std::string_view data, const fs::path& p) {
  while (!data.empty()) {
    const ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      storage_fail("write", p);
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

// Appends one line and fsyncs before returning.
void append_line(const fs::path& p, const std::string& line) {
  const int fd = ::open(p.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) storage_fail("open", p);
  try {
    write_all(fd, line + "\n", p);
  } catch (...) {
    ::close(fd);
    throw;
  }
  if (::fsync(fd) != 0) {
    ::close(fd);
    storage_fail("fsync", p);
  }
  ::close(fd);
}

// Write-then-rename so readers never see a partial file.
void write_atomic(const fs::path& p, const std::string& data) {
  const fs::path tmp = p.string() + ".tmp";
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) storage_fail("open", tmp);
  try {
    write_all(fd, data, tmp);
  } catch (...) {
    ::close(fd);
    throw;
  }
  if (::fsync(fd) != 0) {
    ::close(fd);
    storage_fail("fsync", tmp);
  }
  ::close(fd);
  std::error_code ec;
  fs::rename(tmp, p, ec);
  if (ec) throw Error(ErrorCode::Storage, "rename " + tmp.string() + ": " + ec.message());
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::Storage, "cannot read " + p.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json read_json(const fs::path& p) {
  try {
    return json::parse(read_file(p));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptLog, p.filename().string() + ": " + e.what());
  }
}

// Every line must be complete JSON; a truncated tail is corruption.
std::vector<json> read_jsonl(const fs::path& p) {
  std::vector<json> out;
  if (!fs::exists(p)) return out;
  const std::string text = read_file(p);
  if (!text.empty() && text.back() != '\n') {
    throw Error(ErrorCode::CorruptLog, p.filename().string() + ": truncated final line");
  }
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::CorruptLog,
                  p.filename().string() + " line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json scales_to_json(const std::map<ScaleKey, instruments::ScaleScore>& scales) {
  json j = json::object();
  for (const auto& [key, score] : scales) {
    j[key.first][std::string(timing_name(key.second))] = instruments::to_json(score);
  }
  return j;
}

std::map<ScaleKey, instruments::ScaleScore> scales_from_json(const json& j) {
  std::map<ScaleKey, instruments::ScaleScore> out;
  try {
    for (const auto& [instrument, by_timing] : j.items()) {
      for (const auto& [timing, score] : by_timing.items()) {
        auto t = parse_timing(timing);
        if (!t) throw Error(ErrorCode::CorruptLog, "scales.json: bad timing " + timing);
        out[{instrument, *t}] = instruments::scale_score_from_json(score);
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptLog, std::string("scales.json: ") + e.what());
  }
  return out;
}

bool therapist_open(Phase p) {
  return p == Phase::Assessment || p == Phase::Planning || p == Phase::Debrief ||
         p == Phase::FinalSummary;
}

}  // namespace

std::string_view timing_name(Timing t) { return t == Timing::Pre ? "pre" : "post"; }

std::optional<Timing> parse_timing(std::string_view s) {
  if (s == "pre" || s == "Pre") return Timing::Pre;
  if (s == "post" || s == "Post") return Timing::Post;
  return std::nullopt;
}

bool valid_pseudonym(std::string_view s) {
  if (s.empty() || s.size() > 64) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isalnum(c) != 0 || c == '-' || c == '_';
  });
}

std::optional<double> measure_value(const std::map<ScaleKey, instruments::ScaleScore>& scales,
                                    std::string_view measure, Timing timing) {
  auto total_of = [&](std::string_view id) -> std::optional<double> {
    auto it = scales.find({std::string(id), timing});
    if (it == scales.end()) return std::nullopt;
    return it->second.total;
  };
  auto attitude = [&]() -> std::optional<instruments::SocialAttitude> {
    auto it = scales.find({std::string(instruments::kSocialAttitudeId), timing});
    if (it == scales.end() || !it->second.attitude) return std::nullopt;
    return it->second.attitude;
  };
  if (measure == "SAS-A") return total_of(instruments::kSasAId);
  if (measure == "UCLA") return total_of(instruments::kUclaId);
  if (measure == "LSAS") return total_of(instruments::kLsasId);
  if (measure == "Contravene") {
    if (auto a = attitude()) return a->contravene;
    return std::nullopt;
  }
  if (measure == "Fear") {
    if (auto a = attitude()) return a->fear;
    return std::nullopt;
  }
  if (measure == "Isolation") {
    if (auto a = attitude()) return a->isolation;
    return std::nullopt;
  }
  throw Error(ErrorCode::Validation, "unknown outcome measure: " + std::string(measure));
}

json to_json(const CohortRecord& r) {
  return {{"pseudonym", r.pseudonym}, {"session_id", r.session_id}, {"pre", r.pre}, {"post", r.post}};
}

Store::Store(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_ / "sessions", ec);
  if (ec) throw Error(ErrorCode::Storage, "cannot create " + (root_ / "sessions").string() + ": " + ec.message());
}

fs::path Store::data_dir_from_env(const fs::path& fallback) {
  const char* v = std::getenv("VCHATTER_DATA_DIR");
  return (v != nullptr && *v != '\0') ? fs::path(v) : fallback;
}

fs::path Store::dir(const std::string& session_id) const {
  if (!valid_pseudonym(session_id)) {
    throw Error(ErrorCode::Validation, "malformed session id: " + session_id);
  }
  return root_ / "sessions" / session_id;
}

std::shared_mutex& Store::lock_for(const std::string& session_id) const {
  std::lock_guard g(locks_mu_);
  auto& slot = locks_[session_id];
  if (!slot) slot = std::make_unique<std::shared_mutex>();
  return *slot;
}

void Store::require(const std::string& session_id) const {
  if (!fs::exists(dir(session_id) / "snapshot.json")) {
    throw Error(ErrorCode::NotFound, "unknown session " + session_id);
  }
}

void Store::create_session(const protocol::SessionState& initial, bool opt_in) {
  if (!valid_pseudonym(initial.participant_ref)) {
    throw Error(ErrorCode::Validation,
                "pseudonym must be 1-64 letters, digits, '-' or '_'");
  }
  const fs::path d = dir(initial.session_id);
  std::unique_lock lock(lock_for(initial.session_id));
  if (fs::exists(d / "snapshot.json")) {
    throw Error(ErrorCode::Validation, "session already exists: " + initial.session_id);
  }
  std::error_code ec;
  fs::create_directories(d / "transcripts", ec);
  if (ec) throw Error(ErrorCode::Storage, "cannot create " + d.string() + ": " + ec.message());
  write_atomic(d / "meta.json", dump({{"session_id", initial.session_id},
                                      {"pseudonym", initial.participant_ref},
                                      {"created_at_ms", initial.created_at_ms},
                                      {"opt_in", opt_in}}));
  write_atomic(d / "events.jsonl", "");
  write_atomic(d / "scales.json", dump(json::object()));
  write_atomic(d / "snapshot.json", dump(protocol::to_json(initial)));
}

bool Store::exists(const std::string& session_id) const {
  if (!valid_pseudonym(session_id)) return false;
  return fs::exists(dir(session_id) / "snapshot.json");
}

std::vector<std::string> Store::list_sessions() const {
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(root_ / "sessions")) {
    if (e.is_directory() && fs::exists(e.path() / "snapshot.json")) {
      out.push_back(e.path().filename().string());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

StoredSession Store::load_unlocked(const std::string& session_id) const {
  require(session_id);
  const fs::path d = dir(session_id);
  const json meta = read_json(d / "meta.json");
  StoredSession s;
  try {
    s.snapshot = protocol::state_from_json(read_json(d / "snapshot.json"));
    s.opt_in = meta.at("opt_in").get<bool>();
    protocol::SessionState replay =
        protocol::new_session(meta.at("session_id").get<std::string>(),
                              meta.at("pseudonym").get<std::string>(),
                              meta.at("created_at_ms").get<std::int64_t>());
    for (const auto& line : read_jsonl(d / "events.jsonl")) {
      s.events.push_back(protocol::event_from_json(line));
      replay = protocol::advance(replay, s.events.back());
    }
    if (!(replay == s.snapshot)) {
      throw Error(ErrorCode::CorruptLog,
                  "event log of " + session_id + " does not reproduce the snapshot");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptLog, session_id + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptLog) throw;
    throw Error(ErrorCode::CorruptLog, session_id + ": event log replay failed: " + e.what());
  }
  s.scales = scales_from_json(read_json(d / "scales.json"));
  return s;
}

StoredSession Store::load_session(const std::string& session_id) const {
  std::shared_lock lock(lock_for(session_id));
  return load_unlocked(session_id);
}

protocol::SessionState Store::snapshot(const std::string& session_id) const {
  std::shared_lock lock(lock_for(session_id));
  require(session_id);
  try {
    return protocol::state_from_json(read_json(dir(session_id) / "snapshot.json"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptLog, session_id + ": " + e.what());
  }
}

protocol::SessionState Store::apply_event(const std::string& session_id,
                                          const protocol::SessionEvent& event,
                                          const protocol::ProtocolConfig& config) {
  std::unique_lock lock(lock_for(session_id));
  require(session_id);
  const fs::path d = dir(session_id);
  const auto current = protocol::state_from_json(read_json(d / "snapshot.json"));
  auto next = protocol::advance(current, event, config);
  append_line(d / "events.jsonl", protocol::to_json(event).dump());
  write_atomic(d / "snapshot.json", dump(protocol::to_json(next)));
  return next;
}

std::int64_t Store::append_turn(const std::string& session_id, TranscriptEntry entry) {
  std::unique_lock lock(lock_for(session_id));
  require(session_id);
  const fs::path d = dir(session_id);
  const auto state = protocol::state_from_json(read_json(d / "snapshot.json"));
  if (state.phase == Phase::Closed) {
    throw Error(ErrorCode::SessionClosed, "session " + session_id + " is closed");
  }
  const Channel& ch = entry.channel;
  if (ch.is_therapist()) {
    if (!therapist_open(state.phase)) {
      throw Error(ErrorCode::ChannelMismatch,
                  "therapist channel is not open in phase " +
                      std::string(protocol::phase_name(state.phase)));
    }
  } else {
    const int count =
        protocol::agent_h_count(state.schedule[static_cast<std::size_t>(state.day - 1)]);
    if (state.phase != Phase::Exposure || ch.day != state.day || ch.slot < 0 || ch.slot >= count) {
      throw Error(ErrorCode::ChannelMismatch,
                  "channel " + ch.id() + " is not open on day " + std::to_string(state.day) +
                      " in phase " + std::string(protocol::phase_name(state.phase)));
    }
  }
  const fs::path file = d / "transcripts" / (ch.id() + ".jsonl");
  const auto existing = read_jsonl(file);
  entry.seq = static_cast<std::int64_t>(existing.size()) + 1;
  append_line(file, to_json(entry).dump());
  return entry.seq;
}

std::vector<TranscriptEntry> Store::read_channel(const std::string& session_id,
                                                 const Channel& channel) const {
  std::shared_lock lock(lock_for(session_id));
  require(session_id);
  std::vector<TranscriptEntry> out;
  for (const auto& j : read_jsonl(dir(session_id) / "transcripts" / (channel.id() + ".jsonl"))) {
    out.push_back(transcript_entry_from_json(j));
    if (out.back().seq != static_cast<std::int64_t>(out.size())) {
      throw Error(ErrorCode::CorruptLog, "transcript " + channel.id() + " has a seq gap");
    }
  }
  return out;
}

std::vector<Channel> Store::channels(const std::string& session_id) const {
  std::shared_lock lock(lock_for(session_id));
  require(session_id);
  std::vector<Channel> out;
  for (const auto& e : fs::directory_iterator(dir(session_id) / "transcripts")) {
    if (e.path().extension() != ".jsonl") continue;
    if (auto ch = Channel::parse(e.path().stem().string())) out.push_back(*ch);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void Store::put_scale(const std::string& session_id, std::string_view instrument, Timing timing,
                      const instruments::ScaleScore& score) {
  std::unique_lock lock(lock_for(session_id));
  require(session_id);
  const fs::path p = dir(session_id) / "scales.json";
  auto scales = scales_from_json(read_json(p));
  scales[{std::string(instrument), timing}] = score;
  write_atomic(p, dump(scales_to_json(scales)));
}

void Store::stage_plan(const std::string& session_id, const ExposurePlanCard& card) {
  std::unique_lock lock(lock_for(session_id));
  require(session_id);
  write_atomic(dir(session_id) / "staged_plan.json", dump(protocol::to_json(card)));
}

std::optional<ExposurePlanCard> Store::staged_plan(const std::string& session_id) const {
  std::shared_lock lock(lock_for(session_id));
  require(session_id);
  const fs::path p = dir(session_id) / "staged_plan.json";
  if (!fs::exists(p)) return std::nullopt;
  try {
    return protocol::plan_card_from_json(read_json(p));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptLog, std::string("staged_plan.json: ") + e.what());
  }
}

void Store::clear_staged_plan(const std::string& session_id) {
  std::unique_lock lock(lock_for(session_id));
  require(session_id);
  std::error_code ec;
  fs::remove(dir(session_id) / "staged_plan.json", ec);
}

std::vector<CohortRecord> Store::export_cohort(const std::vector<std::string>& measures) const {
  const auto& wanted = measures.empty() ? stats::outcome_measures() : measures;
  std::vector<CohortRecord> out;
  for (const auto& id : list_sessions()) {
    std::shared_lock lock(lock_for(id));
    const json meta = read_json(dir(id) / "meta.json");
    const auto scales = scales_from_json(read_json(dir(id) / "scales.json"));
    CohortRecord rec;
    rec.session_id = id;
    rec.pseudonym = meta.value("pseudonym", "");
    bool complete = true;
    for (const auto& m : wanted) {
      auto pre = measure_value(scales, m, Timing::Pre);
      auto post = measure_value(scales, m, Timing::Post);
      if (!pre || !post) {
        complete = false;
        break;
      }
      rec.pre[m] = *pre;
      rec.post[m] = *post;
    }
    if (complete) out.push_back(std::move(rec));
  }
  std::sort(out.begin(), out.end(), [](const CohortRecord& a, const CohortRecord& b) {
    return std::tie(a.pseudonym, a.session_id) < std::tie(b.pseudonym, b.session_id);
  });
  return out;
}

}  // namespace vchatter::store
