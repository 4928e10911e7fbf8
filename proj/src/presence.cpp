#include "vchatter/presence.hpp"

#include <unistd.h>

#include <array>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "vchatter/error.hpp"

namespace vchatter::presence {

namespace {

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string fnv1a_hex(std::string_view a, std::string_view b) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
  };
  mix(a);
  mix("\x1f");
  mix(b);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

bool word_char(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

}  // namespace

std::string_view sentiment_name(Sentiment s) {
  switch (s) {
    case Sentiment::Positive: return "positive";
    case Sentiment::Neutral: return "neutral";
    case Sentiment::Negative: return "negative";
  }
  return "neutral";
}

std::optional<Sentiment> parse_sentiment(std::string_view s) {
  const auto w = to_lower(trim(s));
  if (w == "positive") return Sentiment::Positive;
  if (w == "neutral") return Sentiment::Neutral;
  if (w == "negative") return Sentiment::Negative;
  return std::nullopt;
}

std::string_view expression_name(ExpressionState e) {
  switch (e) {
    case ExpressionState::Happy: return "happy";
    case ExpressionState::Neutral: return "neutral";
    case ExpressionState::Concerned: return "concerned";
    case ExpressionState::Sad: return "sad";
    case ExpressionState::Surprised: return "surprised";
  }
  return "neutral";
}

std::optional<ExpressionState> parse_expression(std::string_view s) {
  const auto w = to_lower(trim(s));
  for (auto e : {ExpressionState::Happy, ExpressionState::Neutral, ExpressionState::Concerned,
                 ExpressionState::Sad, ExpressionState::Surprised}) {
    if (expression_name(e) == w) return e;
  }
  return std::nullopt;
}

// --- lexicon ---------------------------------------------------------------

Lexicon Lexicon::parse(std::string_view text) {
  Lexicon lex;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string word, polarity;
    if (!(fields >> word)) continue;
    if (!(fields >> polarity) || (polarity != "+1" && polarity != "-1" && polarity != "1")) {
      throw Error(ErrorCode::Validation, "lexicon line " + std::to_string(lineno) +
                                             ": expected '<word> +1|-1'");
    }
    lex.words_[to_lower(word)] = polarity == "-1" ? -1 : 1;
  }
  return lex;
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open lexicon " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::vector<std::string> Lexicon::tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    const bool inner_apostrophe = c == '\'' && !cur.empty() && i + 1 < text.size() &&
                                  word_char(static_cast<unsigned char>(text[i + 1]));
    if (word_char(c) || inner_apostrophe) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

int Lexicon::polarity(std::string_view word) const {
  auto it = words_.find(word);
  return it == words_.end() ? 0 : it->second;
}

Sentiment Lexicon::classify(std::string_view text) const {
  int score = 0;
  for (const auto& tok : tokenize(text)) score += polarity(tok);
  if (score > 0) return Sentiment::Positive;
  if (score < 0) return Sentiment::Negative;
  return Sentiment::Neutral;
}

Sentiment classify_sentiment(std::string_view text, const Lexicon& lexicon,
                             provider::Provider* provider, const provider::CompletionParams& params) {
  if (trim(text).empty()) return Sentiment::Neutral;
  if (provider != nullptr) {
    using provider::ChatMessage;
    using provider::Role;
    const std::vector<ChatMessage> messages{
        {Role::System,
         "Classify the overall sentiment of the user's text. Answer with exactly one word: "
         "positive, neutral, or negative."},
        {Role::User, std::string(text)},
    };
    try {
      auto p = params;
      p.temperature = 0.0;
      p.max_tokens = 4;
      if (auto label = parse_sentiment(provider->complete(messages, p))) return *label;
    } catch (const Error&) {
      // fall through to the lexicon
    }
  }
  return lexicon.classify(text);
}

// --- expressions -----------------------------------------------------------

ExpressionTable ExpressionTable::from_json(const nlohmann::json& j) {
  ExpressionTable t;
  auto read = [&](const char* key, ExpressionState& slot) {
    if (!j.contains(key)) return;
    auto e = parse_expression(j.at(key).get<std::string>());
    if (!e) throw Error(ErrorCode::Validation, std::string("expression table: bad value for ") + key);
    slot = *e;
  };
  read("positive", t.positive);
  read("neutral", t.neutral);
  read("negative_therapist", t.negative_therapist);
  read("negative_interlocutor", t.negative_interlocutor);
  return t;
}

ExpressionState expression_for(Sentiment s, const agents::AgentProfile& speaker,
                               const ExpressionTable& table) {
  switch (s) {
    case Sentiment::Positive: return table.positive;
    case Sentiment::Neutral: return table.neutral;
    case Sentiment::Negative:
      return speaker.kind == agents::AgentKind::Therapist ? table.negative_therapist
                                                          : table.negative_interlocutor;
  }
  return table.neutral;
}

// --- audio -----------------------------------------------------------------

nlohmann::json to_json(const AudioRef& a) {
  return {{"id", a.id},
          {"duration_ms", a.duration_ms},
          {"format", a.format},
          {"path", a.path ? nlohmann::json(*a.path) : nlohmann::json(nullptr)}};
}

AudioRef audio_from_json(const nlohmann::json& j) {
  AudioRef a;
  a.id = j.at("id").get<std::string>();
  a.duration_ms = j.at("duration_ms").get<int>();
  a.format = j.at("format").get<std::string>();
  if (!j.at("path").is_null()) a.path = j.at("path").get<std::string>();
  return a;
}

std::size_t word_count(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (unsigned char c : text) {
    const bool space = std::isspace(c) != 0;
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

AudioRef NullSynthesizer::synthesize(std::string_view text, std::string_view voice_id) {
  if (trim(text).empty()) throw Error(ErrorCode::Validation, "cannot synthesize empty text");
  AudioRef a;
  a.id = fnv1a_hex(voice_id, text);
  a.duration_ms = static_cast<int>(60 * word_count(text));
  a.format = "none";
  return a;
}

ExternalCommandSynthesizer::ExternalCommandSynthesizer(std::string command, std::string format)
    : command_(std::move(command)), format_(std::move(format)) {}

AudioRef ExternalCommandSynthesizer::synthesize(std::string_view text, std::string_view voice_id) {
  if (trim(text).empty()) throw Error(ErrorCode::Validation, "cannot synthesize empty text");
  std::string voice;
  for (char c : voice_id) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') voice.push_back(c);
  }

  char tmpl[] = "/tmp/vchatter-tts-XXXXXX";
  const int fd = ::mkstemp(tmpl);
  if (fd < 0) throw Error(ErrorCode::SynthesisFailed, "cannot create synthesis input file");
  {
    const std::string body(text);
    const bool wrote = ::write(fd, body.data(), body.size()) == static_cast<ssize_t>(body.size());
    ::close(fd);
    if (!wrote) {
      std::remove(tmpl);
      throw Error(ErrorCode::SynthesisFailed, "cannot write synthesis input file");
    }
  }
  const std::string cmd = "VCHATTER_VOICE='" + voice + "' " + command_ + " < '" + tmpl + "'";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (pipe == nullptr) {
    std::remove(tmpl);
    throw Error(ErrorCode::SynthesisFailed, "cannot launch synthesis command");
  }
  std::string out;
  std::array<char, 512> buf{};
  while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe) != nullptr) out += buf.data();
  const int status = ::pclose(pipe);
  std::remove(tmpl);
  const std::string path = trim(out.substr(0, out.find('\n')));
  if (status != 0 || path.empty()) {
    throw Error(ErrorCode::SynthesisFailed,
                "synthesis command failed (status " + std::to_string(status) + ")");
  }
  AudioRef a;
  a.id = fnv1a_hex(voice_id, text) + "-" + std::to_string(counter_++);
  a.duration_ms = static_cast<int>(60 * word_count(text));
  a.format = format_;
  a.path = path;
  return a;
}

std::unique_ptr<Synthesizer> make_synthesizer(std::string_view kind, const std::string& command) {
  if (kind == "null" || kind.empty()) return std::make_unique<NullSynthesizer>();
  if (kind == "external-command") {
    if (command.empty()) throw Error(ErrorCode::Validation, "external-command synthesizer needs a command");
    return std::make_unique<ExternalCommandSynthesizer>(command);
  }
  throw Error(ErrorCode::Validation, "unknown synthesizer '" + std::string(kind) + "'");
}

}  // namespace vchatter::presence
