#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vchatter/profile.hpp"
#include "vchatter/provider.hpp"

namespace vchatter::presence {

enum class Sentiment { Positive, Neutral, Negative };
enum class ExpressionState { Happy, Neutral, Concerned, Sad, Surprised };

std::string_view sentiment_name(Sentiment s);
std::optional<Sentiment> parse_sentiment(std::string_view s);
std::string_view expression_name(ExpressionState e);
std::optional<ExpressionState> parse_expression(std::string_view s);

/// Word -> polarity (+1 / -1). File format: one `word<whitespace>+1|-1` per
/// line, `#` starts a comment.
class Lexicon {
 public:
  static Lexicon load(const std::filesystem::path& path);
  static Lexicon parse(std::string_view text);

  /// Lowercased word tokens: letters, digits and inner apostrophes.
  static std::vector<std::string> tokenize(std::string_view text);

  int polarity(std::string_view word) const;
  /// Sign of (positive hits - negative hits); zero is Neutral.
  Sentiment classify(std::string_view text) const;
  std::size_t size() const { return words_.size(); }

 private:
  std::map<std::string, int, std::less<>> words_;
};

/// Asks the provider for a single label; falls back to the lexicon when no
/// provider is configured, the call fails, or the answer is not a label.
Sentiment classify_sentiment(std::string_view text, const Lexicon& lexicon,
                             provider::Provider* provider = nullptr,
                             const provider::CompletionParams& params = {});

struct ExpressionTable {
  ExpressionState positive = ExpressionState::Happy;
  ExpressionState neutral = ExpressionState::Neutral;
  ExpressionState negative_therapist = ExpressionState::Concerned;
  ExpressionState negative_interlocutor = ExpressionState::Sad;

  static ExpressionTable from_json(const nlohmann::json& j);
};

ExpressionState expression_for(Sentiment s, const agents::AgentProfile& speaker,
                               const ExpressionTable& table = {});

struct AudioRef {
  std::string id;
  int duration_ms = 0;
  std::string format;
  std::optional<std::string> path;  // absent only from the null synthesizer

  bool operator==(const AudioRef&) const = default;
};

nlohmann::json to_json(const AudioRef& a);
AudioRef audio_from_json(const nlohmann::json& j);

class Synthesizer {
 public:
  virtual ~Synthesizer() = default;
  /// Throws Validation on empty text and SynthesisFailed on adapter failure.
  virtual AudioRef synthesize(std::string_view text, std::string_view voice_id) = 0;
};

/// No audio; duration approximates speaking pace at 60 ms per word.
class NullSynthesizer final : public Synthesizer {
 public:
  AudioRef synthesize(std::string_view text, std::string_view voice_id) override;
};

/// Runs `command` with the text on standard input and the voice id in
/// VCHATTER_VOICE; the first line of standard output is the audio file path.
class ExternalCommandSynthesizer final : public Synthesizer {
 public:
  explicit ExternalCommandSynthesizer(std::string command, std::string format = "wav");
  AudioRef synthesize(std::string_view text, std::string_view voice_id) override;

 private:
  std::string command_;
  std::string format_;
  std::atomic<unsigned> counter_{0};
};

/// Adapter by config key: "null" or "external-command".
std::unique_ptr<Synthesizer> make_synthesizer(std::string_view kind, const std::string& command = {});

std::size_t word_count(std::string_view text);

}  // namespace vchatter::presence
