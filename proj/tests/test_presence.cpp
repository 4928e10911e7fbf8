#include <doctest.h>

#include "support.hpp"
#include "vchatter/agents.hpp"
#include "vchatter/presence.hpp"

using namespace vchatter;
using namespace vchatter::presence;
using vtest::error_of;
namespace fs = std::filesystem;

namespace {

// Returns a fixed label, or throws when `fail` is set.
class LabelProvider final : public provider::Provider {
 public:
  explicit LabelProvider(std::string label, bool fail = false) : label_(std::move(label)), fail_(fail) {}
  std::string complete(std::span<const provider::ChatMessage> messages,
                       const provider::CompletionParams&) override {
    provider::validate_messages(messages);
    ++calls;
    if (fail_) throw Error(ErrorCode::Timeout, "down");
    return label_;
  }
  std::string complete_streaming(std::span<const provider::ChatMessage> m, const provider::CompletionParams& p,
                                 const provider::ChunkSink&) override {
    return complete(m, p);
  }
  int calls = 0;

 private:
  std::string label_;
  bool fail_;
};

}  // namespace

TEST_CASE("lexicon parsing and classification") {
  const auto lex = Lexicon::parse("# comment\nhappy +1\nsad -1\n\ngreat +1  # trailing\n");
  CHECK(lex.size() == 3);
  CHECK(lex.polarity("happy") == 1);
  CHECK(lex.polarity("sad") == -1);
  CHECK(lex.polarity("meh") == 0);
  CHECK(lex.classify("I'm HAPPY, really great!") == Sentiment::Positive);
  CHECK(lex.classify("so sad") == Sentiment::Negative);
  CHECK(lex.classify("happy but sad") == Sentiment::Neutral);
  CHECK(lex.classify("") == Sentiment::Neutral);
  CHECK(error_of([] { Lexicon::parse("happy maybe\n"); }) == ErrorCode::Validation);
  CHECK(error_of([] { Lexicon::load("/nonexistent/lexicon.txt"); }) == ErrorCode::NotFound);
}

TEST_CASE("tokenizer") {
  CHECK(Lexicon::tokenize("Don't  stop, it's 2 good.") ==
        std::vector<std::string>{"don't", "stop", "it's", "2", "good"});
  CHECK(Lexicon::tokenize("'quoted'") == std::vector<std::string>{"quoted"});
}

TEST_CASE("shipped lexicon") {
  const auto lex = Lexicon::load(vtest::asset_dir() / "lexicon.txt");
  CHECK(lex.size() > 100);
  CHECK(lex.classify("I feel confident and calm") == Sentiment::Positive);
  CHECK(lex.classify("The weather is cloudy") == Sentiment::Neutral);
}

TEST_CASE("provider classification with fallback") {
  const auto lex = Lexicon::parse("good +1\n");
  LabelProvider neg(" Negative\n");
  CHECK(classify_sentiment("good", lex, &neg) == Sentiment::Negative);
  LabelProvider junk("it depends");
  CHECK(classify_sentiment("good", lex, &junk) == Sentiment::Positive);
  LabelProvider down("", true);
  CHECK(classify_sentiment("good", lex, &down) == Sentiment::Positive);
  CHECK(classify_sentiment("   ", lex, &down) == Sentiment::Neutral);
  CHECK(down.calls == 1);
}

TEST_CASE("expression mapping") {
  const auto therapist = agents::therapist_profile();
  const auto other = agents::interlocutor_profile({"Hui", Gender::Female, "a classmate"});
  CHECK(expression_for(Sentiment::Positive, therapist) == ExpressionState::Happy);
  CHECK(expression_for(Sentiment::Neutral, other) == ExpressionState::Neutral);
  CHECK(expression_for(Sentiment::Negative, therapist) == ExpressionState::Concerned);
  CHECK(expression_for(Sentiment::Negative, other) == ExpressionState::Sad);

  const auto table = ExpressionTable::from_json({{"negative_interlocutor", "Surprised"}});
  CHECK(expression_for(Sentiment::Negative, other, table) == ExpressionState::Surprised);
  CHECK(error_of([] { ExpressionTable::from_json({{"positive", "Ecstatic"}}); }) == ErrorCode::Validation);
  for (auto e : {ExpressionState::Happy, ExpressionState::Neutral, ExpressionState::Concerned,
                 ExpressionState::Sad, ExpressionState::Surprised}) {
    CHECK(parse_expression(expression_name(e)) == e);
  }
}

TEST_CASE("null synthesizer") {
  NullSynthesizer s;
  const auto a = s.synthesize("one two three", "therapist-female");
  CHECK(a.duration_ms == 180);
  CHECK(a.format == "none");
  CHECK_FALSE(a.path.has_value());
  CHECK(a == s.synthesize("one two three", "therapist-female"));
  CHECK(a.id != s.synthesize("one two three", "agent-h-male").id);
  CHECK(audio_from_json(to_json(a)) == a);
  CHECK(error_of([&] { s.synthesize("  \n", "v"); }) == ErrorCode::Validation);
}

TEST_CASE("external command synthesizer") {
  vtest::TempDir dir;
  const auto script = dir / "tts.sh";
  {
    std::ofstream out(script);
    out << "#!/bin/sh\ncat > \"" << (dir / "heard.txt").string() << "\"\necho \"" << dir.path().string()
        << "/$VCHATTER_VOICE.wav\"\n";
  }
  fs::permissions(script, fs::perms::owner_all);
  auto synth = make_synthesizer("external-command", script.string());
  const auto a = synth->synthesize("hello you", "agent-h-female");
  REQUIRE(a.path.has_value());
  CHECK(*a.path == (dir / "agent-h-female.wav").string());
  CHECK(a.format == "wav");
  CHECK(vtest::slurp(dir / "heard.txt") == "hello you");

  auto failing = make_synthesizer("external-command", "false");
  CHECK(error_of([&] { failing->synthesize("hello", "v"); }) == ErrorCode::SynthesisFailed);
  CHECK(error_of([] { make_synthesizer("external-command"); }) == ErrorCode::Validation);
  CHECK(error_of([] { make_synthesizer("robot"); }) == ErrorCode::Validation);
  CHECK(word_count("  a  b\tc\n") == 3);
}
