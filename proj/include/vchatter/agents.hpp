#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vchatter/instruments.hpp"
#include "vchatter/plan_card.hpp"
#include "vchatter/profile.hpp"
#include "vchatter/protocol.hpp"
#include "vchatter/provider.hpp"
#include "vchatter/transcript.hpp"

namespace vchatter::agents {

// ---------------------------------------------------------------------------
// Templates

/// Substitutes `{{name}}` placeholders. Throws Validation naming any
/// placeholder without a value.
std::string render_template(std::string_view text, const std::map<std::string, std::string>& vars);

/// Template files on disk (`therapist.txt`, `agent_h.txt`, ...). A file is
/// re-read whenever its modification time changes.
class TemplateStore {
 public:
  explicit TemplateStore(std::filesystem::path dir);

  std::string get(const std::string& template_id) const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  struct Cached {
    std::filesystem::file_time_type mtime;
    std::string text;
  };
  std::filesystem::path dir_;
  mutable std::mutex mu_;
  mutable std::map<std::string, Cached> cache_;
};

inline constexpr const char* kTherapistTemplate = "therapist";
inline constexpr const char* kAgentHTemplate = "agent_h";

// ---------------------------------------------------------------------------
// Prompt bundles

struct PromptBundle {
  AgentKind kind = AgentKind::Therapist;
  std::string system_text;
  std::vector<provider::ChatMessage> context_messages;

  /// System message followed by the context, ready for a provider.
  std::vector<provider::ChatMessage> messages() const;
};

/// Optional facts the therapist prompt may carry.
struct TherapistContext {
  std::optional<instruments::LsasScore> lsas;  // total and band only
  std::optional<Gender> required_gender;       // second scenario at a Low/Medium level
  std::string therapist_name = "Miss.Tree";
  std::string patient_description = "a social anxiety disorder (SAD) patient";
};

/// Therapist prompt for the session's current phase. `history` must contain
/// therapist-channel turns only. Throws SessionClosed.
PromptBundle build_agent_p_prompt(const protocol::SessionState& session,
                                  std::span<const TranscriptEntry> history,
                                  const TemplateStore& templates,
                                  const TherapistContext& ctx = {});

/// Debrief prompt: therapist channel plus the participant's own summary, never
/// any scenario transcript. Throws WrongPhase outside Debrief.
PromptBundle build_debrief_prompt(const protocol::SessionState& session,
                                  std::span<const TranscriptEntry> history,
                                  std::string_view user_summary, const TemplateStore& templates,
                                  const TherapistContext& ctx = {});

/// Therapist hint during exposure, built from the plan card and the
/// participant's help request only.
PromptBundle build_hint_prompt(const protocol::SessionState& session, std::string_view help_text,
                               const TemplateStore& templates, const TherapistContext& ctx = {});

/// Interlocutor prompt for `slot` of `card`. `history` must belong to that
/// scenario channel. Throws SlotOutOfRange.
PromptBundle build_agent_h_prompt(const ExposurePlanCard& card, int slot,
                                  std::span<const TranscriptEntry> history,
                                  const TemplateStore& templates);

// ---------------------------------------------------------------------------
// Plan cards

struct ParseOptions {
  // Exact "Header:" lines only: no markup, no case folding, ASCII colon.
  bool strict = false;
};

inline constexpr std::string_view kRoleSection = "Interaction Role";
inline constexpr std::string_view kScenarioSection = "Exposure Scenario";
inline constexpr std::string_view kTaskSection = "Your Task";
inline constexpr std::string_view kHintsSection = "Hints";
inline constexpr std::string_view kLevelSection = "Exposure Level";

/// Extracts a plan card from therapist output. Throws MissingSection,
/// EmptySection, DuplicateSection, RoleCountMismatch, LevelMismatch, or
/// Validation (empty input).
ExposurePlanCard parse_plan_card(std::string_view text, ExposureLevel expected_level,
                                 const ParseOptions& opts = {});

/// Canonical text form; parse_plan_card(render_plan_card(c), c.level) == c.
std::string render_plan_card(const ExposurePlanCard& card);

/// Roles whose gender could not be determined.
std::vector<std::string> plan_warnings(const ExposurePlanCard& card);

struct PlanEdits {
  std::vector<std::optional<std::string>> role_texts;  // per slot; nullopt keeps the original
  std::optional<std::string> scenario_text;
  std::vector<std::optional<Gender>> role_genders;

  bool empty() const;
};

/// Returns a card with the edited texts. The task is never editable. Throws
/// BlankEdit on a blank substitution and SlotOutOfRange on extra slots.
ExposurePlanCard apply_user_edits(const ExposurePlanCard& card, const PlanEdits& edits);

struct PairViolation {
  enum class Kind { GenderPairViolation, GenderUnspecified } kind;
  std::string message;

  bool operator==(const PairViolation&) const = default;
};

/// The two scenarios of a Low or Medium level must feature one male and one
/// female interlocutor; High pairs are exempt. Throws LevelMismatch.
std::vector<PairViolation> validate_level_pair(const ExposurePlanCard& first,
                                               const ExposurePlanCard& second);

}  // namespace vchatter::agents
