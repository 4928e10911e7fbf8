#include "vchatter/error.hpp"

namespace vchatter {

std::string_view code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::Validation: return "validation_error";
    case ErrorCode::NoEffectiveSamples: return "no_effective_samples";
    case ErrorCode::InsufficientData: return "insufficient_data";
    case ErrorCode::MissingMeasure: return "missing_measure";
    case ErrorCode::ParticipantMismatch: return "participant_mismatch";
    case ErrorCode::IllegalTransition: return "illegal_transition";
    case ErrorCode::SessionClosed: return "session_closed";
    case ErrorCode::MissingPlan: return "missing_plan";
    case ErrorCode::PlanLevelMismatch: return "plan_level_mismatch";
    case ErrorCode::TooSoon: return "too_soon";
    case ErrorCode::MissingSection: return "plan_missing_section";
    case ErrorCode::EmptySection: return "plan_empty_section";
    case ErrorCode::DuplicateSection: return "plan_duplicate_section";
    case ErrorCode::RoleCountMismatch: return "plan_role_count_mismatch";
    case ErrorCode::LevelMismatch: return "level_mismatch";
    case ErrorCode::BlankEdit: return "blank_edit";
    case ErrorCode::WrongPhase: return "wrong_phase";
    case ErrorCode::SlotOutOfRange: return "slot_out_of_range";
    case ErrorCode::Timeout: return "provider_timeout";
    case ErrorCode::RateLimited: return "provider_rate_limited";
    case ErrorCode::MalformedResponse: return "provider_malformed_response";
    case ErrorCode::AuthFailed: return "provider_auth_failed";
    case ErrorCode::SynthesisFailed: return "synthesis_failed";
    case ErrorCode::NotFound: return "not_found";
    case ErrorCode::CorruptLog: return "corrupt_log";
    case ErrorCode::ChannelMismatch: return "channel_mismatch";
    case ErrorCode::Storage: return "storage_error";
    case ErrorCode::NoStagedPlan: return "no_staged_plan";
    case ErrorCode::PlanValidation: return "plan_validation";
    case ErrorCode::TimingViolation: return "timing_violation";
    case ErrorCode::InsufficientCohort: return "insufficient_cohort";
    case ErrorCode::Busy: return "session_busy";
  }
  return "unknown";
}

bool is_retryable(ErrorCode code) {
  switch (code) {
    case ErrorCode::Timeout:
    case ErrorCode::RateLimited:
    case ErrorCode::Busy:
    case ErrorCode::Storage:
      return true;
    default:
      return false;
  }
}

}  // namespace vchatter
