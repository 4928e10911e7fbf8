#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vchatter {

// Every failure raised by the engine carries exactly one of these codes. The
// service layer maps them 1:1 onto stable API error strings.
enum class ErrorCode {
  Validation,
  // instruments / stats
  NoEffectiveSamples,
  InsufficientData,
  MissingMeasure,
  ParticipantMismatch,
  // protocol
  IllegalTransition,
  SessionClosed,
  MissingPlan,
  PlanLevelMismatch,
  TooSoon,
  // agents
  MissingSection,
  EmptySection,
  DuplicateSection,
  RoleCountMismatch,
  LevelMismatch,
  BlankEdit,
  WrongPhase,
  SlotOutOfRange,
  // provider
  Timeout,
  RateLimited,
  MalformedResponse,
  AuthFailed,
  // presence
  SynthesisFailed,
  // store
  NotFound,
  CorruptLog,
  ChannelMismatch,
  Storage,
  // service
  NoStagedPlan,
  PlanValidation,
  TimingViolation,
  InsufficientCohort,
  Busy,
};

inline constexpr ErrorCode kAllErrorCodes[] = {
    ErrorCode::Validation,        ErrorCode::NoEffectiveSamples, ErrorCode::InsufficientData,
    ErrorCode::MissingMeasure,    ErrorCode::ParticipantMismatch, ErrorCode::IllegalTransition,
    ErrorCode::SessionClosed,     ErrorCode::MissingPlan,        ErrorCode::PlanLevelMismatch,
    ErrorCode::TooSoon,           ErrorCode::MissingSection,     ErrorCode::EmptySection,
    ErrorCode::DuplicateSection,  ErrorCode::RoleCountMismatch,  ErrorCode::LevelMismatch,
    ErrorCode::BlankEdit,         ErrorCode::WrongPhase,         ErrorCode::SlotOutOfRange,
    ErrorCode::Timeout,           ErrorCode::RateLimited,        ErrorCode::MalformedResponse,
    ErrorCode::AuthFailed,        ErrorCode::SynthesisFailed,    ErrorCode::NotFound,
    ErrorCode::CorruptLog,        ErrorCode::ChannelMismatch,    ErrorCode::Storage,
    ErrorCode::NoStagedPlan,      ErrorCode::PlanValidation,     ErrorCode::TimingViolation,
    ErrorCode::InsufficientCohort, ErrorCode::Busy,
};

/// Stable snake_case identifier, e.g. "illegal_transition".
std::string_view code_name(ErrorCode code);

/// True for failures a client may retry unchanged (provider throttling, busy session).
bool is_retryable(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::vector<std::string> details = {})
      : std::runtime_error(std::move(message)), code_(code), details_(std::move(details)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::vector<std::string>& details() const noexcept { return details_; }

 private:
  ErrorCode code_;
  std::vector<std::string> details_;
};

// RateLimited carries the server-suggested delay.
class RateLimitedError : public Error {
 public:
  RateLimitedError(std::string message, double retry_after_s)
      : Error(ErrorCode::RateLimited, std::move(message)), retry_after_s_(retry_after_s) {}
  double retry_after_s() const noexcept { return retry_after_s_; }

 private:
  double retry_after_s_;
};

}  // namespace vchatter
