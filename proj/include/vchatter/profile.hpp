#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "vchatter/plan_card.hpp"

namespace vchatter::agents {

enum class AgentKind { Therapist, Interlocutor };

std::string_view agent_kind_name(AgentKind k);

struct AgentProfile {
  AgentKind kind = AgentKind::Therapist;
  std::string display_name;
  Gender gender = Gender::Unspecified;
  std::vector<std::string> base_traits;
  std::string voice_id;
  std::string template_id;
};

/// Traits every agent carries regardless of role.
const std::vector<std::string>& base_traits();

/// The single therapist of a session.
AgentProfile therapist_profile();

/// Interlocutor instantiated from a plan-card role.
AgentProfile interlocutor_profile(const RoleSpec& role);

}  // namespace vchatter::agents
