// SPDX-License-Identifier: Apache-2.0
#include "nrfe/types.hpp"

namespace nrfe {

std::string_view to_string(BinaryLabel label) {
  return label == BinaryLabel::Real ? "real" : "fake";
}

BinaryLabel parse_binary_label(std::string_view text) {
  if (text == "real") return BinaryLabel::Real;
  if (text == "fake") return BinaryLabel::Fake;
  throw InvalidArgument("unknown binary label '" + std::string(text) + "'");
}

std::string_view to_string(ReasoningType type) {
  return type == ReasoningType::Positive ? "positive" : "negative";
}

ReasoningType parse_reasoning_type(std::string_view text) {
  if (text == "positive") return ReasoningType::Positive;
  if (text == "negative") return ReasoningType::Negative;
  throw InvalidArgument("unknown reasoning kind '" + std::string(text) + "'");
}

std::string_view to_string(AlterationState state) {
  return state == AlterationState::Increase ? "increase" : "decrease";
}

CredibilityScore::CredibilityScore(int value) : value_(value) {
  if (value < kMin || value > kMax) {
    throw InvalidArgument("credibility score " + std::to_string(value) +
                          " outside [0, 100]");
  }
}

std::optional<CredibilityScore> CredibilityScore::checked(long long value) {
  if (value < kMin || value > kMax) return std::nullopt;
  return CredibilityScore(static_cast<int>(value));
}

}  // namespace nrfe
