// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nrfe/error.hpp"

#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace nrfe {

enum class BinaryLabel { Real = 0, Fake = 1 };

/// Lowercase "real" / "fake".
std::string_view to_string(BinaryLabel label);
BinaryLabel parse_binary_label(std::string_view text);
inline int class_index(BinaryLabel label) { return static_cast<int>(label); }
inline BinaryLabel label_from_index(int index) {
  return index == 0 ? BinaryLabel::Real : BinaryLabel::Fake;
}

/// Kind of generated reasoning: consistent with the true label (Positive) or
/// arguing against it (Negative).
enum class ReasoningType { Positive, Negative };
std::string_view to_string(ReasoningType type);
ReasoningType parse_reasoning_type(std::string_view text);

/// Direction the credibility score is asked to move.
enum class AlterationState { Increase, Decrease };
std::string_view to_string(AlterationState state);

/// Integer credibility rating in [0, 100]; 0 means fake, 100 means real.
class CredibilityScore {
 public:
  static constexpr int kMin = 0;
  static constexpr int kMax = 100;

  /// Throws InvalidArgument when outside [0, 100].
  explicit CredibilityScore(int value);
  static std::optional<CredibilityScore> checked(long long value);

  int value() const noexcept { return value_; }
  auto operator<=>(const CredibilityScore&) const = default;

 private:
  int value_;
};

}  // namespace nrfe
