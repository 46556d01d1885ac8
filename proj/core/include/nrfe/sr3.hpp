// SPDX-License-Identifier: Apache-2.0
//
// Self-reinforced reasoning rectification: prompt for reasoning, check the
// returned credibility score against polarity and confidence constraints, and
// re-prompt with the failed attempt until it qualifies or the budget runs out.
#pragma once

#include "nrfe/dataio.hpp"
#include "nrfe/llm_gateway.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace nrfe::sr3 {

struct Sr3Config {
  /// Polarity threshold M.
  int polarity_threshold = 50;
  /// Confidence increment I.
  int confidence_increment = 0;
  int max_iter = 5;
  int parse_retries = 2;
  int workers = 1;
  /// false: loop condition exactly as published (a conjunction for positive
  /// reasoning). true: loop until BOTH positive-reasoning constraints hold.
  bool strict_conjunction = false;

  bool operator==(const Sr3Config&) const = default;
};

void validate(const Sr3Config& cfg);

/// Score direction demanded for a (label, type) branch:
/// Fake+Positive -> Decrease, Real+Positive -> Increase,
/// Fake+Negative -> Increase, Real+Negative -> Decrease.
AlterationState select_alteration(BinaryLabel label, ReasoningType type);

/// Loop-continuation predicate. With the default (verbatim) config:
///   Fake+Positive: v > M && v - v0 > I
///   Real+Positive: v < M && v - v0 < I
///   Fake+Negative: v - v0 < I
///   Real+Negative: v - v0 > I
/// strict_conjunction turns the two positive-branch && into ||.
bool needs_rectify(BinaryLabel label, ReasoningType type, CredibilityScore v,
                   CredibilityScore v_initial, const Sr3Config& cfg);

enum class TerminalReason { Qualified, BudgetExhausted };

struct Sr3Outcome {
  ReasoningStoreEntry record;
  TerminalReason terminal_reason = TerminalReason::Qualified;
  CredibilityScore v_initial{50};
};

/// Gateway failure mid-loop; carries whatever trace was collected.
class RectifyError : public Error {
 public:
  RectifyError(const std::string& what, std::vector<CredibilityScore> partial_trace)
      : Error(what), partial_trace_(std::move(partial_trace)) {}
  const std::vector<CredibilityScore>& partial_trace() const noexcept { return partial_trace_; }

 private:
  std::vector<CredibilityScore> partial_trace_;
};

/// Runs the loop for one item and reasoning type. v_initial is rated through
/// the gateway when not supplied. Issues at most 1 + max_iter reasoning
/// requests.
Sr3Outcome rectify_one(const NewsItem& item, ReasoningType type, llm::Gateway& gateway,
                       const Sr3Config& cfg,
                       std::optional<CredibilityScore> v_initial = std::nullopt);

struct CorpusSummary {
  std::size_t qualified = 0;
  std::size_t exhausted = 0;
  std::size_t errored = 0;
  std::size_t skipped = 0;

  bool operator==(const CorpusSummary&) const = default;
};

/// Generates positive and negative reasoning for every item, appending to the
/// store as outcomes arrive. (id, kind) pairs already in the store are skipped.
/// Per-item gateway errors are counted; store I/O errors abort. Worker count is
/// capped by the backend's max_concurrency().
CorpusSummary rectify_corpus(std::span<const NewsItem> items, llm::Gateway& gateway,
                             const Sr3Config& cfg, const std::filesystem::path& store_path);

}  // namespace nrfe::sr3
