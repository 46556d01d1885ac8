// SPDX-License-Identifier: Apache-2.0
//
// Binary classification metrics with Real and Fake each scored as the
// positive class for their own columns.
#pragma once

#include "nrfe/types.hpp"

#include <array>
#include <filesystem>
#include <span>
#include <string>

namespace nrfe {

struct MetricsReport {
  double acc = 0;
  double mac_f1 = 0;
  double p_t = 0, r_t = 0, f1_t = 0;
  double p_f = 0, r_f = 0, f1_f = 0;
  /// confusion[truth][prediction], index 0 = Real, 1 = Fake.
  std::array<std::array<long long, 2>, 2> confusion{};

  bool operator==(const MetricsReport&) const = default;
};

/// Throws InvalidArgument on empty input or a length mismatch. Zero
/// denominators give 0.
MetricsReport compute_metrics(std::span<const BinaryLabel> predictions,
                              std::span<const BinaryLabel> truths);

/// JSON object with the MetricsReport field names.
std::string metrics_json(const MetricsReport& report);
MetricsReport parse_metrics_json(const std::string& text);
void write_metrics(const std::filesystem::path& path, const MetricsReport& report);

}  // namespace nrfe
