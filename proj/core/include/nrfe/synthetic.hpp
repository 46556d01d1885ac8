// SPDX-License-Identifier: Apache-2.0
//
// Deterministic, label-correlated toy corpus with templated reasoning, used
// for desk-scale runs and tests.
#pragma once

#include "nrfe/dataio.hpp"

#include <cstdint>
#include <vector>

namespace nrfe {

struct SyntheticData {
  std::vector<NewsItem> items;
  std::vector<ReasoningStoreEntry> store;
};

/// News texts mix neutral words with class-indicative words (plus a little
/// cross-class noise). Positive reasoning reuses the item's class words,
/// negative reasoning uses words of the opposite class. Classes are balanced
/// (within one for odd n) and every entry is qualified. Throws
/// InvalidArgument for n < 4.
SyntheticData make_synthetic_corpus(int n_items, std::uint64_t seed);

}  // namespace nrfe
