// SPDX-License-Identifier: Apache-2.0
#include "nrfe/synthetic.hpp"

#include "nrfe/error.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <random>
#include <string>

namespace nrfe {

namespace {

constexpr std::array<const char*, 48> kNeutral = {
    "city",     "council", "budget",   "school",  "river",    "bridge",  "market",  "week",
    "people",   "region",  "health",   "plan",    "water",    "county",  "tax",     "vote",
    "road",     "energy",  "farm",     "report",  "station",  "policy",  "project", "village",
    "hospital", "office",  "program",  "service", "industry", "court",   "bill",    "price",
    "transit",  "housing", "park",     "weather", "festival", "harbor",  "library", "factory",
    "campus",   "museum",  "airport",  "clinic",  "district", "stadium", "union",   "forest"};

constexpr std::array<const char*, 16> kRealWords = {
    "confirmed", "official",  "statement", "according", "data",      "verified",
    "sources",   "published", "agency",    "records",   "audit",     "testimony",
    "documented", "survey",   "announced", "spokesperson"};

constexpr std::array<const char*, 16> kFakeWords = {
    "shocking",  "secret",  "miracle", "exposed", "hoax",    "banned",
    "conspiracy", "leaked", "outrage", "unbelievable", "coverup", "insiders",
    "viral",     "hidden",  "bombshell", "rumor"};

template <std::size_t N>
const char* pick(const std::array<const char*, N>& pool, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, N - 1);
  return pool[d(rng)];
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

}  // namespace

SyntheticData make_synthetic_corpus(int n_items, std::uint64_t seed) {
  if (n_items < 4) throw InvalidArgument("synthetic corpus needs at least 4 items");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> length(14, 22);
  std::uniform_int_distribution<int> cue_count(3, 5);
  std::bernoulli_distribution noise(0.15);

  // Exactly balanced labels in a seeded order.
  std::vector<BinaryLabel> labels;
  for (int i = 0; i < n_items; ++i) labels.push_back(i % 2 == 0 ? BinaryLabel::Real : BinaryLabel::Fake);
  std::shuffle(labels.begin(), labels.end(), rng);

  SyntheticData data;
  for (int i = 0; i < n_items; ++i) {
    const BinaryLabel label = labels[static_cast<std::size_t>(i)];
    const bool real = label == BinaryLabel::Real;
    const auto& own = real ? kRealWords : kFakeWords;
    const auto& other = real ? kFakeWords : kRealWords;

    std::vector<std::string> cues;
    const int n_cues = cue_count(rng);
    for (int k = 0; k < n_cues; ++k) cues.emplace_back(pick(own, rng));
    std::vector<std::string> words = cues;
    if (noise(rng)) words.emplace_back(pick(other, rng));
    const int total = length(rng);
    while (static_cast<int>(words.size()) < total) words.emplace_back(pick(kNeutral, rng));
    std::shuffle(words.begin(), words.end(), rng);

    char id[32];
    std::snprintf(id, sizeof id, "syn-%04d", i);
    NewsItem item;
    item.id = id;
    item.text = join(words);
    item.raw_label = real ? "real" : "fake";
    item.label = label;
    item.dataset = Dataset::Synthetic;

    const std::string topic = std::string(pick(kNeutral, rng)) + " " + pick(kNeutral, rng);
    const std::string positive = "the story about " + topic + " relies on " + cues[0] + " and " +
                                 cues[1] + " details , the " + cues[2] +
                                 " framing matches the pattern of " +
                                 (real ? "credible reporting" : "fabricated content");
    const std::string negative = "the story about " + topic + " could instead be read through " +
                                 pick(other, rng) + " and " + pick(other, rng) + " signals , the " +
                                 pick(other, rng) + " angle hints at " +
                                 (real ? "fabricated content" : "credible reporting");

    ReasoningStoreEntry pos;
    pos.news_id = item.id;
    pos.kind = ReasoningType::Positive;
    pos.reasoning_text = positive;
    pos.score = CredibilityScore(real ? 85 : 15);
    pos.qualified = true;
    pos.iterations_used = 0;
    pos.score_trace = {pos.score};

    ReasoningStoreEntry neg;
    neg.news_id = item.id;
    neg.kind = ReasoningType::Negative;
    neg.reasoning_text = negative;
    neg.score = CredibilityScore(real ? 40 : 60);
    neg.qualified = true;
    neg.iterations_used = 0;
    neg.score_trace = {neg.score};

    data.items.push_back(std::move(item));
    data.store.push_back(std::move(pos));
    data.store.push_back(std::move(neg));
  }
  return data;
}

}  // namespace nrfe
