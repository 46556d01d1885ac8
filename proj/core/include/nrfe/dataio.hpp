// SPDX-License-Identifier: Apache-2.0
//
// Labeled news corpora, label grouping schemes, deterministic splits and the
// reasoning store.
//
// Corpus JSONL, one object per line:
//   {"id": str, "text": str, "label": str}
// Reasoning store JSONL:
//   {"news_id": str, "kind": "positive"|"negative", "reasoning": str,
//    "score": int, "qualified": bool, "iterations": int, "score_trace": [int, ...]}
#pragma once

#include "nrfe/types.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace nrfe {

enum class Dataset { Politifact, Twitter15, Twitter16, Synthetic };
std::string_view to_string(Dataset dataset);
Dataset parse_dataset(std::string_view text);

/// How raw dataset labels collapse to Real/Fake.
///  - Verbatim: {non-rumors, false-rumors} -> Real, {true-rumors, unverified-rumors} -> Fake
///  - Corrected:     {non-rumors, true-rumors} -> Real, {false-rumors, unverified-rumors} -> Fake
///  - PolitifactBinary: {real} -> Real, {fake} -> Fake
enum class LabelScheme { Verbatim, Corrected, PolitifactBinary };
std::string_view to_string(LabelScheme scheme);
LabelScheme parse_label_scheme(std::string_view text);
/// Twitter datasets default to Verbatim, the others to PolitifactBinary.
LabelScheme default_scheme(Dataset dataset);

struct NewsItem {
  std::string id;
  std::string text;
  std::string raw_label;
  BinaryLabel label = BinaryLabel::Real;
  Dataset dataset = Dataset::Synthetic;

  bool operator==(const NewsItem&) const = default;
};

/// Throws InvalidArgument for a label the scheme does not know.
BinaryLabel map_label(std::string_view raw, LabelScheme scheme);

/// Reads a corpus JSONL file in file order. Blank lines are ignored. Any
/// malformed record fails the whole call with a FormatError naming its line.
std::vector<NewsItem> load_corpus(const std::filesystem::path& path, Dataset dataset,
                                  std::optional<LabelScheme> scheme = std::nullopt);
void write_corpus(const std::filesystem::path& path, std::span<const NewsItem> items);

struct CorpusSplit {
  std::vector<NewsItem> train;
  std::vector<NewsItem> test;
};

/// Stratified, seeded split. |train| == round(train_fraction * N) and each
/// class lands within one item of its proportional share.
CorpusSplit split_corpus(std::span<const NewsItem> items, double train_fraction,
                         std::uint64_t seed);

struct ReasoningStoreEntry {
  std::string news_id;
  ReasoningType kind = ReasoningType::Positive;
  std::string reasoning_text;
  CredibilityScore score{50};
  bool qualified = false;
  int iterations_used = 0;
  std::vector<CredibilityScore> score_trace;

  bool operator==(const ReasoningStoreEntry&) const = default;
};

/// Checks the entry invariants; max_iter bounds iterations_used when given.
void validate_entry(const ReasoningStoreEntry& entry, std::optional<int> max_iter = std::nullopt);

/// Writes a whole store. Throws InvalidArgument on a duplicate (news_id, kind)
/// before touching the file.
void write_store(const std::filesystem::path& path, std::span<const ReasoningStoreEntry> entries);
std::vector<ReasoningStoreEntry> read_store(const std::filesystem::path& path);

std::string store_line(const ReasoningStoreEntry& entry);

/// Serialized appender used by long-running generation. Entries already on
/// disk are indexed at construction so resumed runs can skip them.
class StoreAppender {
 public:
  explicit StoreAppender(std::filesystem::path path);

  bool contains(const std::string& news_id, ReasoningType kind) const;
  /// Appends and flushes one line. Thread-safe.
  void append(const ReasoningStoreEntry& entry);
  std::size_t size() const;

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::set<std::pair<std::string, ReasoningType>> keys_;
  std::ofstream out_;
};

}  // namespace nrfe
