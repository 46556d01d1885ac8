// SPDX-License-Identifier: Apache-2.0
#include "nrfe/dataio.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <numeric>
#include <random>

namespace nrfe {

namespace {

using Json = nlohmann::ordered_json;

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

std::string_view strip_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

const std::string& require_string(const Json& obj, const char* field, std::size_t line) {
  auto it = obj.find(field);
  if (it == obj.end()) throw FormatError(std::string("missing \"") + field + "\" field", line);
  if (!it->is_string()) throw FormatError(std::string("\"") + field + "\" is not a string", line);
  return it->get_ref<const std::string&>();
}

}  // namespace

std::string_view to_string(Dataset dataset) {
  switch (dataset) {
    case Dataset::Politifact: return "politifact";
    case Dataset::Twitter15: return "twitter15";
    case Dataset::Twitter16: return "twitter16";
    case Dataset::Synthetic: return "synthetic";
  }
  return "synthetic";
}

Dataset parse_dataset(std::string_view text) {
  if (text == "politifact") return Dataset::Politifact;
  if (text == "twitter15") return Dataset::Twitter15;
  if (text == "twitter16") return Dataset::Twitter16;
  if (text == "synthetic") return Dataset::Synthetic;
  throw InvalidArgument("unknown dataset '" + std::string(text) + "'");
}

std::string_view to_string(LabelScheme scheme) {
  switch (scheme) {
    case LabelScheme::Verbatim: return "verbatim";
    case LabelScheme::Corrected: return "corrected";
    case LabelScheme::PolitifactBinary: return "politifact_binary";
  }
  return "verbatim";
}

LabelScheme parse_label_scheme(std::string_view text) {
  if (text == "verbatim") return LabelScheme::Verbatim;
  if (text == "corrected") return LabelScheme::Corrected;
  if (text == "politifact_binary") return LabelScheme::PolitifactBinary;
  throw InvalidArgument("unknown label scheme '" + std::string(text) + "'");
}

LabelScheme default_scheme(Dataset dataset) {
  return (dataset == Dataset::Twitter15 || dataset == Dataset::Twitter16)
             ? LabelScheme::Verbatim
             : LabelScheme::PolitifactBinary;
}

BinaryLabel map_label(std::string_view raw, LabelScheme scheme) {
  switch (scheme) {
    case LabelScheme::Verbatim:
      if (raw == "non-rumors" || raw == "false-rumors") return BinaryLabel::Real;
      if (raw == "true-rumors" || raw == "unverified-rumors") return BinaryLabel::Fake;
      break;
    case LabelScheme::Corrected:
      if (raw == "non-rumors" || raw == "true-rumors") return BinaryLabel::Real;
      if (raw == "false-rumors" || raw == "unverified-rumors") return BinaryLabel::Fake;
      break;
    case LabelScheme::PolitifactBinary:
      if (raw == "real") return BinaryLabel::Real;
      if (raw == "fake") return BinaryLabel::Fake;
      break;
  }
  throw InvalidArgument("label '" + std::string(raw) + "' is unknown under scheme " +
                        std::string(to_string(scheme)));
}

std::vector<NewsItem> load_corpus(const std::filesystem::path& path, Dataset dataset,
                                  std::optional<LabelScheme> scheme) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus: " + path.string());
  const LabelScheme effective = scheme.value_or(default_scheme(dataset));

  std::vector<NewsItem> items;
  std::set<std::string> ids;
  std::string raw_line;
  std::size_t line_no = 0;
  while (std::getline(in, raw_line)) {
    ++line_no;
    const std::string_view line = strip_cr(raw_line);
    if (is_blank(line)) continue;
    Json obj;
    try {
      obj = Json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    if (!obj.is_object()) throw FormatError("record is not a JSON object", line_no);

    NewsItem item;
    item.id = require_string(obj, "id", line_no);
    item.text = require_string(obj, "text", line_no);
    item.raw_label = require_string(obj, "label", line_no);
    item.dataset = dataset;
    if (item.id.empty()) throw FormatError("empty id", line_no);
    if (is_blank(item.text)) throw FormatError("text is empty after trimming", line_no);
    if (!ids.insert(item.id).second) throw FormatError("duplicate id '" + item.id + "'", line_no);
    try {
      item.label = map_label(item.raw_label, effective);
    } catch (const InvalidArgument& e) {
      throw FormatError(e.what(), line_no);
    }
    items.push_back(std::move(item));
  }
  return items;
}

void write_corpus(const std::filesystem::path& path, std::span<const NewsItem> items) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open corpus for writing: " + path.string());
  for (const auto& item : items) {
    Json obj;
    obj["id"] = item.id;
    obj["text"] = item.text;
    obj["label"] = item.raw_label;
    out << obj.dump() << '\n';
  }
  if (!out) throw IoError("failed writing corpus: " + path.string());
}

CorpusSplit split_corpus(std::span<const NewsItem> items, double train_fraction,
                         std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidArgument("train_fraction must lie in (0, 1)");
  }
  if (items.empty()) throw InvalidArgument("cannot split an empty corpus");

  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  // Per-class quotas by largest remainder so they sum to round(f * N).
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t idx : order) by_class[class_index(items[idx].label)].push_back(idx);
  const auto total_train =
      static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(items.size())));
  std::array<std::size_t, 2> quota{};
  std::array<double, 2> remainder{};
  std::size_t assigned = 0;
  for (int c = 0; c < 2; ++c) {
    const double exact = train_fraction * static_cast<double>(by_class[c].size());
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    remainder[c] = exact - std::floor(exact);
    assigned += quota[c];
  }
  while (assigned < total_train) {
    // Ties go to class 0 (Real); never exceed the class size.
    int pick = remainder[0] >= remainder[1] ? 0 : 1;
    if (quota[pick] >= by_class[pick].size()) pick = 1 - pick;
    ++quota[pick];
    remainder[pick] = -1.0;
    ++assigned;
  }

  std::vector<bool> in_train(items.size(), false);
  for (int c = 0; c < 2; ++c) {
    for (std::size_t k = 0; k < quota[c]; ++k) in_train[by_class[c][k]] = true;
  }
  CorpusSplit split;
  for (std::size_t idx : order) {
    (in_train[idx] ? split.train : split.test).push_back(items[idx]);
  }
  return split;
}

void validate_entry(const ReasoningStoreEntry& entry, std::optional<int> max_iter) {
  if (entry.news_id.empty()) throw InvalidArgument("store entry has an empty news_id");
  if (entry.score_trace.empty()) throw InvalidArgument("store entry has an empty score_trace");
  if (entry.score_trace.back() != entry.score) {
    throw InvalidArgument("store entry score differs from the last score_trace element");
  }
  if (entry.iterations_used < 0) throw InvalidArgument("negative iterations_used");
  if (static_cast<std::size_t>(entry.iterations_used) + 1 != entry.score_trace.size()) {
    throw InvalidArgument("score_trace length must equal iterations_used + 1");
  }
  if (max_iter && entry.iterations_used > *max_iter) {
    throw InvalidArgument("iterations_used exceeds max_iter");
  }
}

std::string store_line(const ReasoningStoreEntry& entry) {
  Json obj;
  obj["news_id"] = entry.news_id;
  obj["kind"] = std::string(to_string(entry.kind));
  obj["reasoning"] = entry.reasoning_text;
  obj["score"] = entry.score.value();
  obj["qualified"] = entry.qualified;
  obj["iterations"] = entry.iterations_used;
  Json trace = Json::array();
  for (const auto& s : entry.score_trace) trace.push_back(s.value());
  obj["score_trace"] = std::move(trace);
  return obj.dump();
}

void write_store(const std::filesystem::path& path,
                 std::span<const ReasoningStoreEntry> entries) {
  std::set<std::pair<std::string, ReasoningType>> keys;
  for (const auto& e : entries) {
    validate_entry(e);
    if (!keys.emplace(e.news_id, e.kind).second) {
      throw InvalidArgument("duplicate store entry (" + e.news_id + ", " +
                            std::string(to_string(e.kind)) + ")");
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open store for writing: " + path.string());
  for (const auto& e : entries) out << store_line(e) << '\n';
  if (!out) throw IoError("failed writing store: " + path.string());
}

std::vector<ReasoningStoreEntry> read_store(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open store: " + path.string());
  std::vector<ReasoningStoreEntry> entries;
  std::set<std::pair<std::string, ReasoningType>> keys;
  std::string raw_line;
  std::size_t line_no = 0;
  while (std::getline(in, raw_line)) {
    ++line_no;
    const std::string_view line = strip_cr(raw_line);
    if (is_blank(line)) continue;
    try {
      const Json obj = Json::parse(line);
      ReasoningStoreEntry e;
      e.news_id = obj.at("news_id").get<std::string>();
      e.kind = parse_reasoning_type(obj.at("kind").get<std::string>());
      e.reasoning_text = obj.at("reasoning").get<std::string>();
      e.score = CredibilityScore(obj.at("score").get<int>());
      e.qualified = obj.at("qualified").get<bool>();
      e.iterations_used = obj.at("iterations").get<int>();
      for (const auto& s : obj.at("score_trace")) e.score_trace.emplace_back(s.get<int>());
      validate_entry(e);
      if (!keys.emplace(e.news_id, e.kind).second) {
        throw InvalidArgument("duplicate (news_id, kind)");
      }
      entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("invalid store record: ") + e.what(), line_no);
    } catch (const InvalidArgument& e) {
      throw FormatError(e.what(), line_no);
    }
  }
  return entries;
}

StoreAppender::StoreAppender(std::filesystem::path path) : path_(std::move(path)) {
  if (std::filesystem::exists(path_)) {
    for (const auto& e : read_store(path_)) keys_.emplace(e.news_id, e.kind);
  }
  out_.open(path_, std::ios::binary | std::ios::app);
  if (!out_) throw IoError("cannot open store for appending: " + path_.string());
}

bool StoreAppender::contains(const std::string& news_id, ReasoningType kind) const {
  std::lock_guard lock(mutex_);
  return keys_.count({news_id, kind}) != 0;
}

void StoreAppender::append(const ReasoningStoreEntry& entry) {
  validate_entry(entry);
  std::lock_guard lock(mutex_);
  if (!keys_.emplace(entry.news_id, entry.kind).second) {
    throw InvalidArgument("duplicate store entry (" + entry.news_id + ", " +
                          std::string(to_string(entry.kind)) + ")");
  }
  out_ << store_line(entry) << '\n';
  out_.flush();
  if (!out_) throw IoError("failed appending to store: " + path_.string());
}

std::size_t StoreAppender::size() const {
  std::lock_guard lock(mutex_);
  return keys_.size();
}

}  // namespace nrfe
