// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"
#include "support/test_support.hpp"

#include "nrfe/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

using namespace nrfe;
using nrfe::testing::TempDir;
using nrfe::testing::write_file;

namespace {

ReasoningStoreEntry entry(std::string id, ReasoningType kind, std::vector<int> trace) {
  ReasoningStoreEntry e;
  e.news_id = std::move(id);
  e.kind = kind;
  e.reasoning_text = "because";
  for (int s : trace) e.score_trace.emplace_back(s);
  e.score = e.score_trace.back();
  e.iterations_used = static_cast<int>(trace.size()) - 1;
  e.qualified = true;
  return e;
}

std::vector<NewsItem> labelled(int real, int fake) {
  std::vector<NewsItem> items;
  for (int i = 0; i < real + fake; ++i) {
    items.push_back(NewsItem{"n" + std::to_string(i), "text " + std::to_string(i),
                             i < real ? "real" : "fake",
                             i < real ? BinaryLabel::Real : BinaryLabel::Fake,
                             Dataset::Politifact});
  }
  return items;
}

}  // namespace

TEST_CASE("credibility score bounds") {
  CHECK(CredibilityScore(0).value() == 0);
  CHECK(CredibilityScore(100).value() == 100);
  CHECK_THROWS_AS(CredibilityScore(101), InvalidArgument);
  CHECK_THROWS_AS(CredibilityScore(-1), InvalidArgument);
  CHECK_FALSE(CredibilityScore::checked(1000).has_value());
}

TEST_CASE("label schemes") {
  CHECK(map_label("false-rumors", LabelScheme::Verbatim) == BinaryLabel::Real);
  CHECK(map_label("true-rumors", LabelScheme::Verbatim) == BinaryLabel::Fake);
  CHECK(map_label("false-rumors", LabelScheme::Corrected) == BinaryLabel::Fake);
  CHECK(map_label("true-rumors", LabelScheme::Corrected) == BinaryLabel::Real);
  CHECK(map_label("unverified-rumors", LabelScheme::Corrected) == BinaryLabel::Fake);
  CHECK(map_label("non-rumors", LabelScheme::Corrected) == BinaryLabel::Real);
  CHECK(map_label("fake", LabelScheme::PolitifactBinary) == BinaryLabel::Fake);
  CHECK_THROWS_AS(map_label("real", LabelScheme::Verbatim), InvalidArgument);
  CHECK(default_scheme(Dataset::Twitter15) == LabelScheme::Verbatim);
  CHECK(default_scheme(Dataset::Politifact) == LabelScheme::PolitifactBinary);
  for (auto s : {LabelScheme::Verbatim, LabelScheme::Corrected, LabelScheme::PolitifactBinary}) {
    CHECK(parse_label_scheme(to_string(s)) == s);
  }
  for (auto d : {Dataset::Politifact, Dataset::Twitter15, Dataset::Twitter16, Dataset::Synthetic}) {
    CHECK(parse_dataset(to_string(d)) == d);
  }
}

TEST_CASE("corpus loading") {
  TempDir dir;
  SUBCASE("well formed, with blank lines and CRLF") {
    write_file(dir / "c.jsonl",
               "{\"id\":\"a\",\"text\":\"hello\",\"label\":\"non-rumors\"}\r\n\n"
               "{\"id\":\"b\",\"text\":\"world\",\"label\":\"true-rumors\"}\n");
    const auto items = load_corpus(dir / "c.jsonl", Dataset::Twitter16);
    REQUIRE(items.size() == 2);
    CHECK(items[0].id == "a");
    CHECK(items[1].label == BinaryLabel::Fake);
    CHECK(items[1].raw_label == "true-rumors");
    CHECK(items[1].dataset == Dataset::Twitter16);
    const auto corrected = load_corpus(dir / "c.jsonl", Dataset::Twitter16, LabelScheme::Corrected);
    CHECK(corrected[1].label == BinaryLabel::Real);
  }
  SUBCASE("the first bad record fails the whole file with its line") {
    const std::vector<std::pair<std::string, std::size_t>> bad{
        {"{\"id\":\"a\",\"text\":\"x\",\"label\":\"real\"}\nnot json\n", 2},
        {"{\"id\":\"a\",\"text\":\"x\"}\n", 1},
        {"{\"id\":\"a\",\"text\":\"   \",\"label\":\"real\"}\n", 1},
        {"{\"id\":\"\",\"text\":\"x\",\"label\":\"real\"}\n", 1},
        {"{\"id\":\"a\",\"text\":\"x\",\"label\":\"maybe\"}\n", 1},
        {"{\"id\":\"a\",\"text\":\"x\",\"label\":\"real\"}\n{\"id\":\"a\",\"text\":\"y\",\"label\":\"real\"}\n", 2},
    };
    for (const auto& [text, line] : bad) {
      write_file(dir / "bad.jsonl", text);
      try {
        load_corpus(dir / "bad.jsonl", Dataset::Politifact);
        FAIL("expected FormatError");
      } catch (const FormatError& e) {
        CHECK(e.line() == line);
      }
    }
  }
  SUBCASE("round trip") {
    const auto items = labelled(3, 2);
    write_corpus(dir / "rt.jsonl", items);
    CHECK(load_corpus(dir / "rt.jsonl", Dataset::Politifact) == items);
  }
  CHECK_THROWS_AS(load_corpus(dir / "nope.jsonl", Dataset::Politifact), IoError);
}

TEST_CASE("stratified split properties") {
  for (int real : {5, 17, 40}) {
    for (int fake : {3, 20, 41}) {
      for (double frac : {0.5, 0.8}) {
        const auto items = labelled(real, fake);
        const auto split = split_corpus(items, frac, 7);
        const double n = real + fake;
        CHECK(split.train.size() == static_cast<std::size_t>(std::llround(frac * n)));
        CHECK(split.train.size() + split.test.size() == items.size());
        const auto real_train = std::count_if(split.train.begin(), split.train.end(),
                                              [](const NewsItem& i) { return i.label == BinaryLabel::Real; });
        CHECK(std::abs(static_cast<double>(real_train) - frac * real) <= 1.0);
        std::vector<std::string> ids;
        for (const auto& i : split.train) ids.push_back(i.id);
        for (const auto& i : split.test) ids.push_back(i.id);
        std::sort(ids.begin(), ids.end());
        CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
      }
    }
  }
}

TEST_CASE("split is a pure function of the seed") {
  const auto items = labelled(30, 30);
  const auto a = split_corpus(items, 0.8, 3);
  const auto b = split_corpus(items, 0.8, 3);
  const auto c = split_corpus(items, 0.8, 4);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  CHECK_FALSE(a.train == c.train);
  CHECK_THROWS_AS(split_corpus(items, 1.0, 1), InvalidArgument);
  CHECK_THROWS_AS(split_corpus({}, 0.5, 1), InvalidArgument);
}

TEST_CASE("store entry invariants") {
  CHECK_NOTHROW(validate_entry(entry("a", ReasoningType::Positive, {70, 40})));
  auto e = entry("a", ReasoningType::Positive, {70, 40});
  e.score = CredibilityScore(70);
  CHECK_THROWS_AS(validate_entry(e), InvalidArgument);
  e = entry("a", ReasoningType::Positive, {70, 40});
  e.iterations_used = 0;
  CHECK_THROWS_AS(validate_entry(e), InvalidArgument);
  e = entry("a", ReasoningType::Positive, {70, 60, 40});
  CHECK_THROWS_AS(validate_entry(e, 1), InvalidArgument);
  e.score_trace.clear();
  CHECK_THROWS_AS(validate_entry(e), InvalidArgument);
}

TEST_CASE("store round trip and duplicate rejection") {
  TempDir dir;
  const std::vector<ReasoningStoreEntry> entries{entry("a", ReasoningType::Positive, {70, 40}),
                                                 entry("a", ReasoningType::Negative, {30}),
                                                 entry("b", ReasoningType::Positive, {90})};
  write_store(dir / "s.jsonl", entries);
  CHECK(read_store(dir / "s.jsonl") == entries);

  auto dup = entries;
  dup.push_back(entries[0]);
  CHECK_THROWS_AS(write_store(dir / "d.jsonl", dup), InvalidArgument);
  CHECK_FALSE(std::filesystem::exists(dir / "d.jsonl"));

  write_file(dir / "d2.jsonl", store_line(entries[0]) + "\n" + store_line(entries[0]) + "\n");
  try {
    read_store(dir / "d2.jsonl");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("appender resumes and serialises concurrent writers") {
  TempDir dir;
  {
    StoreAppender app(dir / "s.jsonl");
    app.append(entry("seed", ReasoningType::Positive, {50}));
  }
  StoreAppender app(dir / "s.jsonl");
  CHECK(app.contains("seed", ReasoningType::Positive));
  CHECK_FALSE(app.contains("seed", ReasoningType::Negative));
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 25; ++i) {
        app.append(entry("t" + std::to_string(t) + "-" + std::to_string(i), ReasoningType::Negative, {10, 20}));
      }
    });
  }
  for (auto& th : threads) th.join();
  CHECK(app.size() == 101);
  CHECK_THROWS_AS(app.append(entry("seed", ReasoningType::Positive, {50})), InvalidArgument);
  CHECK(read_store(dir / "s.jsonl").size() == 101);
}
