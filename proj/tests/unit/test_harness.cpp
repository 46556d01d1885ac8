// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"
#include "support/test_support.hpp"

#include "nrfe/checkpoint.hpp"
#include "nrfe/harness.hpp"

#include <algorithm>

using namespace nrfe;
using namespace nrfe::testing;

namespace {

RunConfig tiny_run() {
  RunConfig c;
  c.synthetic = true;
  c.synthetic_n = 24;
  c.encoder.depth = 1;
  c.encoder.width = 8;
  c.encoder.heads = 2;
  c.encoder.ff_width = 16;
  c.classifier_hidden = 8;
  c.stage1_epochs = 2;
  c.stage2_epochs = 2;
  c.student_epochs = 2;
  c.learning_rate = 2e-3;
  return c;
}

class CountingProvider : public ReasoningProvider {
 public:
  CountingProvider(std::vector<ReasoningStoreEntry> entries, std::vector<Phase>& log)
      : entries_(std::move(entries)), log_(log) {}
  std::vector<ReasoningStoreEntry> load() override {
    ++loads;
    log_.push_back(static_cast<Phase>(-1));
    return entries_;
  }
  int loads = 0;

 private:
  std::vector<ReasoningStoreEntry> entries_;
  std::vector<Phase>& log_;
};

}  // namespace

TEST_CASE("phase names and parsers") {
  CHECK(to_string(Phase::StudentTraining) == "student_training");
  CHECK(parse_feature_source(to_string(FeatureSource::TeacherLastHidden)) ==
        FeatureSource::TeacherLastHidden);
  CHECK(parse_split_part("test") == SplitPart::Test);
  CHECK_THROWS_AS(parse_split_part("dev"), InvalidArgument);
}

TEST_CASE("inputs resolve from synthetic settings or files") {
  RunConfig c = tiny_run();
  const auto in = resolve_inputs(c);
  CHECK(in.corpus.size() == 24);
  CHECK(in.corpus_hash == "synthetic-n24-seed1");
  CHECK(in.reasoning->load().size() == 48);

  TempDir dir;
  write_corpus(dir / "c.jsonl", in.corpus);
  write_store(dir / "s.jsonl", in.reasoning->load());
  c.synthetic = false;
  c.corpus = (dir / "c.jsonl").string();
  c.store = (dir / "s.jsonl").string();
  const auto files = resolve_inputs(c);
  CHECK(files.corpus == in.corpus);
  CHECK(files.corpus_hash == hex64(file_hash(dir / "c.jsonl")));
  c.corpus.clear();
  CHECK_THROWS_AS(resolve_inputs(c), InvalidArgument);
}

TEST_CASE("end-to-end run writes every artefact and reads reasoning once") {
  TempDir dir;
  const RunConfig c = tiny_run();
  auto base = resolve_inputs(c);
  std::vector<Phase> log;
  auto provider = std::make_shared<CountingProvider>(base.reasoning->load(), log);
  RunInputs in{base.corpus, provider, base.corpus_hash, base.store_hash};
  RunHooks hooks{[&](Phase p) { log.push_back(p); }};
  const auto summary = run_training(c, in, dir.path(), hooks);

  CHECK(provider->loads == 1);
  const std::vector<Phase> expected{Phase::Split,          static_cast<Phase>(-1),
                                    Phase::TeacherTraining, Phase::TeacherReport,
                                    Phase::DistillTargets,  Phase::StudentTraining,
                                    Phase::Evaluation};
  CHECK(log == expected);
  for (const char* f : {"manifest.cfg", "split.json", "teacher.ckpt", "teacher_stage1.csv",
                        "teacher_stage2.csv", "teacher_metrics.json", "student.ckpt",
                        "student.csv", "metrics.json", "summary.json"}) {
    CAPTURE(f);
    CHECK(std::filesystem::exists(dir / f));
  }
  CHECK(summary.train_size + summary.test_size == 24);
  CHECK(summary.missing_targets == 0);
  CHECK(parse_metrics_json(read_file(dir / "metrics.json")) == summary.student);
  CHECK(load_config(dir / "manifest.cfg") == c);

  // Student evaluation needs nothing beyond the checkpoint and news text.
  const Student s = load_student(dir / "student.ckpt");
  const auto test = select_split(base.corpus, c, SplitPart::Test);
  CHECK(evaluate_student(s, test) == summary.student);
}

TEST_CASE("missing positive reasoning skips the distillation term only") {
  TempDir dir;
  RunConfig c = tiny_run();
  auto base = resolve_inputs(c);
  auto store = base.reasoning->load();
  const auto train = select_split(base.corpus, c, SplitPart::Train);
  // Drop the negative of one training item (teacher still trains) and
  // unqualify nothing else.
  store.erase(std::remove_if(store.begin(), store.end(),
                             [&](const ReasoningStoreEntry& e) {
                               return e.news_id == train[0].id && e.kind == ReasoningType::Negative;
                             }),
              store.end());
  RunInputs in{base.corpus, std::make_shared<InMemoryProvider>(store), "x", "y"};
  CHECK_NOTHROW(run_training(c, in, dir.path()));
}

TEST_CASE("reruns are bitwise identical") {
  TempDir a, b;
  const RunConfig c = tiny_run();
  const auto in = resolve_inputs(c);
  run_training(c, in, a.path());
  run_training(c, in, b.path());
  for (const char* f : {"metrics.json", "teacher_metrics.json", "teacher.ckpt", "student.ckpt",
                        "student.csv", "teacher_stage1.csv", "summary.json", "split.json"}) {
    CAPTURE(f);
    CHECK(read_file(a / f) == read_file(b / f));
  }
  const auto store = in.reasoning->load();
  export_features(a / "student.ckpt", in.corpus, {}, FeatureSource::StudentFPrimeFinal, a / "fs.csv");
  export_features(b / "student.ckpt", in.corpus, {}, FeatureSource::StudentFPrimeFinal, b / "fs.csv");
  CHECK(read_file(a / "fs.csv") == read_file(b / "fs.csv"));
  export_features(a / "teacher.ckpt", in.corpus, store, FeatureSource::TeacherLastHidden, a / "ft.csv");
  export_features(b / "teacher.ckpt", in.corpus, store, FeatureSource::TeacherLastHidden, b / "ft.csv");
  CHECK(read_file(a / "ft.csv") == read_file(b / "ft.csv"));

  const auto csv = read_file(a / "fs.csv");
  CHECK(csv.rfind("id,label,pred,f0,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 25);
  CHECK(csv.find(",f31\n") != std::string::npos);

  CHECK_THROWS_AS(export_features(a / "student.ckpt", in.corpus, store,
                                  FeatureSource::TeacherLastHidden, a / "x.csv"),
                  InvalidArgument);
  CHECK_THROWS_AS(export_features(a / "teacher.ckpt", in.corpus, {},
                                  FeatureSource::TeacherLastHidden, a / "x.csv"),
                  InvalidArgument);
}

TEST_CASE("different seeds give different runs") {
  TempDir a, b;
  RunConfig c = tiny_run();
  const auto in = resolve_inputs(c);
  run_training(c, in, a.path());
  c.seed = 2;
  run_training(c, in, b.path());
  CHECK(read_file(a / "student.ckpt") != read_file(b / "student.ckpt"));
}

TEST_CASE("ablation suite layout") {
  TempDir dir;
  RunConfig c = tiny_run();
  c.stage2_epochs = 1;
  c.student_epochs = 1;
  const auto in = resolve_inputs(c);
  const std::vector<Ablation> variants{Ablation::Full, Ablation::OnlyRc};
  const auto rows = run_ablation_suite(c, in, variants, dir.path());
  CHECK(rows.size() == 2);
  CHECK(std::filesystem::exists(dir / "full" / "metrics.json"));
  CHECK(std::filesystem::exists(dir / "only_rc" / "teacher_stage1.csv"));
  const auto csv = read_file(dir / "ablation.csv");
  CHECK(csv.rfind("variant,acc,mac_f1\nfull,", 0) == 0);
  CHECK(csv.find("\nonly_rc,") != std::string::npos);
  CHECK_THROWS_AS(run_ablation_suite(c, in, {}, dir.path()), InvalidArgument);
}

TEST_CASE("split selection") {
  const RunConfig c = tiny_run();
  const auto in = resolve_inputs(c);
  const auto train = select_split(in.corpus, c, SplitPart::Train);
  const auto test = select_split(in.corpus, c, SplitPart::Test);
  CHECK(train.size() + test.size() == in.corpus.size());
  CHECK(select_split(in.corpus, c, SplitPart::All) == in.corpus);
}
