// SPDX-License-Identifier: Apache-2.0
#include "nrfe/harness.hpp"

#include "nrfe/checkpoint.hpp"
#include "nrfe/error.hpp"
#include "nrfe/synthetic.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <map>
#include <set>

namespace nrfe {

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::Split: return "split";
    case Phase::TeacherTraining: return "teacher_training";
    case Phase::TeacherReport: return "teacher_report";
    case Phase::DistillTargets: return "distill_targets";
    case Phase::StudentTraining: return "student_training";
    case Phase::Evaluation: return "evaluation";
  }
  return "unknown";
}

std::string_view to_string(FeatureSource source) {
  return source == FeatureSource::TeacherLastHidden ? "teacher_last_hidden"
                                                    : "student_f_prime_final";
}

FeatureSource parse_feature_source(std::string_view text) {
  if (text == "teacher_last_hidden") return FeatureSource::TeacherLastHidden;
  if (text == "student_f_prime_final") return FeatureSource::StudentFPrimeFinal;
  throw InvalidArgument("unknown feature source '" + std::string(text) + "'");
}

SplitPart parse_split_part(std::string_view text) {
  if (text == "train") return SplitPart::Train;
  if (text == "test") return SplitPart::Test;
  if (text == "all") return SplitPart::All;
  throw InvalidArgument("unknown split '" + std::string(text) + "'");
}

std::vector<NewsItem> select_split(std::span<const NewsItem> items, const RunConfig& cfg,
                                   SplitPart part) {
  if (part == SplitPart::All) return {items.begin(), items.end()};
  CorpusSplit split = split_corpus(items, cfg.train_fraction, cfg.split_seed);
  return part == SplitPart::Train ? std::move(split.train) : std::move(split.test);
}

RunInputs resolve_inputs(const RunConfig& cfg) {
  RunInputs in;
  if (cfg.synthetic) {
    SyntheticData data = make_synthetic_corpus(cfg.synthetic_n, cfg.synthetic_seed);
    in.corpus = std::move(data.items);
    in.reasoning = std::make_shared<InMemoryProvider>(std::move(data.store));
    in.corpus_hash = "synthetic-n" + std::to_string(cfg.synthetic_n) + "-seed" +
                     std::to_string(cfg.synthetic_seed);
    in.store_hash = in.corpus_hash;
    return in;
  }
  if (cfg.corpus.empty()) throw InvalidArgument("no corpus configured (set corpus or synthetic)");
  if (cfg.store.empty()) throw InvalidArgument("no reasoning store configured");
  in.corpus = load_corpus(cfg.corpus, cfg.dataset, cfg.label_scheme);
  in.reasoning = std::make_shared<StoreFileProvider>(cfg.store);
  in.corpus_hash = hex64(file_hash(cfg.corpus));
  in.store_hash = hex64(file_hash(cfg.store));
  return in;
}

MetricsReport evaluate_student(const Student& student, std::span<const NewsItem> items) {
  std::vector<BinaryLabel> preds;
  std::vector<BinaryLabel> truths;
  for (const auto& item : items) {
    preds.push_back(student.predict(item.text));
    truths.push_back(item.label);
  }
  return compute_metrics(preds, truths);
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

BinaryLabel argmax(const ad::Matrix& logits) {
  return logits(0, 1) > logits(0, 0) ? BinaryLabel::Fake : BinaryLabel::Real;
}

}  // namespace

std::map<std::string, std::string> positive_reasoning(std::span<const ReasoningStoreEntry> store) {
  std::map<std::string, std::string> out;
  for (const auto& e : store) {
    if (e.qualified && e.kind == ReasoningType::Positive) out[e.news_id] = e.reasoning_text;
  }
  return out;
}

Teacher fit_teacher(const RunConfig& cfg, std::span<const NewsItem> train,
                    std::span<const ReasoningStoreEntry> store) {
  const std::vector<TeacherExample> examples = make_teacher_examples(train, store);
  std::vector<std::string> news_texts;
  std::vector<std::string> reasoning_texts;
  for (const auto& ex : examples) {
    news_texts.push_back(ex.item.text);
    reasoning_texts.push_back(ex.positive);
    if (ex.negative) reasoning_texts.push_back(*ex.negative);
  }
  Teacher teacher(teacher_config(cfg), Vocabulary::build(news_texts, cfg.min_count),
                  Vocabulary::build(reasoning_texts, cfg.min_count), cfg.seed);
  train_teacher(teacher, examples, teacher_train_config(cfg));
  return teacher;
}

Student fit_student(const RunConfig& cfg, const Teacher& teacher, std::span<const NewsItem> train,
                    const DistillTargets& targets, std::vector<StudentCurveRow>* curve) {
  Student student = Student::from_teacher(teacher, cfg.seed + 2);
  auto rows = train_student(student, train, targets, student_train_config(cfg));
  if (curve) *curve = std::move(rows);
  return student;
}

RunSummary run_training(const RunConfig& cfg, const RunInputs& inputs,
                        const std::filesystem::path& out_dir, const RunHooks& hooks) {
  auto phase = [&](Phase p) {
    if (hooks.on_phase) hooks.on_phase(p);
  };
  if (!inputs.reasoning) throw InvalidArgument("run_training: no reasoning provider");
  std::filesystem::create_directories(out_dir);
  write_manifest(out_dir / "manifest.cfg", cfg, {inputs.corpus_hash, inputs.store_hash});

  phase(Phase::Split);
  const CorpusSplit split = split_corpus(inputs.corpus, cfg.train_fraction, cfg.split_seed);
  const std::vector<ReasoningStoreEntry> store = inputs.reasoning->load();
  {
    nlohmann::ordered_json j;
    j["train"] = nlohmann::json::array();
    j["test"] = nlohmann::json::array();
    for (const auto& it : split.train) j["train"].push_back(it.id);
    for (const auto& it : split.test) j["test"].push_back(it.id);
    write_text(out_dir / "split.json", j.dump(2) + "\n");
  }

  // Held-out positive reasoning is needed only for the teacher report.
  const std::map<std::string, std::string> positive_by_id = positive_reasoning(store);

  phase(Phase::TeacherTraining);
  const Teacher teacher = fit_teacher(cfg, split.train, store);
  save_teacher(out_dir / "teacher.ckpt", teacher);
  write_curve_csv(out_dir / "teacher_stage1.csv", teacher.curves().stage1);
  write_curve_csv(out_dir / "teacher_stage2.csv", teacher.curves().stage2);

  RunSummary summary;
  summary.train_size = split.train.size();
  summary.test_size = split.test.size();

  phase(Phase::TeacherReport);
  {
    ad::NoGradGuard no_grad;
    std::vector<BinaryLabel> preds;
    std::vector<BinaryLabel> truths;
    for (const auto& item : split.test) {
      auto it = positive_by_id.find(item.id);
      if (it == positive_by_id.end()) continue;
      preds.push_back(argmax(teacher.classify(teacher.m_final(item.text, it->second)).value()));
      truths.push_back(item.label);
    }
    if (!truths.empty()) {
      summary.teacher = compute_metrics(preds, truths);
      summary.teacher_positive_acc = summary.teacher.acc;
      write_metrics(out_dir / "teacher_metrics.json", summary.teacher);
    }
  }

  phase(Phase::DistillTargets);
  const DistillTargets targets =
      compute_targets(teacher, split.train, positive_by_id, cfg.temperature);
  summary.missing_targets = targets.missing.size();

  phase(Phase::StudentTraining);
  std::vector<StudentCurveRow> curve;
  const Student student = fit_student(cfg, teacher, split.train, targets, &curve);
  save_student(out_dir / "student.ckpt", student);
  write_student_curve_csv(out_dir / "student.csv", curve);

  phase(Phase::Evaluation);
  summary.student = evaluate_student(student, split.test);
  write_metrics(out_dir / "metrics.json", summary.student);

  nlohmann::ordered_json s;
  s["ablation"] = std::string(to_string(cfg.ablation));
  s["train_size"] = summary.train_size;
  s["test_size"] = summary.test_size;
  s["missing_targets"] = summary.missing_targets;
  s["missing_target_ids"] = targets.missing;
  s["teacher_positive_acc"] = summary.teacher_positive_acc;
  s["student_acc"] = summary.student.acc;
  s["student_mac_f1"] = summary.student.mac_f1;
  write_text(out_dir / "summary.json", s.dump(2) + "\n");
  return summary;
}

std::vector<AblationRow> run_ablation_suite(const RunConfig& cfg, const RunInputs& inputs,
                                            std::span<const Ablation> variants,
                                            const std::filesystem::path& out_dir) {
  if (variants.empty()) throw InvalidArgument("ablation suite needs at least one variant");
  std::filesystem::create_directories(out_dir);
  std::vector<AblationRow> rows;
  for (Ablation variant : variants) {
    RunConfig run_cfg = cfg;
    run_cfg.ablation = variant;
    const RunSummary s =
        run_training(run_cfg, inputs, out_dir / std::string(to_string(variant)));
    rows.push_back(AblationRow{variant, s.student.acc, s.student.mac_f1});
  }
  std::string csv = "variant,acc,mac_f1\n";
  for (const auto& r : rows) {
    csv += std::string(to_string(r.variant)) + "," + fmt(r.acc) + "," + fmt(r.mac_f1) + "\n";
  }
  write_text(out_dir / "ablation.csv", csv);
  return rows;
}

void export_features(const std::filesystem::path& checkpoint, std::span<const NewsItem> items,
                     std::span<const ReasoningStoreEntry> reasoning, FeatureSource which,
                     const std::filesystem::path& out) {
  const std::string kind = read_checkpoint(checkpoint).kind;
  const std::string expected =
      which == FeatureSource::TeacherLastHidden ? "teacher" : "student";
  if (kind != expected) {
    throw InvalidArgument("export_features: " + std::string(to_string(which)) + " needs a " +
                          expected + " checkpoint, got '" + kind + "'");
  }

  ad::NoGradGuard no_grad;
  std::vector<std::pair<ad::Matrix, BinaryLabel>> rows;  // features, prediction
  if (which == FeatureSource::TeacherLastHidden) {
    const Teacher teacher = load_teacher(checkpoint);
    const auto positive = positive_reasoning(reasoning);
    for (const auto& item : items) {
      auto it = positive.find(item.id);
      if (it == positive.end()) {
        throw InvalidArgument("teacher export: no qualified positive reasoning for " + item.id);
      }
      const ad::Tensor m = teacher.m_final(item.text, it->second);
      rows.emplace_back(m.value(), argmax(teacher.classify(m).value()));
    }
  } else {
    const Student student = load_student(checkpoint);
    for (const auto& item : items) {
      const StudentOutputs o = student.forward(item.text);
      rows.emplace_back(o.f_prime_final.value(), argmax(o.logits.value()));
    }
  }

  std::string csv = "id,label,pred";
  const ad::Index width = rows.empty() ? 0 : rows.front().first.cols();
  for (ad::Index k = 0; k < width; ++k) csv += ",f" + std::to_string(k);
  csv += '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    csv += items[i].id;
    csv += ',';
    csv += to_string(items[i].label);
    csv += ',';
    csv += to_string(rows[i].second);
    for (ad::Index k = 0; k < width; ++k) {
      csv += ',';
      csv += fmt(rows[i].first(0, k));
    }
    csv += '\n';
  }
  write_text(out, csv);
}

}  // namespace nrfe
