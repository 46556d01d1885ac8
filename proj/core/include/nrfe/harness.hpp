// SPDX-License-Identifier: Apache-2.0
//
// End-to-end orchestration: split, teacher stages, distillation, student
// evaluation, ablation suites and feature export.
#pragma once

#include "nrfe/metrics.hpp"
#include "nrfe/run_config.hpp"
#include "nrfe/student.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace nrfe {

enum class Phase { Split, TeacherTraining, TeacherReport, DistillTargets, StudentTraining, Evaluation };
std::string_view to_string(Phase phase);

/// Source of generated reasoning. The pipeline reads it once, before teacher
/// training; student evaluation has no access to it.
class ReasoningProvider {
 public:
  virtual ~ReasoningProvider() = default;
  virtual std::vector<ReasoningStoreEntry> load() = 0;
};

class StoreFileProvider : public ReasoningProvider {
 public:
  explicit StoreFileProvider(std::filesystem::path path) : path_(std::move(path)) {}
  std::vector<ReasoningStoreEntry> load() override { return read_store(path_); }

 private:
  std::filesystem::path path_;
};

class InMemoryProvider : public ReasoningProvider {
 public:
  explicit InMemoryProvider(std::vector<ReasoningStoreEntry> entries)
      : entries_(std::move(entries)) {}
  std::vector<ReasoningStoreEntry> load() override { return entries_; }

 private:
  std::vector<ReasoningStoreEntry> entries_;
};

struct RunInputs {
  std::vector<NewsItem> corpus;
  std::shared_ptr<ReasoningProvider> reasoning;
  std::string corpus_hash;
  std::string store_hash;
};

/// Synthetic data when cfg.synthetic, otherwise cfg.corpus + cfg.store.
RunInputs resolve_inputs(const RunConfig& cfg);

struct RunHooks {
  std::function<void(Phase)> on_phase;
};

struct RunSummary {
  MetricsReport student;
  MetricsReport teacher;
  /// Teacher accuracy on held-out positive pairs.
  double teacher_positive_acc = 0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::size_t missing_targets = 0;
};

/// news id -> text of its qualified positive reasoning.
std::map<std::string, std::string> positive_reasoning(std::span<const ReasoningStoreEntry> store);

/// Builds vocabularies from the training texts, then runs both teacher stages.
Teacher fit_teacher(const RunConfig& cfg, std::span<const NewsItem> train,
                    std::span<const ReasoningStoreEntry> store);

/// Initialises a student from `teacher` and distils it on `train`.
Student fit_student(const RunConfig& cfg, const Teacher& teacher, std::span<const NewsItem> train,
                    const DistillTargets& targets, std::vector<StudentCurveRow>* curve = nullptr);

/// Writes into out_dir: manifest.cfg, split.json, teacher.ckpt,
/// teacher_stage1.csv, teacher_stage2.csv, student.ckpt, student.csv,
/// teacher_metrics.json, metrics.json (student, test split) and summary.json.
RunSummary run_training(const RunConfig& cfg, const RunInputs& inputs,
                        const std::filesystem::path& out_dir, const RunHooks& hooks = {});

/// Student-only evaluation: no reasoning is involved.
MetricsReport evaluate_student(const Student& student, std::span<const NewsItem> items);

struct AblationRow {
  Ablation variant = Ablation::Full;
  double acc = 0;
  double mac_f1 = 0;
};

/// One run per variant under out_dir/<variant>/ with a shared split and seed;
/// writes out_dir/ablation.csv (variant,acc,mac_f1).
std::vector<AblationRow> run_ablation_suite(const RunConfig& cfg, const RunInputs& inputs,
                                            std::span<const Ablation> variants,
                                            const std::filesystem::path& out_dir);

enum class FeatureSource { TeacherLastHidden, StudentFPrimeFinal };
std::string_view to_string(FeatureSource source);
FeatureSource parse_feature_source(std::string_view text);

/// CSV rows: id,label,pred,f0..f{4d-1}. The teacher export needs a qualified
/// positive reasoning per item (InvalidArgument otherwise); `reasoning` may be
/// empty for the student export. Throws InvalidArgument when the checkpoint
/// kind does not match `which`.
void export_features(const std::filesystem::path& checkpoint, std::span<const NewsItem> items,
                     std::span<const ReasoningStoreEntry> reasoning, FeatureSource which,
                     const std::filesystem::path& out);

enum class SplitPart { Train, Test, All };
SplitPart parse_split_part(std::string_view text);
std::vector<NewsItem> select_split(std::span<const NewsItem> items, const RunConfig& cfg,
                                   SplitPart part);

}  // namespace nrfe
