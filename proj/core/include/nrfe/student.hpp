// SPDX-License-Identifier: Apache-2.0
//
// News-only student distilled from the teacher's fused representation.
#pragma once

#include "nrfe/teacher.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nrfe {

/// KL(q || p) with q = softmax(q_vec / tau), p = softmax(p_vec / tau).
/// Inputs are 1 x k rows, k >= 2. Throws InvalidArgument on non-finite input
/// or tau <= 0.
double reverse_kl(const ad::Matrix& q_vec, const ad::Matrix& p_vec, double temperature);
ad::Tensor reverse_kl(const ad::Tensor& q_vec, const ad::Tensor& p_vec, double temperature);

struct StudentOutputs {
  ad::Tensor f_prime_x;      // 1 x d
  ad::Tensor f_prime_final;  // 1 x 4d
  ad::Tensor logits;         // 1 x 2
};

class Student {
 public:
  /// Copies the teacher's news encoder and f_x pooling; the projection MLP and
  /// classifier are freshly initialised from `seed`.
  static Student from_teacher(const Teacher& teacher, std::uint64_t seed);

  StudentOutputs forward(const std::string& text, std::mt19937_64* dropout_rng = nullptr) const;
  BinaryLabel predict(const std::string& text) const;

  void collect(nn::ParameterList& out) const;
  /// Encoder + pooling copied from the teacher.
  nn::ParameterList inherited_parameters() const;
  /// Projection + classifier.
  nn::ParameterList fresh_parameters() const;

  const Vocabulary& vocab() const noexcept { return vocab_; }
  const EncoderSpec& encoder_spec() const noexcept { return encoder_.spec(); }
  ad::Index width() const { return encoder_.spec().width; }
  std::uint64_t seed() const noexcept { return seed_; }
  int classifier_hidden() const noexcept { return classifier_hidden_; }
  double dropout() const noexcept { return dropout_; }

 private:
  friend Student load_student(const std::filesystem::path& path);
  Student(EncoderSpec spec, Vocabulary vocab, int classifier_hidden, double dropout,
          std::uint64_t seed);
  Student(EncoderSpec spec, Vocabulary vocab, int classifier_hidden, double dropout,
          std::uint64_t seed, std::mt19937_64&& rng);

  EncoderSpec spec_;
  Vocabulary vocab_;
  int classifier_hidden_;
  double dropout_;
  std::uint64_t seed_;
  TextEncoder encoder_;
  AttentionPool pool_;
  nn::Linear project_in_;
  nn::Linear project_out_;
  Classifier classifier_;
};

void save_student(const std::filesystem::path& path, const Student& student);
Student load_student(const std::filesystem::path& path);

/// Teacher m_final per training item, computed once with the frozen teacher.
struct DistillTargets {
  double temperature = 1.0;
  std::map<std::string, ad::Matrix> by_id;
  /// Items skipped for lack of a qualified positive reasoning.
  std::vector<std::string> missing;
};

/// `positive_by_id` maps news id -> positive reasoning text.
DistillTargets compute_targets(const Teacher& teacher, std::span<const NewsItem> items,
                               const std::map<std::string, std::string>& positive_by_id,
                               double temperature);

void save_targets(const std::filesystem::path& path, const DistillTargets& targets,
                  const std::string& key);
/// Returns nullopt when the file is absent or was written under another key.
std::optional<DistillTargets> load_targets(const std::filesystem::path& path,
                                           const std::string& key);
/// Cache key from the teacher checkpoint and corpus file contents.
std::string target_cache_key(const std::filesystem::path& teacher_ckpt,
                             const std::filesystem::path& corpus, double temperature);

struct DistillWeights {
  double dis = 1.0;
  double cls = 1.0;
};

struct DistillLosses {
  ad::Tensor l_dis;
  ad::Tensor l_cls;
  ad::Tensor l_d;
};

/// l_dis averages reverse_kl over items that have a target; l_cls averages
/// cross-entropy over all items; l_d = w_dis * l_dis + w_cls * l_cls.
/// With batch_averaged_target each q_i is compared against the batch-mean
/// target instead of its own. Throws InvalidArgument for an id that has no
/// target and is not listed in targets.missing.
DistillLosses distill_losses(std::span<const StudentOutputs> outputs,
                             std::span<const std::string> ids,
                             std::span<const BinaryLabel> labels, const DistillTargets& targets,
                             const DistillWeights& weights = {},
                             bool batch_averaged_target = false);

struct StudentTrainConfig {
  int epochs = 30;
  int batch_size = 8;
  nn::AdamOptions adam;
  std::uint64_t seed = 0;
  DistillWeights weights;
  bool batch_averaged_target = false;
  bool freeze_inherited = false;
};

struct StudentCurveRow {
  int epoch = 0;
  double dis = 0;
  double cls = 0;
  double total = 0;
};

/// Row 0 holds the losses of the untrained student.
std::vector<StudentCurveRow> train_student(Student& student, std::span<const NewsItem> train,
                                           const DistillTargets& targets,
                                           const StudentTrainConfig& cfg);

/// Header: epoch,dis,cls,total
void write_student_curve_csv(const std::filesystem::path& path,
                             std::span<const StudentCurveRow> rows);

}  // namespace nrfe
