// SPDX-License-Identifier: Apache-2.0
//
// Reasoning-aware teacher: news/reasoning encoders, cross-attention, three
// consistency heads (RC, RXC, XRC), fusion and the classifier.
#pragma once

#include "nrfe/dataio.hpp"
#include "nrfe/encoder.hpp"
#include "nrfe/nn.hpp"

#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace nrfe {

enum class Ablation { Full, WoRc, WoRxc, WoXrc, OnlyRc };
std::string_view to_string(Ablation ablation);
Ablation parse_ablation(std::string_view text);

/// Which consistency terms contribute to L_c.
struct HeadMask {
  bool rc = true;
  bool rxc = true;
  bool xrc = true;

  static HeadMask from(Ablation ablation);
  bool operator==(const HeadMask&) const = default;
};

/// One direction of cross-attention: queries from one sequence, keys and
/// values from the other. No output projection.
class CrossAttention {
 public:
  CrossAttention() = default;
  CrossAttention(int width, int heads, std::mt19937_64& rng);
  CrossAttention(ad::Matrix w_query, ad::Matrix w_key, ad::Matrix w_value, int heads = 1);

  /// Output has the query sequence's length and mask. Per-head attention
  /// weights are appended to `weights_out` when non-null.
  SeqRep operator()(const SeqRep& queries, const SeqRep& keys_values,
                    std::vector<ad::Matrix>* weights_out = nullptr) const;
  void collect(nn::ParameterList& out, const std::string& prefix) const;
  ad::Index width() const { return w_query_.rows(); }

 private:
  ad::Tensor w_query_, w_key_, w_value_;
  int heads_ = 1;
};

struct CrossAttended {
  SeqRep b_to_a;  // a's length; queries from a
  SeqRep a_to_b;  // b's length; queries from b
};

/// Throws InvalidArgument on a width mismatch.
CrossAttended cross_attend(const SeqRep& a, const SeqRep& b, const CrossAttention& b_to_a_block,
                           const CrossAttention& a_to_b_block);

/// pair_label 1: 1 - cos(f_x, f_r); pair_label 0: max(0, cos(f_x, f_r) - margin).
/// Inputs are 1 x D rows. Throws InvalidArgument on a zero-norm input.
double consistency_loss(const ad::Matrix& f_x, const ad::Matrix& f_r, int pair_label,
                        double margin);
ad::Tensor consistency_loss(const ad::Tensor& f_x, const ad::Tensor& f_r, int pair_label,
                            double margin);

/// Concatenation m_x | m_p | m_{p->x} | m_{x->p}.
ad::Tensor fuse(const ad::Tensor& m_x, const ad::Tensor& m_p, const ad::Tensor& m_p_to_x,
                const ad::Tensor& m_x_to_p);

/// Cross-entropy of a 1 x 2 logit row against a hard label.
double cross_entropy(const ad::Matrix& logits, BinaryLabel label);
ad::Tensor cls_loss(const ad::Tensor& logits, BinaryLabel label);

/// Per-head two-tower projection (Linear + tanh on each side) feeding the
/// cosine objective. In raw-cosine mode both projections are the identity.
class ConsistencyHead {
 public:
  ConsistencyHead() = default;
  ConsistencyHead(int width, bool raw_cosine, std::mt19937_64& rng);

  ad::Tensor project_news(const ad::Tensor& f_x) const;
  ad::Tensor project_other(const ad::Tensor& f_r) const;
  ad::Tensor loss(const ad::Tensor& f_x, const ad::Tensor& f_r, int pair_label,
                  double margin) const;
  void collect(nn::ParameterList& out, const std::string& prefix) const;
  bool raw_cosine() const noexcept { return raw_cosine_; }

 private:
  bool raw_cosine_ = false;
  nn::Linear news_side_;
  nn::Linear other_side_;
};

/// Two-layer classifier: Linear -> relu -> dropout -> Linear(2).
class Classifier {
 public:
  Classifier() = default;
  Classifier(ad::Index in, int hidden, double dropout, std::mt19937_64& rng);

  /// Dropout is applied only when `dropout_rng` is non-null.
  ad::Tensor operator()(const ad::Tensor& x, std::mt19937_64* dropout_rng = nullptr) const;
  void collect(nn::ParameterList& out, const std::string& prefix) const;
  double dropout() const noexcept { return dropout_; }

 private:
  nn::Linear hidden_;
  nn::Linear output_;
  double dropout_ = 0.0;
};

struct TeacherConfig {
  EncoderSpec news_encoder;
  EncoderSpec reasoning_encoder;
  int cross_heads = 1;
  bool raw_cosine = false;
  double margin = 0.2;
  int classifier_hidden = 64;
  double dropout = 0.3;
  Ablation ablation = Ablation::Full;
};

void validate(const TeacherConfig& cfg);

/// Pooled vectors of one (news, reasoning) pair.
struct PairPooled {
  ad::Tensor f_r;       // f_p or f_n
  ad::Tensor f_r_to_x;  // f_{p->x} or f_{n->x}
  ad::Tensor f_x_to_r;  // f_{x->p} or f_{x->n}
};

struct ConsistencyTerms {
  ad::Tensor rc, rxc, xrc, c;
};

struct TeacherExample {
  NewsItem item;
  std::string positive;
  std::optional<std::string> negative;
};

/// Joins news with qualified store entries. Throws InvalidArgument when an
/// item has no qualified positive reasoning.
std::vector<TeacherExample> make_teacher_examples(std::span<const NewsItem> items,
                                                  std::span<const ReasoningStoreEntry> store);

struct LossCurveRow {
  int epoch = 0;
  double rc = 0, rxc = 0, xrc = 0, c = 0, cls = 0;
};

struct TeacherCurves {
  std::vector<LossCurveRow> stage1;
  std::vector<LossCurveRow> stage2;
};

/// Header: epoch,rc,rxc,xrc,c,cls
void write_curve_csv(const std::filesystem::path& path, std::span<const LossCurveRow> rows);

class Teacher {
 public:
  Teacher(TeacherConfig cfg, Vocabulary news_vocab, Vocabulary reasoning_vocab,
          std::uint64_t seed);

  SeqRep encode_news(const std::string& text) const;
  SeqRep encode_reasoning(const std::string& text) const;
  ad::Tensor pool_news(const SeqRep& news) const;
  /// Cross-attends the pair and pools with the kind-specific pools.
  PairPooled pool_pair(const SeqRep& news, const SeqRep& reasoning, ReasoningType kind) const;

  /// Masked terms are constant zero and carry no graph.
  ConsistencyTerms consistency(const ad::Tensor& f_x, const PairPooled& pair, int pair_label) const;
  /// m_final from a positive pair.
  ad::Tensor fuse_positive(const ad::Tensor& f_x, const PairPooled& positive) const;
  ad::Tensor classify(const ad::Tensor& m_final, std::mt19937_64* dropout_rng = nullptr) const;

  /// Convenience: m_final for (news, positive reasoning) in eval mode.
  ad::Tensor m_final(const std::string& news, const std::string& positive) const;

  void collect(nn::ParameterList& out) const;
  /// Parameters of one consistency head ("rc", "rxc" or "xrc").
  nn::ParameterList head_parameters(const std::string& head) const;
  /// Everything except the consistency heads and the classifier.
  nn::ParameterList backbone_parameters() const;
  nn::ParameterList classifier_parameters() const;
  /// Parameters trained in stage 1 under the ablation mask.
  nn::ParameterList stage1_parameters() const;

  const TeacherConfig& config() const noexcept { return cfg_; }
  const Vocabulary& news_vocab() const noexcept { return news_vocab_; }
  const Vocabulary& reasoning_vocab() const noexcept { return reasoning_vocab_; }
  const TextEncoder& news_encoder() const noexcept { return news_encoder_; }
  const AttentionPool& news_pool() const noexcept { return pool_x_; }
  HeadMask mask() const { return HeadMask::from(cfg_.ablation); }
  ad::Index width() const { return cfg_.news_encoder.width; }
  std::uint64_t seed() const noexcept { return seed_; }

  TeacherCurves& curves() noexcept { return curves_; }
  const TeacherCurves& curves() const noexcept { return curves_; }

 private:
  Teacher(TeacherConfig cfg, Vocabulary news_vocab, Vocabulary reasoning_vocab,
          std::uint64_t seed, std::mt19937_64&& rng);

  TeacherConfig cfg_;
  Vocabulary news_vocab_;
  Vocabulary reasoning_vocab_;
  std::uint64_t seed_;
  TextEncoder news_encoder_;
  TextEncoder reasoning_encoder_;
  AttentionPool pool_x_;
  AttentionPool pool_p_, pool_n_;
  AttentionPool pool_p_to_x_, pool_n_to_x_;
  AttentionPool pool_x_to_p_, pool_x_to_n_;
  CrossAttention r_to_x_;
  CrossAttention x_to_r_;
  ConsistencyHead rc_, rxc_, xrc_;
  Classifier classifier_;
  TeacherCurves curves_;
};

struct TeacherTrainConfig {
  int stage1_epochs = 30;
  int stage2_epochs = 30;
  int batch_size = 8;
  nn::AdamOptions adam;
  std::uint64_t seed = 0;
  bool joint_stage2 = false;
  double joint_lambda = 1.0;
};

/// Stage 1: L_c over positive and negative pairs. Stage 2: L_cls over
/// positive pairs with heads frozen (plus lambda * L_c when joint_stage2).
/// Appends per-epoch means to teacher.curves(). Throws InvalidArgument on an
/// empty training set.
void train_teacher(Teacher& teacher, std::span<const TeacherExample> examples,
                   const TeacherTrainConfig& cfg);

/// Fraction of examples whose positive-pair prediction equals the label.
double teacher_accuracy(const Teacher& teacher, std::span<const TeacherExample> examples);

void save_teacher(const std::filesystem::path& path, const Teacher& teacher);
Teacher load_teacher(const std::filesystem::path& path);

}  // namespace nrfe
