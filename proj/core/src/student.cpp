// SPDX-License-Identifier: Apache-2.0
#include "nrfe/student.hpp"

#include "json_util.hpp"
#include "nrfe/checkpoint.hpp"
#include "nrfe/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

namespace nrfe {

namespace {

void check_kl_inputs(const ad::Matrix& q, const ad::Matrix& p, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw InvalidArgument("reverse_kl: temperature must be positive");
  }
  if (q.rows() != 1 || p.rows() != 1 || q.cols() != p.cols() || q.cols() < 2) {
    throw InvalidArgument("reverse_kl: expects two 1 x k rows with k >= 2");
  }
  if (!q.allFinite() || !p.allFinite()) throw InvalidArgument("reverse_kl: non-finite input");
}

Eigen::RowVectorXd log_softmax(const ad::Matrix& row, double temperature) {
  Eigen::RowVectorXd z = row.row(0) / temperature;
  const double hi = z.maxCoeff();
  const double lse = hi + std::log((z.array() - hi).exp().sum());
  return z.array() - lse;
}

}  // namespace

double reverse_kl(const ad::Matrix& q_vec, const ad::Matrix& p_vec, double temperature) {
  check_kl_inputs(q_vec, p_vec, temperature);
  const Eigen::RowVectorXd lq = log_softmax(q_vec, temperature);
  const Eigen::RowVectorXd lp = log_softmax(p_vec, temperature);
  double kl = 0.0;
  for (Eigen::Index j = 0; j < lq.size(); ++j) {
    const double qj = std::exp(lq(j));
    if (qj > 0.0) kl += qj * (lq(j) - lp(j));
  }
  return kl;
}

ad::Tensor reverse_kl(const ad::Tensor& q_vec, const ad::Tensor& p_vec, double temperature) {
  check_kl_inputs(q_vec.value(), p_vec.value(), temperature);
  const double inv = 1.0 / temperature;
  const ad::Tensor zq = ad::scale(q_vec, inv);
  const ad::Tensor lq = ad::log_softmax_rows(zq);
  const ad::Tensor lp = ad::log_softmax_rows(ad::scale(p_vec, inv));
  return ad::sum(ad::hadamard(ad::softmax_rows(zq), lq - lp));
}

// ---------------------------------------------------------------------------
// Student

Student::Student(EncoderSpec spec, Vocabulary vocab, int classifier_hidden, double dropout,
                 std::uint64_t seed)
    : Student(std::move(spec), std::move(vocab), classifier_hidden, dropout, seed,
              std::mt19937_64(seed)) {}

Student::Student(EncoderSpec spec, Vocabulary vocab, int classifier_hidden, double dropout,
                 std::uint64_t seed, std::mt19937_64&& rng)
    : spec_(std::move(spec)),
      vocab_(std::move(vocab)),
      classifier_hidden_(classifier_hidden),
      dropout_(dropout),
      seed_(seed),
      encoder_(spec_, vocab_.size(), rng),
      pool_(spec_.width, rng),
      project_in_(spec_.width, 4 * spec_.width, rng),
      project_out_(4 * spec_.width, 4 * spec_.width, rng),
      classifier_(4 * spec_.width, classifier_hidden, dropout, rng) {}

Student Student::from_teacher(const Teacher& teacher, std::uint64_t seed) {
  Student student(teacher.config().news_encoder, teacher.news_vocab(),
                  teacher.config().classifier_hidden, teacher.config().dropout, seed);
  nn::ParameterList src;
  teacher.news_encoder().collect(src, "encoder");
  teacher.news_pool().collect(src, "pool");
  nn::copy_values(src, "", student.inherited_parameters(), "");
  return student;
}

StudentOutputs Student::forward(const std::string& text, std::mt19937_64* dropout_rng) const {
  StudentOutputs out;
  const SeqRep rep = encoder_.encode(tokenize(text, vocab_, spec_.max_len));
  out.f_prime_x = pool_(rep);
  out.f_prime_final = project_out_(ad::tanh(project_in_(out.f_prime_x)));
  out.logits = classifier_(out.f_prime_final, dropout_rng);
  return out;
}

BinaryLabel Student::predict(const std::string& text) const {
  ad::NoGradGuard no_grad;
  const ad::Matrix logits = forward(text).logits.value();
  return logits(0, 1) > logits(0, 0) ? BinaryLabel::Fake : BinaryLabel::Real;
}

nn::ParameterList Student::inherited_parameters() const {
  nn::ParameterList out;
  encoder_.collect(out, "encoder");
  pool_.collect(out, "pool");
  return out;
}

nn::ParameterList Student::fresh_parameters() const {
  nn::ParameterList out;
  project_in_.collect(out, "projection.in");
  project_out_.collect(out, "projection.out");
  classifier_.collect(out, "classifier");
  return out;
}

void Student::collect(nn::ParameterList& out) const {
  out.append(inherited_parameters());
  out.append(fresh_parameters());
}

void save_student(const std::filesystem::path& path, const Student& student) {
  detail::Json meta;
  meta["encoder"] = detail::to_json(student.encoder_spec());
  meta["vocab"] = detail::to_json(student.vocab());
  meta["classifier_hidden"] = student.classifier_hidden();
  meta["dropout"] = student.dropout();
  meta["seed"] = student.seed();
  nn::ParameterList params;
  student.collect(params);
  write_checkpoint(path, CheckpointData{"student", meta.dump(), snapshot(params)});
}

Student load_student(const std::filesystem::path& path) {
  const CheckpointData data = read_checkpoint(path);
  if (data.kind != "student") throw FormatError("not a student checkpoint: " + path.string());
  detail::Json meta;
  try {
    meta = detail::Json::parse(data.meta_json);
  } catch (const std::exception& e) {
    throw FormatError(std::string("student checkpoint header: ") + e.what());
  }
  EncoderSpec spec = detail::encoder_spec_from_json(meta.at("encoder"));
  Vocabulary vocab = detail::vocabulary_from_json(meta.at("vocab"));
  if (spec.vocab != hex64(vocab.hash())) {
    throw FormatError("student checkpoint vocabulary hash mismatch");
  }
  Student student(std::move(spec), std::move(vocab), meta.at("classifier_hidden").get<int>(),
                  meta.at("dropout").get<double>(), meta.at("seed").get<std::uint64_t>());
  nn::ParameterList params;
  student.collect(params);
  load_parameters(data, params);
  return student;
}

// ---------------------------------------------------------------------------
// Targets

DistillTargets compute_targets(const Teacher& teacher, std::span<const NewsItem> items,
                               const std::map<std::string, std::string>& positive_by_id,
                               double temperature) {
  if (!(temperature > 0.0)) throw InvalidArgument("temperature must be positive");
  ad::NoGradGuard no_grad;
  DistillTargets targets;
  targets.temperature = temperature;
  for (const auto& item : items) {
    auto it = positive_by_id.find(item.id);
    if (it == positive_by_id.end()) {
      targets.missing.push_back(item.id);
      continue;
    }
    ad::Matrix m = teacher.m_final(item.text, it->second).value();
    if (!m.allFinite()) throw Error("non-finite teacher representation for " + item.id);
    targets.by_id.emplace(item.id, std::move(m));
  }
  return targets;
}

void save_targets(const std::filesystem::path& path, const DistillTargets& targets,
                  const std::string& key) {
  detail::Json meta;
  meta["key"] = key;
  meta["temperature"] = targets.temperature;
  meta["missing"] = targets.missing;
  CheckpointData data{"distill_targets", meta.dump(), {}};
  for (const auto& [id, m] : targets.by_id) data.tensors.emplace_back(id, m);
  write_checkpoint(path, data);
}

std::optional<DistillTargets> load_targets(const std::filesystem::path& path,
                                           const std::string& key) {
  if (!std::filesystem::exists(path)) return std::nullopt;
  const CheckpointData data = read_checkpoint(path);
  if (data.kind != "distill_targets") {
    throw FormatError("not a distillation-target cache: " + path.string());
  }
  const auto meta = detail::Json::parse(data.meta_json);
  if (meta.at("key").get<std::string>() != key) return std::nullopt;
  DistillTargets targets;
  targets.temperature = meta.at("temperature").get<double>();
  targets.missing = meta.at("missing").get<std::vector<std::string>>();
  for (const auto& [id, m] : data.tensors) targets.by_id.emplace(id, m);
  return targets;
}

std::string target_cache_key(const std::filesystem::path& teacher_ckpt,
                             const std::filesystem::path& corpus, double temperature) {
  char tau[32];
  std::snprintf(tau, sizeof tau, "%.17g", temperature);
  return hex64(file_hash(teacher_ckpt)) + "-" + hex64(file_hash(corpus)) + "-" + tau;
}

// ---------------------------------------------------------------------------
// Losses and training

DistillLosses distill_losses(std::span<const StudentOutputs> outputs,
                             std::span<const std::string> ids,
                             std::span<const BinaryLabel> labels, const DistillTargets& targets,
                             const DistillWeights& weights, bool batch_averaged_target) {
  if (outputs.empty() || outputs.size() != ids.size() || outputs.size() != labels.size()) {
    throw InvalidArgument("distill_losses: batch sizes disagree or are empty");
  }
  const std::set<std::string> missing(targets.missing.begin(), targets.missing.end());

  std::vector<std::size_t> with_target;
  std::vector<const ad::Matrix*> target_rows;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto it = targets.by_id.find(ids[i]);
    if (it != targets.by_id.end()) {
      with_target.push_back(i);
      target_rows.push_back(&it->second);
    } else if (!missing.count(ids[i])) {
      throw InvalidArgument("no distillation target for news item " + ids[i]);
    }
  }

  DistillLosses out;
  if (with_target.empty()) {
    out.l_dis = ad::Tensor::scalar(0.0);
  } else {
    ad::Matrix mean_target;
    if (batch_averaged_target) {
      // Batch-mean target distribution, expressed as log-probabilities so the
      // softmax inside reverse_kl reproduces it exactly.
      const double tau = targets.temperature;
      Eigen::RowVectorXd mean_p = Eigen::RowVectorXd::Zero(target_rows.front()->cols());
      for (const auto* t : target_rows) {
        Eigen::RowVectorXd z = t->row(0) / tau;
        z = (z.array() - z.maxCoeff()).exp();
        mean_p += z / z.sum();
      }
      mean_p /= static_cast<double>(target_rows.size());
      mean_target = (mean_p.array().log() * tau).matrix();
    }
    ad::Tensor total;
    for (std::size_t k = 0; k < with_target.size(); ++k) {
      const ad::Tensor p =
          ad::Tensor::constant(batch_averaged_target ? mean_target : *target_rows[k]);
      const ad::Tensor kl =
          reverse_kl(outputs[with_target[k]].f_prime_final, p, targets.temperature);
      total = total.defined() ? total + kl : kl;
    }
    out.l_dis = ad::scale(total, 1.0 / static_cast<double>(with_target.size()));
  }

  ad::Tensor ce_total;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const ad::Tensor ce = cls_loss(outputs[i].logits, labels[i]);
    ce_total = ce_total.defined() ? ce_total + ce : ce;
  }
  out.l_cls = ad::scale(ce_total, 1.0 / static_cast<double>(outputs.size()));
  out.l_d = ad::scale(out.l_dis, weights.dis) + ad::scale(out.l_cls, weights.cls);
  return out;
}

namespace {

StudentCurveRow evaluate_losses(const Student& student, std::span<const NewsItem> items,
                                const DistillTargets& targets, const StudentTrainConfig& cfg) {
  ad::NoGradGuard no_grad;
  std::vector<StudentOutputs> outs;
  std::vector<std::string> ids;
  std::vector<BinaryLabel> labels;
  for (const auto& item : items) {
    outs.push_back(student.forward(item.text));
    ids.push_back(item.id);
    labels.push_back(item.label);
  }
  const DistillLosses l =
      distill_losses(outs, ids, labels, targets, cfg.weights, cfg.batch_averaged_target);
  return StudentCurveRow{0, l.l_dis.item(), l.l_cls.item(), l.l_d.item()};
}

}  // namespace

std::vector<StudentCurveRow> train_student(Student& student, std::span<const NewsItem> train,
                                           const DistillTargets& targets,
                                           const StudentTrainConfig& cfg) {
  if (train.empty()) throw InvalidArgument("train_student: empty training set");
  if (cfg.batch_size < 1) throw InvalidArgument("batch_size must be positive");
  if (cfg.epochs < 0) throw InvalidArgument("epochs must be non-negative");

  std::vector<StudentCurveRow> curve;
  curve.push_back(evaluate_losses(student, train, targets, cfg));

  nn::ParameterList all;
  student.collect(all);
  const nn::ParameterList trainable =
      cfg.freeze_inherited ? student.fresh_parameters() : all;
  nn::Adam adam(trainable.tensors(), cfg.adam);

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double dis = 0, cls = 0, total = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::vector<StudentOutputs> outs;
      std::vector<std::string> ids;
      std::vector<BinaryLabel> labels;
      for (std::size_t k = start; k < end; ++k) {
        const NewsItem& item = train[order[k]];
        outs.push_back(student.forward(item.text, &rng));
        ids.push_back(item.id);
        labels.push_back(item.label);
      }
      const DistillLosses l =
          distill_losses(outs, ids, labels, targets, cfg.weights, cfg.batch_averaged_target);
      dis += l.l_dis.item();
      cls += l.l_cls.item();
      total += l.l_d.item();
      ++batches;
      if (l.l_d.requires_grad()) {
        l.l_d.backward();
        adam.step();
      }
      for (const auto& p : all.items()) {
        ad::Tensor t = p.tensor;
        t.zero_grad();
      }
    }
    const double n = static_cast<double>(batches);
    curve.push_back(StudentCurveRow{epoch, dis / n, cls / n, total / n});
  }
  return curve;
}

void write_student_curve_csv(const std::filesystem::path& path,
                             std::span<const StudentCurveRow> rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,dis,cls,total\n";
  out.precision(17);
  for (const auto& r : rows) out << r.epoch << ',' << r.dis << ',' << r.cls << ',' << r.total << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace nrfe
