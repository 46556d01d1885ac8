// SPDX-License-Identifier: Apache-2.0
#include "nrfe/teacher.hpp"

#include "json_util.hpp"
#include "nrfe/checkpoint.hpp"
#include "nrfe/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

namespace nrfe {

std::string_view to_string(Ablation ablation) {
  switch (ablation) {
    case Ablation::Full: return "full";
    case Ablation::WoRc: return "wo_rc";
    case Ablation::WoRxc: return "wo_rxc";
    case Ablation::WoXrc: return "wo_xrc";
    case Ablation::OnlyRc: return "only_rc";
  }
  return "full";
}

Ablation parse_ablation(std::string_view text) {
  for (Ablation a : {Ablation::Full, Ablation::WoRc, Ablation::WoRxc, Ablation::WoXrc,
                     Ablation::OnlyRc}) {
    if (text == to_string(a)) return a;
  }
  throw InvalidArgument("unknown ablation variant '" + std::string(text) + "'");
}

HeadMask HeadMask::from(Ablation ablation) {
  switch (ablation) {
    case Ablation::Full: return {true, true, true};
    case Ablation::WoRc: return {false, true, true};
    case Ablation::WoRxc: return {true, false, true};
    case Ablation::WoXrc: return {true, true, false};
    case Ablation::OnlyRc: return {true, false, false};
  }
  return {};
}

// ---------------------------------------------------------------------------
// Cross-attention

CrossAttention::CrossAttention(int width, int heads, std::mt19937_64& rng)
    : w_query_(ad::Tensor::variable(nn::xavier_uniform(width, width, rng))),
      w_key_(ad::Tensor::variable(nn::xavier_uniform(width, width, rng))),
      w_value_(ad::Tensor::variable(nn::xavier_uniform(width, width, rng))),
      heads_(heads) {
  if (heads < 1 || width % heads != 0) throw InvalidArgument("cross heads must divide the width");
}

CrossAttention::CrossAttention(ad::Matrix w_query, ad::Matrix w_key, ad::Matrix w_value,
                               int heads)
    : w_query_(ad::Tensor::variable(std::move(w_query))),
      w_key_(ad::Tensor::variable(std::move(w_key))),
      w_value_(ad::Tensor::variable(std::move(w_value))),
      heads_(heads) {
  const ad::Index d = w_query_.rows();
  for (const auto* w : {&w_query_, &w_key_, &w_value_}) {
    if (w->rows() != d || w->cols() != d) throw InvalidArgument("cross-attention weights must be d x d");
  }
  if (heads < 1 || d % heads != 0) throw InvalidArgument("cross heads must divide the width");
}

SeqRep CrossAttention::operator()(const SeqRep& queries, const SeqRep& keys_values,
                                  std::vector<ad::Matrix>* weights_out) const {
  if (queries.width() != width() || keys_values.width() != width()) {
    throw InvalidArgument("cross-attention width mismatch");
  }
  SeqRep out;
  out.matrix = multi_head_attention(queries.matrix, keys_values.matrix, w_query_, w_key_,
                                    w_value_, heads_, keys_values.mask, weights_out);
  out.mask = queries.mask;
  return out;
}

void CrossAttention::collect(nn::ParameterList& out, const std::string& prefix) const {
  out.add(prefix + ".w_query", w_query_);
  out.add(prefix + ".w_key", w_key_);
  out.add(prefix + ".w_value", w_value_);
}

CrossAttended cross_attend(const SeqRep& a, const SeqRep& b, const CrossAttention& b_to_a_block,
                           const CrossAttention& a_to_b_block) {
  if (a.width() != b.width()) throw InvalidArgument("cross_attend: width mismatch");
  return CrossAttended{b_to_a_block(a, b), a_to_b_block(b, a)};
}

// ---------------------------------------------------------------------------
// Losses

double consistency_loss(const ad::Matrix& f_x, const ad::Matrix& f_r, int pair_label,
                        double margin) {
  if (f_x.size() != f_r.size()) throw InvalidArgument("consistency_loss: width mismatch");
  const double nx = f_x.norm();
  const double nr = f_r.norm();
  if (nx == 0.0 || nr == 0.0) throw InvalidArgument("consistency_loss: zero-norm vector");
  const double cos = Eigen::Map<const Eigen::VectorXd>(f_x.data(), f_x.size())
                         .dot(Eigen::Map<const Eigen::VectorXd>(f_r.data(), f_r.size())) /
                     (nx * nr);
  if (pair_label == 1) return 1.0 - cos;
  if (pair_label == 0) return std::max(0.0, cos - margin);
  throw InvalidArgument("pair_label must be 0 or 1");
}

ad::Tensor consistency_loss(const ad::Tensor& f_x, const ad::Tensor& f_r, int pair_label,
                            double margin) {
  const ad::Tensor cos = ad::cosine_similarity(f_x, f_r);
  if (pair_label == 1) return ad::Tensor::scalar(1.0) - cos;
  if (pair_label == 0) return ad::relu(cos - ad::Tensor::scalar(margin));
  throw InvalidArgument("pair_label must be 0 or 1");
}

ad::Tensor fuse(const ad::Tensor& m_x, const ad::Tensor& m_p, const ad::Tensor& m_p_to_x,
                const ad::Tensor& m_x_to_p) {
  const ad::Index d = m_x.cols();
  for (const auto* t : {&m_x, &m_p, &m_p_to_x, &m_x_to_p}) {
    if (t->rows() != 1 || t->cols() != d) throw InvalidArgument("fuse: width mismatch");
  }
  const std::vector<ad::Tensor> parts{m_x, m_p, m_p_to_x, m_x_to_p};
  return ad::concat_cols(parts);
}

double cross_entropy(const ad::Matrix& logits, BinaryLabel label) {
  if (logits.size() != 2) throw InvalidArgument("cross_entropy expects two logits");
  const double a = logits(0);
  const double b = logits(1);
  const double hi = std::max(a, b);
  const double lse = hi + std::log(std::exp(a - hi) + std::exp(b - hi));
  return lse - logits(class_index(label));
}

ad::Tensor cls_loss(const ad::Tensor& logits, BinaryLabel label) {
  if (logits.rows() != 1 || logits.cols() != 2) throw InvalidArgument("cls_loss expects 1 x 2 logits");
  return ad::scale(ad::pick(ad::log_softmax_rows(logits), 0, class_index(label)), -1.0);
}

// ---------------------------------------------------------------------------
// Heads and classifier

ConsistencyHead::ConsistencyHead(int width, bool raw_cosine, std::mt19937_64& rng)
    : raw_cosine_(raw_cosine), news_side_(width, width, rng), other_side_(width, width, rng) {}

ad::Tensor ConsistencyHead::project_news(const ad::Tensor& f_x) const {
  return raw_cosine_ ? f_x : ad::tanh(news_side_(f_x));
}

ad::Tensor ConsistencyHead::project_other(const ad::Tensor& f_r) const {
  return raw_cosine_ ? f_r : ad::tanh(other_side_(f_r));
}

ad::Tensor ConsistencyHead::loss(const ad::Tensor& f_x, const ad::Tensor& f_r, int pair_label,
                                 double margin) const {
  return consistency_loss(project_news(f_x), project_other(f_r), pair_label, margin);
}

void ConsistencyHead::collect(nn::ParameterList& out, const std::string& prefix) const {
  news_side_.collect(out, prefix + ".news_side");
  other_side_.collect(out, prefix + ".other_side");
}

Classifier::Classifier(ad::Index in, int hidden, double dropout, std::mt19937_64& rng)
    : hidden_(in, hidden, rng), output_(hidden, 2, rng), dropout_(dropout) {
  if (dropout < 0.0 || dropout >= 1.0) throw InvalidArgument("dropout must lie in [0, 1)");
}

ad::Tensor Classifier::operator()(const ad::Tensor& x, std::mt19937_64* dropout_rng) const {
  ad::Tensor h = ad::relu(hidden_(x));
  if (dropout_rng) h = ad::dropout(h, dropout_, *dropout_rng);
  return output_(h);
}

void Classifier::collect(nn::ParameterList& out, const std::string& prefix) const {
  hidden_.collect(out, prefix + ".hidden");
  output_.collect(out, prefix + ".output");
}

// ---------------------------------------------------------------------------
// Teacher

void validate(const TeacherConfig& cfg) {
  validate(cfg.news_encoder);
  validate(cfg.reasoning_encoder);
  if (cfg.news_encoder.width != cfg.reasoning_encoder.width) {
    throw InvalidArgument("news and reasoning encoders must share the width");
  }
  if (cfg.margin < 0.0 || cfg.margin >= 1.0) throw InvalidArgument("margin must lie in [0, 1)");
  if (cfg.classifier_hidden < 1) throw InvalidArgument("classifier_hidden must be positive");
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0) throw InvalidArgument("dropout must lie in [0, 1)");
}

namespace {

const TeacherConfig& checked(const TeacherConfig& cfg) {
  validate(cfg);
  return cfg;
}

}  // namespace

Teacher::Teacher(TeacherConfig cfg, Vocabulary news_vocab, Vocabulary reasoning_vocab,
                 std::uint64_t seed)
    : Teacher(std::move(cfg), std::move(news_vocab), std::move(reasoning_vocab), seed,
              std::mt19937_64(seed)) {}

Teacher::Teacher(TeacherConfig cfg, Vocabulary news_vocab, Vocabulary reasoning_vocab,
                 std::uint64_t seed, std::mt19937_64&& rng)
    : cfg_(checked(cfg)),
      news_vocab_(std::move(news_vocab)),
      reasoning_vocab_(std::move(reasoning_vocab)),
      seed_(seed),
      news_encoder_(cfg_.news_encoder, news_vocab_.size(), rng),
      reasoning_encoder_(cfg_.reasoning_encoder, reasoning_vocab_.size(), rng),
      pool_x_(cfg_.news_encoder.width, rng),
      pool_p_(cfg_.news_encoder.width, rng),
      pool_n_(cfg_.news_encoder.width, rng),
      pool_p_to_x_(cfg_.news_encoder.width, rng),
      pool_n_to_x_(cfg_.news_encoder.width, rng),
      pool_x_to_p_(cfg_.news_encoder.width, rng),
      pool_x_to_n_(cfg_.news_encoder.width, rng),
      r_to_x_(cfg_.news_encoder.width, cfg_.cross_heads, rng),
      x_to_r_(cfg_.news_encoder.width, cfg_.cross_heads, rng),
      rc_(cfg_.news_encoder.width, cfg_.raw_cosine, rng),
      rxc_(cfg_.news_encoder.width, cfg_.raw_cosine, rng),
      xrc_(cfg_.news_encoder.width, cfg_.raw_cosine, rng),
      classifier_(4 * cfg_.news_encoder.width, cfg_.classifier_hidden, cfg_.dropout, rng) {
  cfg_.news_encoder.vocab = hex64(news_vocab_.hash());
  cfg_.reasoning_encoder.vocab = hex64(reasoning_vocab_.hash());
}

SeqRep Teacher::encode_news(const std::string& text) const {
  return news_encoder_.encode(tokenize(text, news_vocab_, cfg_.news_encoder.max_len));
}

SeqRep Teacher::encode_reasoning(const std::string& text) const {
  return reasoning_encoder_.encode(
      tokenize(text, reasoning_vocab_, cfg_.reasoning_encoder.max_len));
}

ad::Tensor Teacher::pool_news(const SeqRep& news) const { return pool_x_(news); }

PairPooled Teacher::pool_pair(const SeqRep& news, const SeqRep& reasoning,
                              ReasoningType kind) const {
  const CrossAttended crossed = cross_attend(news, reasoning, r_to_x_, x_to_r_);
  const bool pos = kind == ReasoningType::Positive;
  PairPooled out;
  out.f_r = (pos ? pool_p_ : pool_n_)(reasoning);
  out.f_r_to_x = (pos ? pool_p_to_x_ : pool_n_to_x_)(crossed.b_to_a);
  out.f_x_to_r = (pos ? pool_x_to_p_ : pool_x_to_n_)(crossed.a_to_b);
  return out;
}

ConsistencyTerms Teacher::consistency(const ad::Tensor& f_x, const PairPooled& pair,
                                      int pair_label) const {
  const HeadMask m = mask();
  const double margin = cfg_.margin;
  ConsistencyTerms t;
  t.rc = m.rc ? rc_.loss(f_x, pair.f_r, pair_label, margin) : ad::Tensor::scalar(0.0);
  t.rxc = m.rxc ? rxc_.loss(f_x, pair.f_r_to_x, pair_label, margin) : ad::Tensor::scalar(0.0);
  t.xrc = m.xrc ? xrc_.loss(f_x, pair.f_x_to_r, pair_label, margin) : ad::Tensor::scalar(0.0);
  t.c = t.rc + t.rxc + t.xrc;
  return t;
}

ad::Tensor Teacher::fuse_positive(const ad::Tensor& f_x, const PairPooled& positive) const {
  return fuse(rc_.project_news(f_x), rc_.project_other(positive.f_r),
              rxc_.project_other(positive.f_r_to_x), xrc_.project_other(positive.f_x_to_r));
}

ad::Tensor Teacher::classify(const ad::Tensor& m_final, std::mt19937_64* dropout_rng) const {
  return classifier_(m_final, dropout_rng);
}

ad::Tensor Teacher::m_final(const std::string& news, const std::string& positive) const {
  const SeqRep x = encode_news(news);
  return fuse_positive(pool_news(x), pool_pair(x, encode_reasoning(positive),
                                               ReasoningType::Positive));
}

void Teacher::collect(nn::ParameterList& out) const {
  out.append(backbone_parameters());
  out.append(head_parameters("rc"));
  out.append(head_parameters("rxc"));
  out.append(head_parameters("xrc"));
  out.append(classifier_parameters());
}

nn::ParameterList Teacher::head_parameters(const std::string& head) const {
  nn::ParameterList out;
  if (head == "rc") {
    rc_.collect(out, "head.rc");
  } else if (head == "rxc") {
    rxc_.collect(out, "head.rxc");
  } else if (head == "xrc") {
    xrc_.collect(out, "head.xrc");
  } else {
    throw InvalidArgument("unknown head '" + head + "'");
  }
  return out;
}

nn::ParameterList Teacher::backbone_parameters() const {
  nn::ParameterList out;
  news_encoder_.collect(out, "news_encoder");
  reasoning_encoder_.collect(out, "reasoning_encoder");
  pool_x_.collect(out, "pool.x");
  pool_p_.collect(out, "pool.p");
  pool_n_.collect(out, "pool.n");
  pool_p_to_x_.collect(out, "pool.p_to_x");
  pool_n_to_x_.collect(out, "pool.n_to_x");
  pool_x_to_p_.collect(out, "pool.x_to_p");
  pool_x_to_n_.collect(out, "pool.x_to_n");
  r_to_x_.collect(out, "cross.r_to_x");
  x_to_r_.collect(out, "cross.x_to_r");
  return out;
}

nn::ParameterList Teacher::classifier_parameters() const {
  nn::ParameterList out;
  classifier_.collect(out, "classifier");
  return out;
}

nn::ParameterList Teacher::stage1_parameters() const {
  nn::ParameterList out = backbone_parameters();
  const HeadMask m = mask();
  if (m.rc) out.append(head_parameters("rc"));
  if (m.rxc) out.append(head_parameters("rxc"));
  if (m.xrc) out.append(head_parameters("xrc"));
  return out;
}

// ---------------------------------------------------------------------------
// Training

std::vector<TeacherExample> make_teacher_examples(std::span<const NewsItem> items,
                                                  std::span<const ReasoningStoreEntry> store) {
  std::map<std::pair<std::string, ReasoningType>, const ReasoningStoreEntry*> index;
  for (const auto& e : store) {
    if (e.qualified) index[{e.news_id, e.kind}] = &e;
  }
  std::vector<TeacherExample> out;
  out.reserve(items.size());
  for (const auto& item : items) {
    auto pos = index.find({item.id, ReasoningType::Positive});
    if (pos == index.end()) {
      throw InvalidArgument("no qualified positive reasoning for news item " + item.id);
    }
    TeacherExample ex{item, pos->second->reasoning_text, std::nullopt};
    auto neg = index.find({item.id, ReasoningType::Negative});
    if (neg != index.end()) ex.negative = neg->second->reasoning_text;
    out.push_back(std::move(ex));
  }
  return out;
}

void write_curve_csv(const std::filesystem::path& path, std::span<const LossCurveRow> rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,rc,rxc,xrc,c,cls\n";
  out.precision(17);
  for (const auto& r : rows) {
    out << r.epoch << ',' << r.rc << ',' << r.rxc << ',' << r.xrc << ',' << r.c << ',' << r.cls
        << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

namespace {

ad::Tensor sum_all(std::vector<ad::Tensor>& terms) {
  ad::Tensor total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = total + terms[i];
  return total;
}

void clear_grads(const nn::ParameterList& params) {
  for (const auto& p : params.items()) {
    ad::Tensor t = p.tensor;
    t.zero_grad();
  }
}

struct TermTotals {
  double rc = 0, rxc = 0, xrc = 0, c = 0, cls = 0;
  std::size_t pairs = 0;
  std::size_t items = 0;

  void add(const ConsistencyTerms& t) {
    rc += t.rc.item();
    rxc += t.rxc.item();
    xrc += t.xrc.item();
    c += t.c.item();
    ++pairs;
  }
  LossCurveRow row(int epoch) const {
    LossCurveRow r;
    r.epoch = epoch;
    if (pairs > 0) {
      const double n = static_cast<double>(pairs);
      r.rc = rc / n;
      r.rxc = rxc / n;
      r.xrc = xrc / n;
      r.c = c / n;
    }
    if (items > 0) r.cls = cls / static_cast<double>(items);
    return r;
  }
};

}  // namespace

void train_teacher(Teacher& teacher, std::span<const TeacherExample> examples,
                   const TeacherTrainConfig& cfg) {
  if (examples.empty()) throw InvalidArgument("train_teacher: empty training set");
  if (cfg.batch_size < 1) throw InvalidArgument("batch_size must be positive");
  if (cfg.stage1_epochs < 0 || cfg.stage2_epochs < 0) {
    throw InvalidArgument("epoch counts must be non-negative");
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  nn::ParameterList everything;
  teacher.collect(everything);

  // Stage 1: consistency learning.
  {
    nn::Adam adam(teacher.stage1_parameters().tensors(), cfg.adam);
    for (int epoch = 1; epoch <= cfg.stage1_epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      TermTotals totals;
      for (std::size_t start = 0; start < order.size(); start += batch) {
        const std::size_t end = std::min(order.size(), start + batch);
        std::vector<ad::Tensor> losses;
        for (std::size_t k = start; k < end; ++k) {
          const TeacherExample& ex = examples[order[k]];
          const SeqRep x = teacher.encode_news(ex.item.text);
          const ad::Tensor f_x = teacher.pool_news(x);
          const auto pos = teacher.pool_pair(x, teacher.encode_reasoning(ex.positive),
                                             ReasoningType::Positive);
          ConsistencyTerms t = teacher.consistency(f_x, pos, 1);
          totals.add(t);
          losses.push_back(t.c);
          if (ex.negative) {
            const auto neg = teacher.pool_pair(x, teacher.encode_reasoning(*ex.negative),
                                               ReasoningType::Negative);
            t = teacher.consistency(f_x, neg, 0);
            totals.add(t);
            losses.push_back(t.c);
          }
        }
        const ad::Tensor loss =
            ad::scale(sum_all(losses), 1.0 / static_cast<double>(losses.size()));
        if (loss.requires_grad()) {
          loss.backward();
          adam.step();
        }
        clear_grads(everything);
      }
      teacher.curves().stage1.push_back(totals.row(epoch));
    }
  }

  // Stage 2: classification on positive pairs; heads frozen.
  {
    nn::ParameterList trainable = teacher.backbone_parameters();
    trainable.append(teacher.classifier_parameters());
    nn::Adam adam(trainable.tensors(), cfg.adam);
    for (int epoch = 1; epoch <= cfg.stage2_epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      TermTotals totals;
      for (std::size_t start = 0; start < order.size(); start += batch) {
        const std::size_t end = std::min(order.size(), start + batch);
        std::vector<ad::Tensor> cls_terms;
        std::vector<ad::Tensor> c_terms;
        for (std::size_t k = start; k < end; ++k) {
          const TeacherExample& ex = examples[order[k]];
          const SeqRep x = teacher.encode_news(ex.item.text);
          const ad::Tensor f_x = teacher.pool_news(x);
          const auto pos = teacher.pool_pair(x, teacher.encode_reasoning(ex.positive),
                                             ReasoningType::Positive);
          const ad::Tensor logits = teacher.classify(teacher.fuse_positive(f_x, pos), &rng);
          const ad::Tensor ce = cls_loss(logits, ex.item.label);
          totals.cls += ce.item();
          ++totals.items;
          cls_terms.push_back(ce);
          if (cfg.joint_stage2) {
            ConsistencyTerms t = teacher.consistency(f_x, pos, 1);
            totals.add(t);
            c_terms.push_back(t.c);
            if (ex.negative) {
              const auto neg = teacher.pool_pair(x, teacher.encode_reasoning(*ex.negative),
                                                 ReasoningType::Negative);
              t = teacher.consistency(f_x, neg, 0);
              totals.add(t);
              c_terms.push_back(t.c);
            }
          }
        }
        ad::Tensor loss =
            ad::scale(sum_all(cls_terms), 1.0 / static_cast<double>(cls_terms.size()));
        if (!c_terms.empty()) {
          loss = loss + ad::scale(sum_all(c_terms),
                                  cfg.joint_lambda / static_cast<double>(c_terms.size()));
        }
        loss.backward();
        adam.step();
        clear_grads(everything);
      }
      teacher.curves().stage2.push_back(totals.row(epoch));
    }
  }
}

double teacher_accuracy(const Teacher& teacher, std::span<const TeacherExample> examples) {
  if (examples.empty()) throw InvalidArgument("teacher_accuracy: no examples");
  ad::NoGradGuard no_grad;
  std::size_t correct = 0;
  for (const auto& ex : examples) {
    const ad::Matrix logits = teacher.classify(teacher.m_final(ex.item.text, ex.positive)).value();
    const int pred = logits(0, 1) > logits(0, 0) ? 1 : 0;
    if (pred == class_index(ex.item.label)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

detail::Json curves_to_json(std::span<const LossCurveRow> rows) {
  detail::Json out = detail::Json::array();
  for (const auto& r : rows) out.push_back({r.epoch, r.rc, r.rxc, r.xrc, r.c, r.cls});
  return out;
}

std::vector<LossCurveRow> curves_from_json(const detail::Json& j) {
  std::vector<LossCurveRow> rows;
  for (const auto& r : j) {
    rows.push_back(LossCurveRow{r.at(0).get<int>(), r.at(1).get<double>(), r.at(2).get<double>(),
                                r.at(3).get<double>(), r.at(4).get<double>(),
                                r.at(5).get<double>()});
  }
  return rows;
}

}  // namespace

void save_teacher(const std::filesystem::path& path, const Teacher& teacher) {
  const TeacherConfig& cfg = teacher.config();
  detail::Json meta;
  meta["news_encoder"] = detail::to_json(cfg.news_encoder);
  meta["reasoning_encoder"] = detail::to_json(cfg.reasoning_encoder);
  meta["cross_heads"] = cfg.cross_heads;
  meta["raw_cosine"] = cfg.raw_cosine;
  meta["margin"] = cfg.margin;
  meta["classifier_hidden"] = cfg.classifier_hidden;
  meta["dropout"] = cfg.dropout;
  meta["ablation"] = std::string(to_string(cfg.ablation));
  meta["seed"] = teacher.seed();
  meta["stage1_epochs"] = teacher.curves().stage1.size();
  meta["stage2_epochs"] = teacher.curves().stage2.size();
  meta["curves"] = {{"stage1", curves_to_json(teacher.curves().stage1)},
                    {"stage2", curves_to_json(teacher.curves().stage2)}};
  meta["news_vocab"] = detail::to_json(teacher.news_vocab());
  meta["reasoning_vocab"] = detail::to_json(teacher.reasoning_vocab());
  nn::ParameterList params;
  teacher.collect(params);
  write_checkpoint(path, CheckpointData{"teacher", meta.dump(), snapshot(params)});
}

Teacher load_teacher(const std::filesystem::path& path) {
  const CheckpointData data = read_checkpoint(path);
  if (data.kind != "teacher") throw FormatError("not a teacher checkpoint: " + path.string());
  detail::Json meta;
  try {
    meta = detail::Json::parse(data.meta_json);
  } catch (const std::exception& e) {
    throw FormatError(std::string("teacher checkpoint header: ") + e.what());
  }
  TeacherConfig cfg;
  cfg.news_encoder = detail::encoder_spec_from_json(meta.at("news_encoder"));
  cfg.reasoning_encoder = detail::encoder_spec_from_json(meta.at("reasoning_encoder"));
  cfg.cross_heads = meta.at("cross_heads").get<int>();
  cfg.raw_cosine = meta.at("raw_cosine").get<bool>();
  cfg.margin = meta.at("margin").get<double>();
  cfg.classifier_hidden = meta.at("classifier_hidden").get<int>();
  cfg.dropout = meta.at("dropout").get<double>();
  cfg.ablation = parse_ablation(meta.at("ablation").get<std::string>());
  Vocabulary news_vocab = detail::vocabulary_from_json(meta.at("news_vocab"));
  Vocabulary reasoning_vocab = detail::vocabulary_from_json(meta.at("reasoning_vocab"));
  if (cfg.news_encoder.vocab != hex64(news_vocab.hash()) ||
      cfg.reasoning_encoder.vocab != hex64(reasoning_vocab.hash())) {
    throw FormatError("teacher checkpoint vocabulary hash mismatch");
  }
  Teacher teacher(cfg, std::move(news_vocab), std::move(reasoning_vocab),
                  meta.at("seed").get<std::uint64_t>());
  nn::ParameterList params;
  teacher.collect(params);
  load_parameters(data, params);
  teacher.curves().stage1 = curves_from_json(meta.at("curves").at("stage1"));
  teacher.curves().stage2 = curves_from_json(meta.at("curves").at("stage2"));
  return teacher;
}

}  // namespace nrfe
