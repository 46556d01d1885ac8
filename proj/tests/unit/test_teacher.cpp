// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"
#include "support/models.hpp"
#include "support/test_support.hpp"

#include "nrfe/teacher.hpp"

#include <cmath>

using namespace nrfe;
using namespace nrfe::testing;

namespace {

ad::Matrix row(std::initializer_list<double> v) {
  ad::Matrix m(1, static_cast<ad::Index>(v.size()));
  ad::Index i = 0;
  for (double x : v) m(0, i++) = x;
  return m;
}

SeqRep rep(const ad::Matrix& m) {
  return SeqRep{ad::Tensor::constant(m), ad::Mask(static_cast<std::size_t>(m.rows()), true)};
}

}  // namespace

TEST_CASE("consistency loss identities") {
  const ad::Matrix f = row({0.3, -1.2, 2.0});
  CHECK(std::abs(consistency_loss(f, f, 1, 0.2)) < 1e-12);
  CHECK(consistency_loss(row({1, 0}), row({0, 1}), 0, 0.2) == 0.0);
  CHECK(consistency_loss(row({1, 0}), row({0.5, std::sqrt(3.0) / 2}), 0, 0.2) ==
        doctest::Approx(0.3).epsilon(1e-12));
  CHECK(consistency_loss(row({1, 0}), row({-1, 0}), 1, 0.2) == doctest::Approx(2.0));
  CHECK(consistency_loss(row({1, 0}), row({-1, 0}), 0, 0.2) == 0.0);
  CHECK_THROWS_AS(consistency_loss(row({0, 0}), row({1, 0}), 1, 0.2), InvalidArgument);
  CHECK_THROWS_AS(consistency_loss(row({1, 0}), row({1, 0}), 2, 0.2), InvalidArgument);

  const auto t = consistency_loss(ad::Tensor::constant(row({1, 0})),
                                  ad::Tensor::constant(row({0.5, std::sqrt(3.0) / 2})), 0, 0.2);
  CHECK(t.item() == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("consistency loss property: scale invariance and range") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 200; ++i) {
    const ad::Matrix a = random_matrix(1, 6, rng), b = random_matrix(1, 6, rng);
    const double l1 = consistency_loss(a, b, 1, 0.2);
    const double l0 = consistency_loss(a, b, 0, 0.2);
    CHECK(l1 >= 0.0);
    CHECK(l1 <= 2.0 + 1e-12);
    CHECK(l0 >= 0.0);
    CHECK(l0 <= 0.8 + 1e-12);
    CHECK(consistency_loss(a * 3.7, b * 0.01, 1, 0.2) == doctest::Approx(l1).epsilon(1e-10));
  }
}

TEST_CASE("cross-entropy reference values") {
  CHECK(cross_entropy(row({0.7, 0.7}), BinaryLabel::Fake) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(cross_entropy(row({1, 3}), BinaryLabel::Fake) ==
        doctest::Approx(0.12692801104297263).epsilon(1e-13));
  CHECK(cls_loss(ad::Tensor::constant(row({1, 3})), BinaryLabel::Real).item() ==
        doctest::Approx(2.1269280110429727).epsilon(1e-13));
  CHECK(std::isfinite(cross_entropy(row({800, -800}), BinaryLabel::Fake)));
}

TEST_CASE("cross-attention reference values") {
  ad::Matrix a(2, 2), b(2, 2);
  a << 1, 0.5, -0.5, 2;
  b << 0.25, 1, 1.5, -1;
  const ad::Matrix I = ad::Matrix::Identity(2, 2);
  CrossAttention b_to_a(I, I, I), a_to_b(I, I, I);
  std::vector<ad::Matrix> wa, wb;
  const auto out_a = b_to_a(rep(a), rep(b), &wa);
  a_to_b(rep(b), rep(a), &wb);
  REQUIRE(wa.size() == 1);
  const double ea[2][2] = {{0.45592055665077397, 0.544079443349226},
                           {0.9633981808421657, 0.036601819157834364}};
  const double eb[2][2] = {{0.3109899782596647, 0.6890100217403352},
                           {0.9341126410010855, 0.06588735899891446}};
  const double eo[2][2] = {{0.9300993041865324, -0.08815888669845201},
                           {0.295752273947293, 0.9267963616843313}};
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      CHECK(wa[0](i, j) == doctest::Approx(ea[i][j]).epsilon(1e-13));
      CHECK(wb[0](i, j) == doctest::Approx(eb[i][j]).epsilon(1e-13));
      CHECK(out_a.matrix.value()(i, j) == doctest::Approx(eo[i][j]).epsilon(1e-13));
    }
  }
}

TEST_CASE("cross_attend shapes and masks") {
  std::mt19937_64 rng(3);
  CrossAttention r_to_x(4, 2, rng), x_to_r(4, 2, rng);
  SeqRep x{ad::Tensor::constant(random_matrix(3, 4, rng)), {true, true, true}};
  SeqRep r{ad::Tensor::constant(random_matrix(5, 4, rng)), {true, true, true, false, false}};
  const auto c = cross_attend(x, r, r_to_x, x_to_r);
  CHECK(c.b_to_a.length() == 3);
  CHECK(c.a_to_b.length() == 5);
  CHECK(c.b_to_a.mask == x.mask);
  CHECK(c.a_to_b.mask == r.mask);
  SeqRep wide{ad::Tensor::constant(random_matrix(2, 6, rng)), {true, true}};
  CHECK_THROWS_AS(cross_attend(x, wide, r_to_x, x_to_r), InvalidArgument);
  CHECK_THROWS_AS(CrossAttention(4, 3, rng), InvalidArgument);
}

TEST_CASE("fusion concatenates four d-vectors") {
  const auto f = fuse(ad::Tensor::constant(row({1, 2})), ad::Tensor::constant(row({3, 4})),
                      ad::Tensor::constant(row({5, 6})), ad::Tensor::constant(row({7, 8})));
  CHECK(f.value() == row({1, 2, 3, 4, 5, 6, 7, 8}));
  CHECK_THROWS_AS(fuse(ad::Tensor::constant(row({1, 2})), ad::Tensor::constant(row({3})),
                       ad::Tensor::constant(row({5, 6})), ad::Tensor::constant(row({7, 8}))),
                  InvalidArgument);
}

TEST_CASE("ablation masks") {
  CHECK(HeadMask::from(Ablation::Full) == HeadMask{true, true, true});
  CHECK(HeadMask::from(Ablation::WoRc) == HeadMask{false, true, true});
  CHECK(HeadMask::from(Ablation::WoRxc) == HeadMask{true, false, true});
  CHECK(HeadMask::from(Ablation::WoXrc) == HeadMask{true, true, false});
  CHECK(HeadMask::from(Ablation::OnlyRc) == HeadMask{true, false, false});
  for (auto a : {Ablation::Full, Ablation::WoRc, Ablation::WoRxc, Ablation::WoXrc, Ablation::OnlyRc}) {
    CHECK(parse_ablation(to_string(a)) == a);
  }
  CHECK_THROWS_AS(parse_ablation("wo_everything"), InvalidArgument);
}

TEST_CASE("config validation") {
  auto c = small_teacher_config();
  CHECK_NOTHROW(validate(c));
  c.reasoning_encoder.width = 16;
  CHECK_THROWS_AS(validate(c), InvalidArgument);
  c = small_teacher_config();
  c.margin = 1.0;
  CHECK_THROWS_AS(validate(c), InvalidArgument);
  c = small_teacher_config();
  c.dropout = 1.0;
  CHECK_THROWS_AS(validate(c), InvalidArgument);
}

TEST_CASE("teacher examples use qualified reasoning only") {
  const auto data = make_synthetic_corpus(8, 2);
  auto store = data.store;
  const auto ex = make_teacher_examples(data.items, store);
  CHECK(ex.size() == 8);
  for (const auto& e : ex) CHECK(e.negative.has_value());
  for (auto& e : store) {
    if (e.news_id == data.items[0].id) e.qualified = e.kind == ReasoningType::Positive;
  }
  CHECK_FALSE(make_teacher_examples(data.items, store)[0].negative.has_value());
  for (auto& e : store) {
    if (e.news_id == data.items[0].id) e.qualified = false;
  }
  CHECK_THROWS_AS(make_teacher_examples(data.items, store), InvalidArgument);
}

TEST_CASE("masked consistency terms are constant zero") {
  const auto data = make_synthetic_corpus(8, 1);
  for (auto a : {Ablation::WoRc, Ablation::WoRxc, Ablation::WoXrc, Ablation::OnlyRc}) {
    CAPTURE(to_string(a));
    const Teacher t = small_teacher(data, a);
    const auto x = t.encode_news(data.items[0].text);
    const auto pair = t.pool_pair(x, t.encode_reasoning(data.store[0].reasoning_text),
                                  ReasoningType::Positive);
    const auto terms = t.consistency(t.pool_news(x), pair, 1);
    const auto m = t.mask();
    for (auto [on, term] : {std::pair{m.rc, terms.rc}, {m.rxc, terms.rxc}, {m.xrc, terms.xrc}}) {
      if (!on) {
        CHECK(term.item() == 0.0);
        CHECK_FALSE(term.requires_grad());
      }
    }
    CHECK(terms.c.item() ==
          doctest::Approx(terms.rc.item() + terms.rxc.item() + terms.xrc.item()));
  }
}

TEST_CASE("parameter groups partition the model") {
  const auto data = make_synthetic_corpus(8, 1);
  const Teacher t = small_teacher(data, Ablation::OnlyRc);
  nn::ParameterList all;
  t.collect(all);
  const std::size_t expected = t.backbone_parameters().size() + t.head_parameters("rc").size() +
                               t.head_parameters("rxc").size() + t.head_parameters("xrc").size() +
                               t.classifier_parameters().size();
  CHECK(all.size() == expected);
  CHECK(t.stage1_parameters().size() ==
        t.backbone_parameters().size() + t.head_parameters("rc").size());
  CHECK(t.stage1_parameters().find("head.rxc.news_side.weight") == nullptr);
  CHECK(t.stage1_parameters().find("head.rc.news_side.weight") != nullptr);
  CHECK_THROWS_AS(t.head_parameters("zz"), InvalidArgument);
}

TEST_CASE("m_final has width 4d and logits width 2") {
  const auto data = make_synthetic_corpus(8, 1);
  const Teacher t = small_teacher(data);
  const auto m = t.m_final(data.items[0].text, data.store[0].reasoning_text);
  CHECK(m.rows() == 1);
  CHECK(m.cols() == 4 * t.width());
  CHECK(t.classify(m).cols() == 2);
}

TEST_CASE("gradient check: cross-attention") {
  std::mt19937_64 rng(5);
  CrossAttention block(6, 2, rng);
  auto q = ad::Tensor::variable(random_matrix(3, 6, rng));
  auto kv = ad::Tensor::variable(random_matrix(4, 6, rng));
  const ad::Matrix probe = random_matrix(3, 6, rng);
  nn::ParameterList params;
  block.collect(params, "x");
  auto tensors = params.tensors();
  tensors.push_back(q);
  tensors.push_back(kv);
  const double err = gradient_check(
      [&] {
        const auto out = block(SeqRep{q, {true, true, true}}, SeqRep{kv, {true, true, false, true}});
        return ad::sum(ad::hadamard(out.matrix, ad::Tensor::constant(probe)));
      },
      tensors);
  CHECK(err < 1e-6);
}

TEST_CASE("gradient check: three-head consistency loss") {
  const auto data = make_synthetic_corpus(8, 1);
  const Teacher t = small_teacher(data);
  std::mt19937_64 rng(6);
  auto f_x = ad::Tensor::variable(random_matrix(1, 8, rng));
  PairPooled pair{ad::Tensor::variable(random_matrix(1, 8, rng)),
                  ad::Tensor::variable(random_matrix(1, 8, rng)),
                  ad::Tensor::variable(random_matrix(1, 8, rng))};
  std::vector<ad::Tensor> tensors{f_x, pair.f_r, pair.f_r_to_x, pair.f_x_to_r};
  for (const char* h : {"rc", "rxc", "xrc"}) {
    for (auto& p : t.head_parameters(h).tensors()) tensors.push_back(p);
  }
  for (int label : {1, 0}) {
    CAPTURE(label);
    const double err =
        gradient_check([&] { return t.consistency(f_x, pair, label).c; }, tensors);
    CHECK(err < 1e-6);
  }
}

TEST_CASE("training respects stage boundaries and masks") {
  const auto data = make_synthetic_corpus(24, 3);
  const auto examples = make_teacher_examples(data.items, data.store);
  for (auto a : {Ablation::Full, Ablation::WoRxc}) {
    CAPTURE(to_string(a));
    Teacher t = small_teacher(data, a);
    const auto cls_before = values_of(t.classifier_parameters());
    const auto rxc_before = values_of(t.head_parameters("rxc"));
    const auto rc_before = values_of(t.head_parameters("rc"));

    TeacherTrainConfig cfg;
    cfg.stage1_epochs = 2;
    cfg.stage2_epochs = 0;
    cfg.adam.learning_rate = 1e-2;
    train_teacher(t, examples, cfg);
    CHECK(same_values(t.classifier_parameters(), cls_before));
    CHECK_FALSE(same_values(t.head_parameters("rc"), rc_before));
    CHECK(same_values(t.head_parameters("rxc"), rxc_before) == (a == Ablation::WoRxc));
    REQUIRE(t.curves().stage1.size() == 2);
    for (const auto& r : t.curves().stage1) {
      if (a == Ablation::WoRxc) CHECK(r.rxc == 0.0);
      CHECK(r.c == doctest::Approx(r.rc + r.rxc + r.xrc));
      CHECK(r.cls == 0.0);
    }

    const auto heads_after_stage1 = values_of(t.head_parameters("rc"));
    cfg.stage1_epochs = 0;
    cfg.stage2_epochs = 2;
    train_teacher(t, examples, cfg);
    CHECK(same_values(t.head_parameters("rc"), heads_after_stage1));
    CHECK_FALSE(same_values(t.classifier_parameters(), cls_before));
    REQUIRE(t.curves().stage2.size() == 2);
    CHECK(t.curves().stage2[0].c == 0.0);
    CHECK(t.curves().stage2[0].cls > 0.0);
  }
  Teacher t = small_teacher(data);
  CHECK_THROWS_AS(train_teacher(t, {}, TeacherTrainConfig{}), InvalidArgument);
}

TEST_CASE("joint stage two reports the consistency term") {
  const auto data = make_synthetic_corpus(8, 3);
  const auto examples = make_teacher_examples(data.items, data.store);
  Teacher t = small_teacher(data);
  TeacherTrainConfig cfg;
  cfg.stage1_epochs = 0;
  cfg.stage2_epochs = 1;
  cfg.joint_stage2 = true;
  train_teacher(t, examples, cfg);
  CHECK(t.curves().stage2[0].c > 0.0);
}

TEST_CASE("training is deterministic for a seed") {
  const auto data = make_synthetic_corpus(16, 4);
  const auto examples = make_teacher_examples(data.items, data.store);
  TeacherTrainConfig cfg;
  cfg.stage1_epochs = 1;
  cfg.stage2_epochs = 1;
  cfg.adam.learning_rate = 1e-2;
  Teacher a = small_teacher(data, Ablation::Full, 7);
  Teacher b = small_teacher(data, Ablation::Full, 7);
  train_teacher(a, examples, cfg);
  train_teacher(b, examples, cfg);
  nn::ParameterList pa, pb;
  a.collect(pa);
  b.collect(pb);
  CHECK(same_values(pa, values_of(pb)));
}

TEST_CASE("teacher checkpoint round trip") {
  TempDir dir;
  const auto data = make_synthetic_corpus(8, 5);
  const auto examples = make_teacher_examples(data.items, data.store);
  Teacher t = small_teacher(data, Ablation::WoXrc, 3);
  TeacherTrainConfig cfg;
  cfg.stage1_epochs = 1;
  cfg.stage2_epochs = 1;
  train_teacher(t, examples, cfg);
  save_teacher(dir / "t.ckpt", t);
  const Teacher back = load_teacher(dir / "t.ckpt");
  CHECK(back.config().ablation == Ablation::WoXrc);
  CHECK(back.seed() == 3);
  CHECK(back.curves().stage1.size() == 1);
  CHECK(back.curves().stage1[0].rc == t.curves().stage1[0].rc);
  CHECK(back.m_final(data.items[1].text, examples[1].positive).value() ==
        t.m_final(data.items[1].text, examples[1].positive).value());
  CHECK(teacher_accuracy(back, examples) == teacher_accuracy(t, examples));

  TempDir other;
  write_curve_csv(other / "c.csv", t.curves().stage1);
  CHECK(read_file(other / "c.csv").rfind("epoch,rc,rxc,xrc,c,cls\n1,", 0) == 0);
}
