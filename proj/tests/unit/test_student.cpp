// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"
#include "support/models.hpp"
#include "support/test_support.hpp"

#include "nrfe/harness.hpp"
#include "nrfe/student.hpp"

#include <cmath>
#include <limits>

using namespace nrfe;
using namespace nrfe::testing;

namespace {

ad::Matrix row(std::initializer_list<double> v) {
  ad::Matrix m(1, static_cast<ad::Index>(v.size()));
  ad::Index i = 0;
  for (double x : v) m(0, i++) = x;
  return m;
}

std::map<std::string, std::string> positives(const SyntheticData& data) {
  return positive_reasoning(data.store);
}

}  // namespace

TEST_CASE("reverse KL reference values") {
  CHECK(std::abs(reverse_kl(row({0.4, -2, 7}), row({0.4, -2, 7}), 1.0)) < 1e-12);
  CHECK(reverse_kl(row({40, -40}), row({0, 0}), 1.0) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(reverse_kl(row({2, 0}), row({0, 0}), 1.0) ==
        doctest::Approx(0.32781332547273756).epsilon(1e-13));
  CHECK(reverse_kl(row({0, 0}), row({2, 0}), 1.0) ==
        doctest::Approx(0.4337808304830273).epsilon(1e-13));
  // Temperature rescales the logits.
  CHECK(reverse_kl(row({4, 0}), row({0, 0}), 2.0) ==
        doctest::Approx(0.32781332547273756).epsilon(1e-13));
  // Huge logits stay finite.
  CHECK(std::isfinite(reverse_kl(row({1e4, -1e4}), row({-1e4, 1e4}), 1.0)));
}

TEST_CASE("reverse KL input validation") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(reverse_kl(row({1, nan}), row({0, 0}), 1.0), InvalidArgument);
  CHECK_THROWS_AS(reverse_kl(row({1, 0}), row({0, 0}), 0.0), InvalidArgument);
  CHECK_THROWS_AS(reverse_kl(row({1, 0}), row({0, 0}), -1.0), InvalidArgument);
  CHECK_THROWS_AS(reverse_kl(row({1}), row({0}), 1.0), InvalidArgument);
  CHECK_THROWS_AS(reverse_kl(row({1, 0}), row({0, 0, 0}), 1.0), InvalidArgument);
}

TEST_CASE("reverse KL properties") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 300; ++i) {
    const ad::Matrix q = random_matrix(1, 8, rng, 3.0), p = random_matrix(1, 8, rng, 3.0);
    const double tau = 0.5 + (i % 4);
    const double kl = reverse_kl(q, p, tau);
    CHECK(kl >= -1e-15);
    // Shift invariance of both softmaxes.
    const ad::Matrix q_shift = (q.array() + 5.0).matrix();
    CHECK(reverse_kl(q_shift, p, tau) == doctest::Approx(kl).epsilon(1e-9));
    const auto t = reverse_kl(ad::Tensor::constant(q), ad::Tensor::constant(p), tau);
    CHECK(t.item() == doctest::Approx(kl).epsilon(1e-12));
  }
}

TEST_CASE("gradient check: reverse KL") {
  std::mt19937_64 rng(4);
  auto q = ad::Tensor::variable(random_matrix(1, 8, rng));
  auto p = ad::Tensor::variable(random_matrix(1, 8, rng));
  for (double tau : {1.0, 2.5}) {
    CHECK(gradient_check([&] { return reverse_kl(q, p, tau); }, {q, p}) < 1e-6);
  }
}

TEST_CASE("student inherits the teacher's news path") {
  const auto data = make_synthetic_corpus(12, 1);
  const Teacher t = small_teacher(data);
  const Student s = Student::from_teacher(t, 42);
  const auto out = s.forward(data.items[0].text);
  const auto f_x = t.pool_news(t.encode_news(data.items[0].text));
  CHECK(out.f_prime_x.value() == f_x.value());
  CHECK(out.f_prime_final.cols() == 4 * t.width());
  CHECK(out.logits.cols() == 2);
  CHECK(s.vocab().tokens() == t.news_vocab().tokens());
  CHECK(s.seed() == 42);

  const Student s2 = Student::from_teacher(t, 43);
  CHECK(values_of(s2.fresh_parameters()) != values_of(s.fresh_parameters()));
  CHECK(same_values(s2.inherited_parameters(), values_of(s.inherited_parameters())));
}

TEST_CASE("student checkpoint round trip") {
  TempDir dir;
  const auto data = make_synthetic_corpus(8, 1);
  const Teacher t = small_teacher(data);
  const Student s = Student::from_teacher(t, 5);
  save_student(dir / "s.ckpt", s);
  const Student back = load_student(dir / "s.ckpt");
  CHECK(back.forward(data.items[3].text).logits.value() ==
        s.forward(data.items[3].text).logits.value());
  CHECK(back.encoder_spec() == s.encoder_spec());
  CHECK(back.dropout() == s.dropout());
  save_teacher(dir / "t.ckpt", t);
  CHECK_THROWS_AS(load_student(dir / "t.ckpt"), FormatError);
}

TEST_CASE("targets: computation, missing ids and cache") {
  TempDir dir;
  const auto data = make_synthetic_corpus(10, 2);
  const Teacher t = small_teacher(data);
  auto pos = positives(data);
  pos.erase(data.items[2].id);
  const auto targets = compute_targets(t, data.items, pos, 2.0);
  CHECK(targets.by_id.size() == 9);
  CHECK(targets.missing == std::vector<std::string>{data.items[2].id});
  CHECK(targets.by_id.at(data.items[0].id) ==
        t.m_final(data.items[0].text, pos.at(data.items[0].id)).value());

  save_targets(dir / "cache", targets, "k1");
  const auto hit = load_targets(dir / "cache", "k1");
  REQUIRE(hit.has_value());
  CHECK(hit->temperature == 2.0);
  CHECK(hit->missing == targets.missing);
  CHECK(hit->by_id == targets.by_id);
  CHECK_FALSE(load_targets(dir / "cache", "k2").has_value());
  CHECK_FALSE(load_targets(dir / "absent", "k1").has_value());

  write_file(dir / "a.bin", "abc");
  write_file(dir / "b.bin", "abd");
  const auto k = target_cache_key(dir / "a.bin", dir / "a.bin", 1.0);
  CHECK(k == target_cache_key(dir / "a.bin", dir / "a.bin", 1.0));
  CHECK(k != target_cache_key(dir / "a.bin", dir / "b.bin", 1.0));
  CHECK(k != target_cache_key(dir / "b.bin", dir / "a.bin", 1.0));
  CHECK(k != target_cache_key(dir / "a.bin", dir / "a.bin", 1.5));
}

TEST_CASE("distillation loss composition") {
  const auto data = make_synthetic_corpus(6, 3);
  const Teacher t = small_teacher(data);
  const Student s = Student::from_teacher(t, 1);
  auto pos = positives(data);
  pos.erase(data.items[1].id);
  const auto targets = compute_targets(t, data.items, pos, 1.0);

  std::vector<StudentOutputs> outs;
  std::vector<std::string> ids;
  std::vector<BinaryLabel> labels;
  for (int i = 0; i < 3; ++i) {
    outs.push_back(s.forward(data.items[i].text));
    ids.push_back(data.items[i].id);
    labels.push_back(data.items[i].label);
  }
  const auto l = distill_losses(outs, ids, labels, targets, DistillWeights{0.3, 2.0});
  CHECK(l.l_d.item() == doctest::Approx(0.3 * l.l_dis.item() + 2.0 * l.l_cls.item()));

  // The item without a target contributes to l_cls only.
  const double kl0 = reverse_kl(outs[0].f_prime_final.value(), targets.by_id.at(ids[0]), 1.0);
  const double kl2 = reverse_kl(outs[2].f_prime_final.value(), targets.by_id.at(ids[2]), 1.0);
  CHECK(l.l_dis.item() == doctest::Approx((kl0 + kl2) / 2).epsilon(1e-12));
  double ce = 0;
  for (int i = 0; i < 3; ++i) ce += cross_entropy(outs[i].logits.value(), labels[i]);
  CHECK(l.l_cls.item() == doctest::Approx(ce / 3).epsilon(1e-12));

  DistillTargets strict = targets;
  strict.missing.clear();
  CHECK_THROWS_AS(distill_losses(outs, ids, labels, strict), InvalidArgument);

  // Batch-averaged target of a single item equals the per-item target.
  std::vector<StudentOutputs> one{outs[0]};
  std::vector<std::string> one_id{ids[0]};
  std::vector<BinaryLabel> one_label{labels[0]};
  CHECK(distill_losses(one, one_id, one_label, targets, {}, true).l_dis.item() ==
        doctest::Approx(distill_losses(one, one_id, one_label, targets).l_dis.item())
            .epsilon(1e-10));
}

TEST_CASE("student training: curve shape and frozen inheritance") {
  const auto data = make_synthetic_corpus(16, 4);
  const Teacher t = small_teacher(data);
  const auto targets = compute_targets(t, data.items, positives(data), 1.0);
  Student s = Student::from_teacher(t, 2);
  const auto inherited = values_of(s.inherited_parameters());
  const auto fresh = values_of(s.fresh_parameters());
  StudentTrainConfig cfg;
  cfg.epochs = 3;
  cfg.freeze_inherited = true;
  cfg.adam.learning_rate = 1e-2;
  const auto curve = train_student(s, data.items, targets, cfg);
  REQUIRE(curve.size() == 4);
  CHECK(curve[0].epoch == 0);
  CHECK(curve[3].epoch == 3);
  for (const auto& r : curve) CHECK(r.total == doctest::Approx(r.dis + r.cls));
  CHECK(same_values(s.inherited_parameters(), inherited));
  CHECK_FALSE(same_values(s.fresh_parameters(), fresh));

  Student u = Student::from_teacher(t, 2);
  cfg.freeze_inherited = false;
  train_student(u, data.items, targets, cfg);
  CHECK_FALSE(same_values(u.inherited_parameters(), inherited));

  TempDir dir;
  write_student_curve_csv(dir / "s.csv", curve);
  CHECK(read_file(dir / "s.csv").rfind("epoch,dis,cls,total\n0,", 0) == 0);
}
