// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"
#include "support/test_support.hpp"

#include "nrfe/checkpoint.hpp"
#include "nrfe/encoder.hpp"

using namespace nrfe;
using nrfe::testing::gradient_check;
using nrfe::testing::random_matrix;
using nrfe::testing::TempDir;

namespace {

EncoderSpec tiny_spec() {
  EncoderSpec s;
  s.depth = 2;
  s.width = 8;
  s.heads = 2;
  s.ff_width = 16;
  s.max_len = 6;
  return s;
}

SeqRep constant_rep(const ad::Matrix& m, ad::Mask mask = {}) {
  if (mask.empty()) mask.assign(static_cast<std::size_t>(m.rows()), true);
  return SeqRep{ad::Tensor::constant(m), std::move(mask)};
}

}  // namespace

TEST_CASE("word splitting") {
  CHECK(split_words("  Hello, WORLD!  it's (fine) -- ") ==
        std::vector<std::string>{"hello", "world", "it's", "fine"});
  CHECK(split_words("").empty());
}

TEST_CASE("vocabulary ordering and lookup") {
  const std::vector<std::string> texts{"b a c", "a b", "a d"};
  const auto vocab = Vocabulary::build(texts);
  CHECK(vocab.tokens() == std::vector<std::string>{"<pad>", "<bos>", "<unk>", "a", "b", "c", "d"});
  CHECK(vocab.id("a") == 3);
  CHECK(vocab.id("zebra") == Vocabulary::kUnk);
  CHECK(Vocabulary::build(texts, 2).size() == 5);
  CHECK(Vocabulary::build(texts).hash() == vocab.hash());
  CHECK(Vocabulary::build(std::vector<std::string>{"x"}).hash() != vocab.hash());
}

TEST_CASE("tokenization") {
  const auto vocab = Vocabulary::build(std::vector<std::string>{"one two three"});
  const auto t = tokenize("One two FOUR three five", vocab, 4);
  CHECK(t.ids == std::vector<int>{Vocabulary::kBos, vocab.id("one"), vocab.id("two"), Vocabulary::kUnk});
  CHECK(t.mask.size() == 4);
  CHECK(tokenize("", vocab, 4).ids == std::vector<int>{Vocabulary::kBos});
}

TEST_CASE("spec validation") {
  auto s = tiny_spec();
  CHECK_NOTHROW(validate(s));
  s.heads = 3;
  CHECK_THROWS_AS(validate(s), InvalidArgument);
  s = tiny_spec();
  s.variant = EncoderVariant::PretrainedBidirectional;
  CHECK_THROWS_AS(validate(s), InvalidArgument);
  CHECK(parse_encoder_variant("tiny_trainable") == EncoderVariant::TinyTrainable);
  CHECK(parse_encoder_variant(to_string(EncoderVariant::PretrainedBidirectional)) ==
        EncoderVariant::PretrainedBidirectional);
}

TEST_CASE("encoder output shape, determinism and input checks") {
  std::mt19937_64 r1(9), r2(9);
  TextEncoder a(tiny_spec(), 20, r1), b(tiny_spec(), 20, r2);
  TokenSequence seq{{1, 5, 7, 19}, {true, true, true, true}};
  const auto out = a.encode(seq);
  CHECK(out.length() == 4);
  CHECK(out.width() == 8);
  CHECK(out.matrix.value() == b.encode(seq).matrix.value());
  CHECK_THROWS_AS(a.encode(TokenSequence{{1, 20}, {true, true}}), InvalidArgument);
  CHECK_THROWS_AS(a.encode(TokenSequence{std::vector<int>(7, 1), ad::Mask(7, true)}),
                  InvalidArgument);
  CHECK_THROWS_AS(a.encode(TokenSequence{{1, 2}, {true}}), InvalidArgument);
}

TEST_CASE("attention ignores masked keys entirely") {
  std::mt19937_64 rng(4);
  const auto q = ad::Tensor::constant(random_matrix(2, 4, rng));
  ad::Matrix kv = random_matrix(3, 4, rng);
  const auto wq = ad::Tensor::constant(random_matrix(4, 4, rng));
  const auto wk = ad::Tensor::constant(random_matrix(4, 4, rng));
  const auto wv = ad::Tensor::constant(random_matrix(4, 4, rng));
  const ad::Mask mask{true, false, true};
  std::vector<ad::Matrix> weights;
  const auto y1 = multi_head_attention(q, ad::Tensor::constant(kv), wq, wk, wv, 2, mask, &weights);
  REQUIRE(weights.size() == 2);
  for (const auto& w : weights) {
    CHECK(w.col(1).cwiseAbs().maxCoeff() == 0.0);
    CHECK((w.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  }
  kv.row(1).setConstant(1e3);
  const auto y2 = multi_head_attention(q, ad::Tensor::constant(kv), wq, wk, wv, 2, mask);
  CHECK((y1.value() - y2.value()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("attention pooling matches the reference values") {
  ad::Matrix H(3, 2), W(2, 2), v(2, 1);
  H << 1, 0, 0, 1, 1, 1;
  W << 0.5, -0.25, 1.0, 0.75;
  v << 2, -1;
  AttentionPool pool(W, v);
  const auto rep = constant_rep(H);
  const auto w = pool.weights(rep).value();
  CHECK(w(0, 0) == doctest::Approx(0.5503546383616484).epsilon(1e-13));
  CHECK(w(0, 1) == doctest::Approx(0.15185656616704327).epsilon(1e-13));
  CHECK(w(0, 2) == doctest::Approx(0.29778879547130827).epsilon(1e-13));
  const auto pooled = pool(rep).value();
  CHECK(pooled(0, 0) == doctest::Approx(0.8481434338329568).epsilon(1e-13));
  CHECK(pooled(0, 1) == doctest::Approx(0.44964536163835156).epsilon(1e-13));
}

TEST_CASE("pooling properties") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    AttentionPool pool(6, rng);
    const ad::Matrix H = random_matrix(5, 6, rng);
    ad::Mask mask{true, true, false, true, false};
    const auto rep = constant_rep(H, mask);
    const auto w = pool.weights(rep).value();
    CHECK(w(0, 2) == 0.0);
    CHECK(w(0, 4) == 0.0);
    CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(w.minCoeff() >= 0.0);
    // The pooled vector is a convex combination: it lies in the per-column hull.
    const auto p = pool(rep).value();
    for (int c = 0; c < 6; ++c) {
      double lo = 1e300, hi = -1e300;
      for (int r : {0, 1, 3}) {
        lo = std::min(lo, H(r, c));
        hi = std::max(hi, H(r, c));
      }
      CHECK(p(0, c) >= lo - 1e-12);
      CHECK(p(0, c) <= hi + 1e-12);
    }
  }
  AttentionPool pool(3, rng);
  CHECK_THROWS_AS(pool(constant_rep(ad::Matrix::Ones(2, 3), {false, false})), InvalidArgument);
  CHECK_THROWS_AS(pool(constant_rep(ad::Matrix::Ones(2, 4))), InvalidArgument);
}

TEST_CASE("pooling gradient check") {
  std::mt19937_64 rng(8);
  AttentionPool pool(5, rng);
  auto H = ad::Tensor::variable(random_matrix(4, 5, rng));
  const ad::Matrix probe = random_matrix(1, 5, rng);
  nn::ParameterList params;
  pool.collect(params, "pool");
  auto tensors = params.tensors();
  tensors.push_back(H);
  const double err = gradient_check(
      [&] {
        const auto p = pool(SeqRep{H, {true, true, false, true}});
        return ad::sum(ad::hadamard(p, ad::Tensor::constant(probe)));
      },
      tensors);
  CHECK(err < 1e-6);
}

TEST_CASE("encoder gradient check through every layer") {
  std::mt19937_64 rng(31);
  auto spec = tiny_spec();
  spec.width = 4;
  spec.ff_width = 6;
  TextEncoder enc(spec, 7, rng);
  nn::ParameterList params;
  enc.collect(params, "e");
  const ad::Matrix probe = random_matrix(3, 4, rng);
  const TokenSequence seq{{1, 4, 6}, {true, true, true}};
  const double err = gradient_check(
      [&] { return ad::sum(ad::hadamard(enc.encode(seq).matrix, ad::Tensor::constant(probe))); },
      params.tensors());
  CHECK(err < 1e-5);
}

TEST_CASE("encoder checkpoint round trip") {
  TempDir dir;
  std::mt19937_64 rng(2);
  const auto vocab = Vocabulary::build(std::vector<std::string>{"alpha beta gamma"});
  TextEncoder enc(tiny_spec(), vocab.size(), rng);
  save_encoder(dir / "enc.ckpt", enc, vocab);
  const auto loaded = load_encoder(dir / "enc.ckpt");
  CHECK(loaded.vocab.tokens() == vocab.tokens());
  CHECK(loaded.encoder.spec().vocab == hex64(vocab.hash()));
  const auto seq = tokenize("beta alpha", vocab, 6);
  CHECK(loaded.encoder.encode(seq).matrix.value() == enc.encode(seq).matrix.value());
}
