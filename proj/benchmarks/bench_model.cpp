// SPDX-License-Identifier: Apache-2.0
#include "nrfe/student.hpp"
#include "nrfe/synthetic.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace nrfe;

namespace {

EncoderSpec bench_spec(int width) {
  EncoderSpec spec;
  spec.width = width;
  spec.depth = 2;
  spec.heads = 2;
  spec.ff_width = 2 * width;
  spec.max_len = 64;
  return spec;
}

ad::Matrix random_rows(ad::Index rows, ad::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  ad::Matrix m(rows, cols);
  for (ad::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

struct Fixture {
  SyntheticData data = make_synthetic_corpus(16, 1);
  Teacher teacher;

  explicit Fixture(int width) : teacher(make_teacher(data, width)) {}

  static Teacher make_teacher(const SyntheticData& data, int width) {
    std::vector<std::string> news, reasoning;
    for (const auto& i : data.items) news.push_back(i.text);
    for (const auto& e : data.store) reasoning.push_back(e.reasoning_text);
    TeacherConfig cfg;
    cfg.news_encoder = cfg.reasoning_encoder = bench_spec(width);
    cfg.dropout = 0.0;
    return Teacher(cfg, Vocabulary::build(news), Vocabulary::build(reasoning), 1);
  }
};

}  // namespace

static void BM_AttentionPool(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const int d = static_cast<int>(state.range(0));
  const AttentionPool pool(d, rng);
  const SeqRep rep{ad::Tensor::constant(random_rows(state.range(1), d, rng)),
                   ad::Mask(static_cast<std::size_t>(state.range(1)), true)};
  ad::NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(pool(rep).value().data());
}
BENCHMARK(BM_AttentionPool)->Args({32, 32})->Args({128, 64})->Args({256, 128});

static void BM_TeacherFinal(benchmark::State& state) {
  const Fixture fx(static_cast<int>(state.range(0)));
  const auto& item = fx.data.items.front();
  const auto& reasoning = fx.data.store.front().reasoning_text;
  ad::NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(fx.teacher.m_final(item.text, reasoning).value().data());
}
BENCHMARK(BM_TeacherFinal)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);

static void BM_StudentForward(benchmark::State& state) {
  const Fixture fx(static_cast<int>(state.range(0)));
  const Student student = Student::from_teacher(fx.teacher, 2);
  const auto& text = fx.data.items.front().text;
  ad::NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(student.forward(text).logits.value().data());
}
BENCHMARK(BM_StudentForward)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);

static void BM_StudentBackward(benchmark::State& state) {
  const Fixture fx(32);
  const Student student = Student::from_teacher(fx.teacher, 2);
  const auto& text = fx.data.items.front().text;
  for (auto _ : state) {
    auto loss = cls_loss(student.forward(text).logits, BinaryLabel::Fake);
    loss.backward();
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_StudentBackward)->Unit(benchmark::kMicrosecond);

static void BM_ReverseKl(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const auto q = random_rows(1, state.range(0), rng);
  const auto p = random_rows(1, state.range(0), rng);
  for (auto _ : state) benchmark::DoNotOptimize(reverse_kl(q, p, 2.0));
}
BENCHMARK(BM_ReverseKl)->Arg(128)->Arg(1024);
