// SPDX-License-Identifier: Apache-2.0
//
// Small model fixtures for tests.
#pragma once

#include "nrfe/synthetic.hpp"
#include "nrfe/teacher.hpp"

#include <string>
#include <vector>

namespace nrfe::testing {

inline EncoderSpec small_encoder(int width = 8, int depth = 1) {
  EncoderSpec s;
  s.depth = depth;
  s.width = width;
  s.heads = 2;
  s.ff_width = 2 * width;
  s.max_len = 32;
  return s;
}

inline TeacherConfig small_teacher_config(Ablation ablation = Ablation::Full, int width = 8) {
  TeacherConfig c;
  c.news_encoder = small_encoder(width);
  c.reasoning_encoder = small_encoder(width);
  c.classifier_hidden = 16;
  c.dropout = 0.0;
  c.ablation = ablation;
  return c;
}

inline std::vector<std::string> texts_of(const SyntheticData& data) {
  std::vector<std::string> out;
  for (const auto& i : data.items) out.push_back(i.text);
  return out;
}

inline std::vector<std::string> reasoning_texts_of(const SyntheticData& data) {
  std::vector<std::string> out;
  for (const auto& e : data.store) out.push_back(e.reasoning_text);
  return out;
}

inline Teacher small_teacher(const SyntheticData& data, Ablation ablation = Ablation::Full,
                             std::uint64_t seed = 1, int width = 8) {
  const auto news = texts_of(data);
  const auto reasoning = reasoning_texts_of(data);
  return Teacher(small_teacher_config(ablation, width), Vocabulary::build(news),
                 Vocabulary::build(reasoning), seed);
}

inline bool same_values(const nn::ParameterList& a, const std::vector<ad::Matrix>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (a.items()[i].tensor.value() != b[i]) return false;
  }
  return true;
}

inline std::vector<ad::Matrix> values_of(const nn::ParameterList& params) {
  std::vector<ad::Matrix> out;
  for (const auto& p : params.items()) out.push_back(p.tensor.value());
  return out;
}

}  // namespace nrfe::testing
