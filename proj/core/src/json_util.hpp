// SPDX-License-Identifier: Apache-2.0
//
// Private JSON helpers shared by the model checkpoints.
#pragma once

#include "nrfe/encoder.hpp"

#include <json.hpp>

namespace nrfe::detail {

using Json = nlohmann::ordered_json;

inline Json to_json(const EncoderSpec& spec) {
  Json j;
  j["variant"] = std::string(to_string(spec.variant));
  j["depth"] = spec.depth;
  j["width"] = spec.width;
  j["heads"] = spec.heads;
  j["ff_width"] = spec.ff_width;
  j["max_len"] = spec.max_len;
  j["vocab_hash"] = spec.vocab;
  return j;
}

inline EncoderSpec encoder_spec_from_json(const Json& j) {
  EncoderSpec spec;
  spec.variant = parse_encoder_variant(j.at("variant").get<std::string>());
  spec.depth = j.at("depth").get<int>();
  spec.width = j.at("width").get<int>();
  spec.heads = j.at("heads").get<int>();
  spec.ff_width = j.at("ff_width").get<int>();
  spec.max_len = j.at("max_len").get<int>();
  spec.vocab = j.at("vocab_hash").get<std::string>();
  return spec;
}

inline Json to_json(const Vocabulary& vocab) {
  Json tokens = Json::array();
  for (const auto& t : vocab.tokens()) tokens.push_back(t);
  return tokens;
}

inline Vocabulary vocabulary_from_json(const Json& j) {
  return Vocabulary(j.get<std::vector<std::string>>());
}

}  // namespace nrfe::detail
