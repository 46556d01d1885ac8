// SPDX-License-Identifier: Apache-2.0
#include "nrfe/encoder.hpp"

#include "json_util.hpp"
#include "nrfe/checkpoint.hpp"
#include "nrfe/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

namespace nrfe {

std::string_view to_string(EncoderVariant variant) {
  return variant == EncoderVariant::TinyTrainable ? "tiny_trainable" : "pretrained_bidirectional";
}

EncoderVariant parse_encoder_variant(std::string_view text) {
  if (text == "tiny_trainable") return EncoderVariant::TinyTrainable;
  if (text == "pretrained_bidirectional") return EncoderVariant::PretrainedBidirectional;
  throw InvalidArgument("unknown encoder variant '" + std::string(text) + "'");
}

void validate(const EncoderSpec& spec) {
  if (spec.variant == EncoderVariant::PretrainedBidirectional) {
    throw InvalidArgument(
        "pretrained_bidirectional encoders need externally supplied weights, which this "
        "build does not bundle; use tiny_trainable");
  }
  if (spec.depth < 0) throw InvalidArgument("encoder depth must be >= 0");
  if (spec.width < 1) throw InvalidArgument("encoder width must be positive");
  if (spec.heads < 1 || spec.width % spec.heads != 0) {
    throw InvalidArgument("encoder heads must divide the width");
  }
  if (spec.ff_width < 1) throw InvalidArgument("encoder ff_width must be positive");
  if (spec.max_len < 1) throw InvalidArgument("encoder max_len must be positive");
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    std::size_t b = 0;
    std::size_t e = current.size();
    while (b < e && std::ispunct(static_cast<unsigned char>(current[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(current[e - 1]))) --e;
    if (e > b) words.push_back(current.substr(b, e - b));
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else {
      current.push_back(c < 128 ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  flush();
  return words;
}

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{"<pad>", "<bos>", "<unk>"}) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < 3 || tokens_[0] != "<pad>" || tokens_[1] != "<bos>" ||
      tokens_[2] != "<unk>") {
    throw InvalidArgument("vocabulary must start with <pad>, <bos>, <unk>");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw InvalidArgument("duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
}

Vocabulary Vocabulary::build(std::span<const std::string> texts, int min_count) {
  std::map<std::string, int> counts;
  for (const auto& text : texts) {
    for (auto& w : split_words(text)) ++counts[std::move(w)];
  }
  std::vector<std::pair<std::string, int>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens{"<pad>", "<bos>", "<unk>"};
  for (auto& [word, count] : ranked) {
    if (count >= min_count && word != "<pad>" && word != "<bos>" && word != "<unk>") {
      tokens.push_back(word);
    }
  }
  return Vocabulary(std::move(tokens));
}

int Vocabulary::id(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnk : it->second;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = fnv1a64("");
  for (const auto& t : tokens_) {
    h = fnv1a64(t, h);
    h = fnv1a64("\n", h);
  }
  return h;
}

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab, int max_len) {
  if (max_len < 1) throw InvalidArgument("max_len must be positive");
  TokenSequence seq;
  seq.ids.push_back(Vocabulary::kBos);
  for (const auto& w : split_words(text)) {
    if (static_cast<int>(seq.ids.size()) >= max_len) break;
    seq.ids.push_back(vocab.id(w));
  }
  seq.mask.assign(seq.ids.size(), true);
  return seq;
}

ad::Tensor multi_head_attention(const ad::Tensor& queries, const ad::Tensor& keys_values,
                                const ad::Tensor& w_query, const ad::Tensor& w_key,
                                const ad::Tensor& w_value, int heads, const ad::Mask& key_mask,
                                std::vector<ad::Matrix>* weights_out) {
  const ad::Index width = w_query.cols();
  if (heads < 1 || width % heads != 0) throw InvalidArgument("heads must divide the width");
  const ad::Tensor q = ad::matmul(queries, w_query);
  const ad::Tensor k = ad::matmul(keys_values, w_key);
  const ad::Tensor v = ad::matmul(keys_values, w_value);
  const ad::Index head_width = width / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_width));

  std::vector<ad::Tensor> outputs;
  outputs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    const ad::Tensor qh = heads == 1 ? q : ad::slice_cols(q, h * head_width, head_width);
    const ad::Tensor kh = heads == 1 ? k : ad::slice_cols(k, h * head_width, head_width);
    const ad::Tensor vh = heads == 1 ? v : ad::slice_cols(v, h * head_width, head_width);
    const ad::Tensor scores = ad::scale(ad::matmul(qh, ad::transpose(kh)), scale);
    const ad::Tensor weights = ad::softmax_rows(scores, key_mask);
    if (weights_out) weights_out->push_back(weights.value());
    outputs.push_back(ad::matmul(weights, vh));
  }
  return heads == 1 ? outputs.front() : ad::concat_cols(outputs);
}

TextEncoder::TextEncoder(EncoderSpec spec, std::size_t vocab_size, std::mt19937_64& rng)
    : spec_(std::move(spec)), vocab_size_(vocab_size) {
  validate(spec_);
  if (vocab_size_ < 3) throw InvalidArgument("vocabulary too small");
  const ad::Index d = spec_.width;
  token_embedding_ =
      ad::Tensor::variable(nn::xavier_uniform(static_cast<ad::Index>(vocab_size_), d, rng));
  position_embedding_ = ad::Tensor::variable(nn::xavier_uniform(spec_.max_len, d, rng));
  for (int l = 0; l < spec_.depth; ++l) {
    Layer layer;
    layer.attn_norm = nn::LayerNorm(d);
    layer.w_query = ad::Tensor::variable(nn::xavier_uniform(d, d, rng));
    layer.w_key = ad::Tensor::variable(nn::xavier_uniform(d, d, rng));
    layer.w_value = ad::Tensor::variable(nn::xavier_uniform(d, d, rng));
    layer.attn_out = nn::Linear(d, d, rng);
    layer.ff_norm = nn::LayerNorm(d);
    layer.ff_in = nn::Linear(d, spec_.ff_width, rng);
    layer.ff_out = nn::Linear(spec_.ff_width, d, rng);
    layers_.push_back(std::move(layer));
  }
  final_norm_ = nn::LayerNorm(d);
}

SeqRep TextEncoder::encode(const TokenSequence& tokens) const {
  if (tokens.ids.empty()) throw InvalidArgument("cannot encode an empty token sequence");
  if (static_cast<int>(tokens.ids.size()) > spec_.max_len) {
    throw InvalidArgument("token sequence longer than max_len");
  }
  for (int id : tokens.ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size_) {
      throw InvalidArgument("token id " + std::to_string(id) + " outside the vocabulary");
    }
  }
  if (!tokens.mask.empty() && tokens.mask.size() != tokens.ids.size()) {
    throw InvalidArgument("token mask length differs from id count");
  }

  std::vector<int> positions(tokens.ids.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i);
  ad::Tensor h = ad::gather_rows(token_embedding_, tokens.ids) +
                 ad::gather_rows(position_embedding_, positions);
  for (const Layer& layer : layers_) {
    const ad::Tensor a = layer.attn_norm(h);
    const ad::Tensor attended = multi_head_attention(a, a, layer.w_query, layer.w_key,
                                                     layer.w_value, spec_.heads, tokens.mask);
    h = h + layer.attn_out(attended);
    const ad::Tensor b = layer.ff_norm(h);
    h = h + layer.ff_out(ad::relu(layer.ff_in(b)));
  }
  SeqRep rep;
  rep.matrix = final_norm_(h);
  rep.mask = tokens.mask.empty() ? ad::Mask(tokens.ids.size(), true) : tokens.mask;
  return rep;
}

void TextEncoder::collect(nn::ParameterList& out, const std::string& prefix) const {
  out.add(prefix + ".token_embedding", token_embedding_);
  out.add(prefix + ".position_embedding", position_embedding_);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    const std::string p = prefix + ".layer" + std::to_string(l);
    layer.attn_norm.collect(out, p + ".attn_norm");
    out.add(p + ".w_query", layer.w_query);
    out.add(p + ".w_key", layer.w_key);
    out.add(p + ".w_value", layer.w_value);
    layer.attn_out.collect(out, p + ".attn_out");
    layer.ff_norm.collect(out, p + ".ff_norm");
    layer.ff_in.collect(out, p + ".ff_in");
    layer.ff_out.collect(out, p + ".ff_out");
  }
  final_norm_.collect(out, prefix + ".final_norm");
}

AttentionPool::AttentionPool(int width, std::mt19937_64& rng)
    : w_(ad::Tensor::variable(nn::xavier_uniform(width, width, rng))),
      v_(ad::Tensor::variable(nn::xavier_uniform(width, 1, rng))) {}

AttentionPool::AttentionPool(ad::Matrix w, ad::Matrix v)
    : w_(ad::Tensor::variable(std::move(w))), v_(ad::Tensor::variable(std::move(v))) {
  if (w_.rows() != w_.cols() || v_.rows() != w_.rows() || v_.cols() != 1) {
    throw InvalidArgument("attention pool expects W: d x d and v: d x 1");
  }
}

ad::Tensor AttentionPool::weights(const SeqRep& rep) const {
  if (rep.width() != w_.rows()) throw InvalidArgument("attention pool width mismatch");
  if (!rep.mask.empty() &&
      std::none_of(rep.mask.begin(), rep.mask.end(), [](bool b) { return b; })) {
    throw InvalidArgument("attention pool over an all-masked sequence");
  }
  // scores (L x 1) = tanh(H W^T) v
  const ad::Tensor scores = ad::matmul(ad::tanh(ad::matmul(rep.matrix, ad::transpose(w_))), v_);
  return ad::softmax_rows(ad::transpose(scores), rep.mask);
}

ad::Tensor AttentionPool::operator()(const SeqRep& rep) const {
  return ad::matmul(weights(rep), rep.matrix);
}

void AttentionPool::collect(nn::ParameterList& out, const std::string& prefix) const {
  out.add(prefix + ".w", w_);
  out.add(prefix + ".v", v_);
}

void save_encoder(const std::filesystem::path& path, const TextEncoder& encoder,
                  const Vocabulary& vocab) {
  detail::Json meta;
  EncoderSpec spec = encoder.spec();
  spec.vocab = hex64(vocab.hash());
  meta["spec"] = detail::to_json(spec);
  meta["vocab"] = detail::to_json(vocab);
  nn::ParameterList params;
  encoder.collect(params, "encoder");
  write_checkpoint(path, CheckpointData{"encoder", meta.dump(), snapshot(params)});
}

LoadedEncoder load_encoder(const std::filesystem::path& path) {
  const CheckpointData data = read_checkpoint(path);
  if (data.kind != "encoder") throw FormatError("not an encoder checkpoint: " + path.string());
  const auto meta = detail::Json::parse(data.meta_json);
  Vocabulary vocab = detail::vocabulary_from_json(meta.at("vocab"));
  EncoderSpec spec = detail::encoder_spec_from_json(meta.at("spec"));
  if (spec.vocab != hex64(vocab.hash())) {
    throw FormatError("encoder checkpoint vocabulary hash mismatch");
  }
  std::mt19937_64 rng(0);
  TextEncoder encoder(spec, vocab.size(), rng);
  nn::ParameterList params;
  encoder.collect(params, "encoder");
  load_parameters(data, params);
  return LoadedEncoder{std::move(vocab), std::move(encoder)};
}

}  // namespace nrfe
