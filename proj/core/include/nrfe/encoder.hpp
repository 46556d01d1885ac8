// SPDX-License-Identifier: Apache-2.0
//
// Text -> token ids -> sequential representation -> pooled global vector.
#pragma once

#include "nrfe/autodiff.hpp"
#include "nrfe/nn.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace nrfe {

enum class EncoderVariant { PretrainedBidirectional, TinyTrainable };
std::string_view to_string(EncoderVariant variant);
EncoderVariant parse_encoder_variant(std::string_view text);

struct EncoderSpec {
  EncoderVariant variant = EncoderVariant::TinyTrainable;
  int depth = 2;
  int width = 32;
  int heads = 2;
  int ff_width = 64;
  int max_len = 64;
  /// Tokenizer identifier; for the tiny variant the vocabulary hash.
  std::string vocab;

  bool operator==(const EncoderSpec&) const = default;
};

void validate(const EncoderSpec& spec);

/// Lowercased whitespace tokens with surrounding ASCII punctuation removed.
std::vector<std::string> split_words(std::string_view text);

/// Corpus-built vocabulary. Ids 0..2 are reserved for <pad>, <bos>, <unk>.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kUnk = 2;

  Vocabulary();
  explicit Vocabulary(std::vector<std::string> tokens);
  /// Words sorted by descending count, then lexicographically.
  static Vocabulary build(std::span<const std::string> texts, int min_count = 1);

  int id(std::string_view word) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  std::uint64_t hash() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct TokenSequence {
  std::vector<int> ids;
  ad::Mask mask;

  std::size_t size() const noexcept { return ids.size(); }
};

/// <bos> followed by word ids, truncated to max_len; never empty.
TokenSequence tokenize(std::string_view text, const Vocabulary& vocab, int max_len);

/// L x d sequence with per-position validity.
struct SeqRep {
  ad::Tensor matrix;
  ad::Mask mask;

  ad::Index length() const { return matrix.rows(); }
  ad::Index width() const { return matrix.cols(); }
};

/// Scaled dot-product attention of `queries` over `keys_values`, with
/// learned projections and `heads` equal slices of the width.
/// Returns the L_q x d output; per-head L_q x L_kv weights are appended to
/// `weights_out` when non-null.
ad::Tensor multi_head_attention(const ad::Tensor& queries, const ad::Tensor& keys_values,
                                const ad::Tensor& w_query, const ad::Tensor& w_key,
                                const ad::Tensor& w_value, int heads, const ad::Mask& key_mask,
                                std::vector<ad::Matrix>* weights_out = nullptr);

/// Pre-norm transformer encoder with learned positions (tiny_trainable).
class TextEncoder {
 public:
  TextEncoder(EncoderSpec spec, std::size_t vocab_size, std::mt19937_64& rng);

  /// Throws InvalidArgument on an id outside the vocabulary or an over-long
  /// sequence.
  SeqRep encode(const TokenSequence& tokens) const;

  void collect(nn::ParameterList& out, const std::string& prefix) const;
  const EncoderSpec& spec() const noexcept { return spec_; }
  std::size_t vocab_size() const noexcept { return vocab_size_; }

 private:
  struct Layer {
    nn::LayerNorm attn_norm;
    ad::Tensor w_query, w_key, w_value;
    nn::Linear attn_out;
    nn::LayerNorm ff_norm;
    nn::Linear ff_in;
    nn::Linear ff_out;
  };

  EncoderSpec spec_;
  std::size_t vocab_size_;
  ad::Tensor token_embedding_;
  ad::Tensor position_embedding_;
  std::vector<Layer> layers_;
  nn::LayerNorm final_norm_;
};

/// Additive attention pooling: s_i = v^T tanh(W h_i), w = masked softmax(s),
/// pooled = sum_i w_i h_i. Output is 1 x d.
class AttentionPool {
 public:
  AttentionPool() = default;
  AttentionPool(int width, std::mt19937_64& rng);
  /// W is d x d, v is d x 1.
  AttentionPool(ad::Matrix w, ad::Matrix v);

  ad::Tensor operator()(const SeqRep& rep) const;
  /// 1 x L pooling weights; masked positions are exactly 0.
  ad::Tensor weights(const SeqRep& rep) const;

  void collect(nn::ParameterList& out, const std::string& prefix) const;

 private:
  ad::Tensor w_;
  ad::Tensor v_;
};

/// Encoder checkpoint: spec + vocabulary + parameters in the shared container.
struct LoadedEncoder {
  Vocabulary vocab;
  TextEncoder encoder;
};

void save_encoder(const std::filesystem::path& path, const TextEncoder& encoder,
                  const Vocabulary& vocab);
LoadedEncoder load_encoder(const std::filesystem::path& path);

}  // namespace nrfe
