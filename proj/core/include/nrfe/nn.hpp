// SPDX-License-Identifier: Apache-2.0
//
// Small layer building blocks and the Adam optimizer on top of nrfe::ad.
#pragma once

#include "nrfe/autodiff.hpp"

#include <random>
#include <string>
#include <vector>

namespace nrfe::nn {

struct NamedParam {
  std::string name;
  ad::Tensor tensor;
};

/// Ordered, named view over model parameters. Order is the serialization
/// order of checkpoints, so it must be stable for a given architecture.
class ParameterList {
 public:
  void add(std::string name, ad::Tensor tensor);
  void append(const ParameterList& other);

  const std::vector<NamedParam>& items() const noexcept { return items_; }
  std::size_t size() const noexcept { return items_.size(); }
  const ad::Tensor* find(const std::string& name) const;
  std::vector<ad::Tensor> tensors() const;
  std::size_t scalar_count() const;

 private:
  std::vector<NamedParam> items_;
};

/// Copies values from `from` to `to` by position; names and shapes must match
/// after stripping the given prefixes.
void copy_values(const ParameterList& from, const std::string& from_prefix,
                 const ParameterList& to, const std::string& to_prefix);

ad::Matrix xavier_uniform(ad::Index rows, ad::Index cols, std::mt19937_64& rng);

/// y = x W + b, x is N x in.
struct Linear {
  ad::Tensor weight;
  ad::Tensor bias;

  Linear() = default;
  Linear(ad::Index in, ad::Index out, std::mt19937_64& rng);
  ad::Tensor operator()(const ad::Tensor& x) const;
  void collect(ParameterList& out, const std::string& prefix) const;
};

struct LayerNorm {
  ad::Tensor gamma;
  ad::Tensor beta;

  LayerNorm() = default;
  explicit LayerNorm(ad::Index width);
  ad::Tensor operator()(const ad::Tensor& x) const;
  void collect(ParameterList& out, const std::string& prefix) const;
};

struct AdamOptions {
  double learning_rate = 3e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Global gradient-norm clip; 0 disables.
  double clip_norm = 0.0;
};

class Adam {
 public:
  Adam(std::vector<ad::Tensor> params, AdamOptions options);

  /// Applies one update to every parameter that received a gradient.
  void step();
  void zero_grad();
  const AdamOptions& options() const noexcept { return options_; }

 private:
  std::vector<ad::Tensor> params_;
  std::vector<ad::Matrix> first_moment_;
  std::vector<ad::Matrix> second_moment_;
  AdamOptions options_;
  long step_count_ = 0;
};

}  // namespace nrfe::nn
