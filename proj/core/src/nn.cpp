// SPDX-License-Identifier: Apache-2.0
#include "nrfe/nn.hpp"

#include "nrfe/error.hpp"

#include <cmath>

namespace nrfe::nn {

void ParameterList::add(std::string name, ad::Tensor tensor) {
  items_.push_back({std::move(name), std::move(tensor)});
}

void ParameterList::append(const ParameterList& other) {
  items_.insert(items_.end(), other.items_.begin(), other.items_.end());
}

const ad::Tensor* ParameterList::find(const std::string& name) const {
  for (const auto& p : items_) {
    if (p.name == name) return &p.tensor;
  }
  return nullptr;
}

std::vector<ad::Tensor> ParameterList::tensors() const {
  std::vector<ad::Tensor> out;
  out.reserve(items_.size());
  for (const auto& p : items_) out.push_back(p.tensor);
  return out;
}

std::size_t ParameterList::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : items_) n += static_cast<std::size_t>(p.tensor.value().size());
  return n;
}

void copy_values(const ParameterList& from, const std::string& from_prefix,
                 const ParameterList& to, const std::string& to_prefix) {
  if (from.size() != to.size()) {
    throw InvalidArgument("copy_values: parameter counts differ");
  }
  for (std::size_t i = 0; i < from.size(); ++i) {
    const auto& src = from.items()[i];
    const auto& dst = to.items()[i];
    const std::string a = src.name.substr(std::min(from_prefix.size(), src.name.size()));
    const std::string b = dst.name.substr(std::min(to_prefix.size(), dst.name.size()));
    if (a != b) throw InvalidArgument("copy_values: name mismatch " + src.name + " vs " + dst.name);
    if (src.tensor.rows() != dst.tensor.rows() || src.tensor.cols() != dst.tensor.cols()) {
      throw InvalidArgument("copy_values: shape mismatch for " + src.name);
    }
    auto target = dst.tensor;
    target.mutable_value() = src.tensor.value();
  }
}

ad::Matrix xavier_uniform(ad::Index rows, ad::Index cols, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  ad::Matrix m(rows, cols);
  for (ad::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Linear::Linear(ad::Index in, ad::Index out, std::mt19937_64& rng)
    : weight(ad::Tensor::variable(xavier_uniform(in, out, rng))),
      bias(ad::Tensor::variable(ad::Matrix::Zero(1, out))) {}

ad::Tensor Linear::operator()(const ad::Tensor& x) const {
  return ad::add_row(ad::matmul(x, weight), bias);
}

void Linear::collect(ParameterList& out, const std::string& prefix) const {
  out.add(prefix + ".weight", weight);
  out.add(prefix + ".bias", bias);
}

LayerNorm::LayerNorm(ad::Index width)
    : gamma(ad::Tensor::variable(ad::Matrix::Ones(1, width))),
      beta(ad::Tensor::variable(ad::Matrix::Zero(1, width))) {}

ad::Tensor LayerNorm::operator()(const ad::Tensor& x) const {
  return ad::layer_norm_rows(x, gamma, beta);
}

void LayerNorm::collect(ParameterList& out, const std::string& prefix) const {
  out.add(prefix + ".gamma", gamma);
  out.add(prefix + ".beta", beta);
}

Adam::Adam(std::vector<ad::Tensor> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  first_moment_.reserve(params_.size());
  second_moment_.reserve(params_.size());
  for (const auto& p : params_) {
    first_moment_.push_back(ad::Matrix::Zero(p.rows(), p.cols()));
    second_moment_.push_back(ad::Matrix::Zero(p.rows(), p.cols()));
  }
}

void Adam::step() {
  ++step_count_;
  double scale = 1.0;
  if (options_.clip_norm > 0.0) {
    double sq = 0.0;
    for (const auto& p : params_) {
      if (p.has_grad()) sq += p.grad().squaredNorm();
    }
    const double norm = std::sqrt(sq);
    if (norm > options_.clip_norm) scale = options_.clip_norm / norm;
  }
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(step_count_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (!p.has_grad()) continue;
    const ad::Matrix g = p.grad() * scale;
    first_moment_[i] = options_.beta1 * first_moment_[i] + (1.0 - options_.beta1) * g;
    second_moment_[i] =
        options_.beta2 * second_moment_[i] + (1.0 - options_.beta2) * g.cwiseAbs2();
    p.mutable_value().array() -=
        options_.learning_rate * (first_moment_[i].array() / bc1) /
        ((second_moment_[i].array() / bc2).sqrt() + options_.epsilon);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace nrfe::nn
