// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode automatic differentiation over dense double matrices.
// Every model in the library is expressed with these ops; all arithmetic is
// double precision so finite-difference gradient checks are meaningful.
#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <random>
#include <span>
#include <vector>

namespace nrfe::ad {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Per-position validity flags. An empty mask means "all positions valid".
using Mask = std::vector<bool>;

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  /// Gradient buffer, zero-initialised on first access.
  Matrix& grad_ref();
};

using NodePtr = std::shared_ptr<Node>;

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  static Tensor constant(Matrix value);
  /// Leaf that accumulates gradients (model parameters).
  static Tensor variable(Matrix value);
  static Tensor scalar(double value);

  bool defined() const noexcept { return static_cast<bool>(node_); }
  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad.size() != 0; }
  void zero_grad() { node_->grad.resize(0, 0); }
  bool requires_grad() const { return node_->requires_grad; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  double item() const;

  /// Back-propagates from a 1x1 tensor into every reachable leaf.
  void backward() const;

  const NodePtr& node() const noexcept { return node_; }

 private:
  NodePtr node_;
};

/// Disables graph construction on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
/// a + broadcast of the 1xC row over every row of a.
Tensor add_row(const Tensor& a, const Tensor& row);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor transpose(const Tensor& a);

/// Row-wise softmax. Columns with key_mask[c] == false get weight exactly 0.
Tensor softmax_rows(const Tensor& a, const Mask& key_mask = {});
Tensor log_softmax_rows(const Tensor& a);
Tensor layer_norm_rows(const Tensor& a, const Tensor& gamma, const Tensor& beta,
                       double eps = 1e-5);

Tensor gather_rows(const Tensor& table, std::span<const int> ids);
Tensor slice_cols(const Tensor& a, Index start, Index count);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Column means, 1xC.
Tensor mean_rows(const Tensor& a);
/// Single entry as a 1x1 tensor.
Tensor pick(const Tensor& a, Index row, Index col);
/// Cosine similarity of two 1xD rows. Throws InvalidArgument on a zero norm.
Tensor cosine_similarity(const Tensor& a, const Tensor& b);
/// Inverted dropout; identity when rate == 0.
Tensor dropout(const Tensor& a, double rate, std::mt19937_64& rng);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }

}  // namespace nrfe::ad
