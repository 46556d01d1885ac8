// SPDX-License-Identifier: Apache-2.0
#include "nrfe/autodiff.hpp"

#include "nrfe/error.hpp"

#include <cmath>
#include <limits>
#include <unordered_set>

namespace nrfe::ad {

namespace {

thread_local bool g_grad_enabled = true;

void require(bool condition, const char* what) {
  if (!condition) throw InvalidArgument(what);
}

// Builds the result node. Inputs and the backward closure are only retained
// when some input participates in differentiation.
Tensor make_result(Matrix value, std::initializer_list<const Tensor*> inputs,
                   std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (g_grad_enabled) {
    for (const Tensor* t : inputs) {
      if (t->requires_grad()) node->requires_grad = true;
    }
    if (node->requires_grad) {
      node->inputs.reserve(inputs.size());
      for (const Tensor* t : inputs) node->inputs.push_back(t->node());
      node->backward = std::move(backward);
    }
  }
  return Tensor(std::move(node));
}

Tensor make_result_n(Matrix value, std::span<const Tensor> inputs,
                     std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (g_grad_enabled) {
    for (const Tensor& t : inputs) {
      if (t.requires_grad()) node->requires_grad = true;
    }
    if (node->requires_grad) {
      node->inputs.reserve(inputs.size());
      for (const Tensor& t : inputs) node->inputs.push_back(t.node());
      node->backward = std::move(backward);
    }
  }
  return Tensor(std::move(node));
}

bool masked_out(const Mask& mask, Index i) {
  return !mask.empty() && !mask[static_cast<std::size_t>(i)];
}

}  // namespace

Matrix& Node::grad_ref() {
  if (grad.size() == 0) grad = Matrix::Zero(value.rows(), value.cols());
  return grad;
}

Tensor Tensor::constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Tensor(std::move(node));
}

Tensor Tensor::variable(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value) {
  Matrix m(1, 1);
  m(0, 0) = value;
  return constant(std::move(m));
}

double Tensor::item() const {
  require(rows() == 1 && cols() == 1, "item() requires a 1x1 tensor");
  return node_->value(0, 0);
}

void Tensor::backward() const {
  require(rows() == 1 && cols() == 1, "backward() requires a scalar tensor");
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->grad_ref()(0, 0) += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() != 0) n->backward(*n);
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  return make_result(a.value() * b.value(), {&a, &b}, [](Node& self) {
    Node& x = *self.inputs[0];
    Node& y = *self.inputs[1];
    if (x.requires_grad) x.grad_ref().noalias() += self.grad * y.value.transpose();
    if (y.requires_grad) y.grad_ref().noalias() += x.value.transpose() * self.grad;
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  return make_result(a.value() + b.value(), {&a, &b}, [](Node& self) {
    for (auto& in : self.inputs) {
      if (in->requires_grad) in->grad_ref() += self.grad;
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape mismatch");
  return make_result(a.value() - b.value(), {&a, &b}, [](Node& self) {
    Node& x = *self.inputs[0];
    Node& y = *self.inputs[1];
    if (x.requires_grad) x.grad_ref() += self.grad;
    if (y.requires_grad) y.grad_ref() -= self.grad;
  });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  require(row.rows() == 1 && row.cols() == a.cols(), "add_row: shape mismatch");
  Matrix out = a.value().rowwise() + row.value().row(0);
  return make_result(std::move(out), {&a, &row}, [](Node& self) {
    Node& x = *self.inputs[0];
    Node& r = *self.inputs[1];
    if (x.requires_grad) x.grad_ref() += self.grad;
    if (r.requires_grad) r.grad_ref() += self.grad.colwise().sum();
  });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "hadamard: shape mismatch");
  return make_result(a.value().cwiseProduct(b.value()), {&a, &b}, [](Node& self) {
    Node& x = *self.inputs[0];
    Node& y = *self.inputs[1];
    if (x.requires_grad) x.grad_ref() += self.grad.cwiseProduct(y.value);
    if (y.requires_grad) y.grad_ref() += self.grad.cwiseProduct(x.value);
  });
}

Tensor scale(const Tensor& a, double factor) {
  return make_result(a.value() * factor, {&a}, [factor](Node& self) {
    self.inputs[0]->grad_ref() += self.grad * factor;
  });
}

Tensor tanh(const Tensor& a) {
  Matrix out = a.value().array().tanh().matrix();
  return make_result(std::move(out), {&a}, [](Node& self) {
    self.inputs[0]->grad_ref().array() +=
        self.grad.array() * (1.0 - self.value.array().square());
  });
}

Tensor relu(const Tensor& a) {
  Matrix out = a.value().cwiseMax(0.0);
  return make_result(std::move(out), {&a}, [](Node& self) {
    Node& x = *self.inputs[0];
    x.grad_ref().array() += (x.value.array() > 0.0).select(self.grad.array(), 0.0);
  });
}

Tensor transpose(const Tensor& a) {
  return make_result(a.value().transpose(), {&a}, [](Node& self) {
    self.inputs[0]->grad_ref() += self.grad.transpose();
  });
}

Tensor softmax_rows(const Tensor& a, const Mask& key_mask) {
  require(key_mask.empty() || static_cast<Index>(key_mask.size()) == a.cols(),
          "softmax_rows: mask length differs from column count");
  const Matrix& x = a.value();
  Matrix out = Matrix::Zero(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    double max_v = -std::numeric_limits<double>::infinity();
    for (Index c = 0; c < x.cols(); ++c) {
      if (!masked_out(key_mask, c)) max_v = std::max(max_v, x(r, c));
    }
    require(std::isfinite(max_v), "softmax_rows: every position is masked");
    double total = 0.0;
    for (Index c = 0; c < x.cols(); ++c) {
      if (masked_out(key_mask, c)) continue;
      out(r, c) = std::exp(x(r, c) - max_v);
      total += out(r, c);
    }
    out.row(r) /= total;
  }
  return make_result(std::move(out), {&a}, [](Node& self) {
    const Matrix& y = self.value;
    Eigen::VectorXd dots = (self.grad.cwiseProduct(y)).rowwise().sum();
    Matrix g = y.cwiseProduct(self.grad - dots.replicate(1, y.cols()));
    self.inputs[0]->grad_ref() += g;
  });
}

Tensor log_softmax_rows(const Tensor& a) {
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const double max_v = x.row(r).maxCoeff();
    const double lse = max_v + std::log((x.row(r).array() - max_v).exp().sum());
    out.row(r) = x.row(r).array() - lse;
  }
  return make_result(std::move(out), {&a}, [](Node& self) {
    Matrix p = self.value.array().exp().matrix();
    Eigen::VectorXd row_sums = self.grad.rowwise().sum();
    self.inputs[0]->grad_ref() +=
        self.grad - p.cwiseProduct(row_sums.replicate(1, p.cols()));
  });
}

Tensor layer_norm_rows(const Tensor& a, const Tensor& gamma, const Tensor& beta,
                       double eps) {
  require(gamma.rows() == 1 && gamma.cols() == a.cols() && beta.rows() == 1 &&
              beta.cols() == a.cols(),
          "layer_norm_rows: gamma/beta shape mismatch");
  const Matrix& x = a.value();
  const Index n = x.cols();
  Matrix xhat(x.rows(), n);
  Eigen::VectorXd inv_std(x.rows());
  for (Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (x.row(r).array() - mu) * inv_std(r);
  }
  Matrix out = (xhat.array().rowwise() * gamma.value().row(0).array()).matrix();
  out.rowwise() += beta.value().row(0);
  return make_result(
      std::move(out), {&a, &gamma, &beta},
      [xhat = std::move(xhat), inv_std = std::move(inv_std), n](Node& self) {
        Node& x_node = *self.inputs[0];
        Node& g_node = *self.inputs[1];
        Node& b_node = *self.inputs[2];
        if (g_node.requires_grad) {
          g_node.grad_ref() += self.grad.cwiseProduct(xhat).colwise().sum();
        }
        if (b_node.requires_grad) b_node.grad_ref() += self.grad.colwise().sum();
        if (x_node.requires_grad) {
          Matrix gx = (self.grad.array().rowwise() * g_node.value.row(0).array()).matrix();
          Matrix& dx = x_node.grad_ref();
          const double inv_n = 1.0 / static_cast<double>(n);
          for (Index r = 0; r < gx.rows(); ++r) {
            const double mean_g = gx.row(r).mean();
            const double mean_gx = gx.row(r).dot(xhat.row(r)) * inv_n;
            dx.row(r).array() += inv_std(r) * (gx.row(r).array() - mean_g -
                                               xhat.row(r).array() * mean_gx);
          }
        }
      });
}

Tensor gather_rows(const Tensor& table, std::span<const int> ids) {
  Matrix out(static_cast<Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] >= 0 && ids[i] < table.rows(), "gather_rows: id out of range");
    out.row(static_cast<Index>(i)) = table.value().row(ids[i]);
  }
  std::vector<int> kept(ids.begin(), ids.end());
  return make_result(std::move(out), {&table}, [kept = std::move(kept)](Node& self) {
    Matrix& g = self.inputs[0]->grad_ref();
    for (std::size_t i = 0; i < kept.size(); ++i) {
      g.row(kept[i]) += self.grad.row(static_cast<Index>(i));
    }
  });
}

Tensor slice_cols(const Tensor& a, Index start, Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.cols(),
          "slice_cols: range out of bounds");
  Matrix out = a.value().middleCols(start, count);
  return make_result(std::move(out), {&a}, [start, count](Node& self) {
    self.inputs[0]->grad_ref().middleCols(start, count) += self.grad;
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  const Index rows = parts[0].rows();
  Index total = 0;
  for (const Tensor& p : parts) {
    require(p.rows() == rows, "concat_cols: row count mismatch");
    total += p.cols();
  }
  Matrix out(rows, total);
  std::vector<Index> offsets;
  Index at = 0;
  for (const Tensor& p : parts) {
    offsets.push_back(at);
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return make_result_n(std::move(out), parts, [offsets = std::move(offsets)](Node& self) {
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      Node& in = *self.inputs[i];
      if (in.requires_grad) in.grad_ref() += self.grad.middleCols(offsets[i], in.value.cols());
    }
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  const Index cols = parts[0].cols();
  Index total = 0;
  for (const Tensor& p : parts) {
    require(p.cols() == cols, "concat_rows: column count mismatch");
    total += p.rows();
  }
  Matrix out(total, cols);
  std::vector<Index> offsets;
  Index at = 0;
  for (const Tensor& p : parts) {
    offsets.push_back(at);
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return make_result_n(std::move(out), parts, [offsets = std::move(offsets)](Node& self) {
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      Node& in = *self.inputs[i];
      if (in.requires_grad) in.grad_ref() += self.grad.middleRows(offsets[i], in.value.rows());
    }
  });
}

Tensor sum(const Tensor& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return make_result(std::move(out), {&a}, [](Node& self) {
    self.inputs[0]->grad_ref().array() += self.grad(0, 0);
  });
}

Tensor mean(const Tensor& a) {
  require(a.value().size() > 0, "mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Tensor mean_rows(const Tensor& a) {
  require(a.rows() > 0, "mean_rows: empty tensor");
  const double inv = 1.0 / static_cast<double>(a.rows());
  Matrix out = a.value().colwise().sum() * inv;
  return make_result(std::move(out), {&a}, [inv](Node& self) {
    Node& x = *self.inputs[0];
    x.grad_ref().rowwise() += self.grad.row(0) * inv;
  });
}

Tensor pick(const Tensor& a, Index row, Index col) {
  require(row >= 0 && row < a.rows() && col >= 0 && col < a.cols(), "pick: out of range");
  Matrix out(1, 1);
  out(0, 0) = a.value()(row, col);
  return make_result(std::move(out), {&a}, [row, col](Node& self) {
    self.inputs[0]->grad_ref()(row, col) += self.grad(0, 0);
  });
}

Tensor cosine_similarity(const Tensor& a, const Tensor& b) {
  require(a.rows() == 1 && b.rows() == 1 && a.cols() == b.cols(),
          "cosine_similarity: expects two 1xD rows of equal width");
  const double na = a.value().norm();
  const double nb = b.value().norm();
  if (na == 0.0 || nb == 0.0) throw InvalidArgument("cosine_similarity: zero-norm vector");
  const double cos = a.value().row(0).dot(b.value().row(0)) / (na * nb);
  Matrix out(1, 1);
  out(0, 0) = cos;
  return make_result(std::move(out), {&a, &b}, [na, nb, cos](Node& self) {
    Node& x = *self.inputs[0];
    Node& y = *self.inputs[1];
    const double g = self.grad(0, 0);
    if (x.requires_grad) {
      x.grad_ref() += g * (y.value / (na * nb) - cos * x.value / (na * na));
    }
    if (y.requires_grad) {
      y.grad_ref() += g * (x.value / (na * nb) - cos * y.value / (nb * nb));
    }
  });
}

Tensor dropout(const Tensor& a, double rate, std::mt19937_64& rng) {
  require(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0, 1)");
  if (rate == 0.0) return a;
  std::bernoulli_distribution keep(1.0 - rate);
  Matrix mask(a.rows(), a.cols());
  const double inv = 1.0 / (1.0 - rate);
  for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? inv : 0.0;
  Matrix out = a.value().cwiseProduct(mask);
  return make_result(std::move(out), {&a}, [mask = std::move(mask)](Node& self) {
    self.inputs[0]->grad_ref() += self.grad.cwiseProduct(mask);
  });
}

}  // namespace nrfe::ad
