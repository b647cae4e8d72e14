#pragma once

// Reverse-mode differentiation over dense double-precision tensors.
//
// A Tape records every primitive application in execution order (which is a
// topological order by construction). backward() walks the tape once in
// reverse, accumulating adjoints, and returns the gradient of a scalar loss
// with respect to every tensor registered through Tape::parameter().

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gcrnn/errors.hpp"
#include "gcrnn/tensor.hpp"

namespace gcrnn::ad {

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Matrix& matrix() const { return value().matrix(); }
  const Shape& shape() const { return value().shape(); }
};

/// Gradients of one backward pass, in parameter registration order.
class Gradients {
 public:
  Gradients() = default;
  Gradients(std::vector<const Tensor*> params, std::vector<Tensor> grads)
      : params_(std::move(params)), grads_(std::move(grads)) {
    for (std::size_t i = 0; i < params_.size(); ++i) index_.emplace(params_[i], i);
  }

  std::size_t size() const noexcept { return grads_.size(); }
  const Tensor& at(std::size_t i) const { return grads_.at(i); }
  std::vector<Tensor>& values() noexcept { return grads_; }
  const std::vector<Tensor>& values() const noexcept { return grads_; }

  bool contains(const Tensor& param) const { return index_.count(&param) != 0; }

  const Tensor& operator[](const Tensor& param) const {
    auto it = index_.find(&param);
    detail::require(it != index_.end(), "Gradients: tensor was not registered as a parameter");
    return grads_[it->second];
  }

 private:
  std::vector<const Tensor*> params_;
  std::vector<Tensor> grads_;
  std::unordered_map<const Tensor*, std::size_t> index_;
};

class Tape {
 public:
  /// Receives the adjoint of the node's output; pushes parent adjoints with accumulate().
  using BackwardFn = std::function<void(Tape&, const Matrix& grad_out)>;

  /// A tape constructed with `record_gradients = false` evaluates forward only
  /// and refuses backward(); it is used for evaluation passes.
  explicit Tape(bool record_gradients = true) : recording_(record_gradients) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return recording_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  Var constant(Tensor value) { return push(std::move(value), {}, nullptr, false, "constant"); }
  Var constant(const Matrix& value) { return constant(Tensor::from_matrix(value)); }

  /// Registers `param` as a trainable leaf. Registering the same tensor twice
  /// returns the original handle, so gradients from every use accumulate.
  Var parameter(const Tensor& param) {
    if (auto it = param_index_.find(&param); it != param_index_.end()) return Var{this, param_nodes_[it->second]};
    Var v = push(param, {}, nullptr, recording_, "parameter");
    param_index_.emplace(&param, params_.size());
    params_.push_back(&param);
    param_nodes_.push_back(v.id);
    return v;
  }

  const std::vector<const Tensor*>& parameters() const noexcept { return params_; }

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool needs_grad(const Var& v) const { return nodes_[v.id].requires_grad; }

  /// Records a node. `backward` may be null when no parent requires a gradient.
  Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn backward, const char* op) {
    bool any = false;
    for (const Var& p : parents) {
      detail::require(p.tape == this, std::string(op) + ": operand belongs to a different tape");
      any = any || nodes_[p.id].requires_grad;
    }
    bool track = recording_ && any;
    return push(std::move(value), parents, track ? std::move(backward) : nullptr, track, op);
  }

  /// Adds `g` into the adjoint of `v`; no-op for nodes that need no gradient.
  void accumulate(const Var& v, const Matrix& g) {
    Node& n = nodes_[v.id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  /// Reverse accumulation from a scalar `loss`. A tape supports exactly one
  /// backward pass; call reset() to reuse it.
  Gradients backward(const Var& loss) {
    detail::require(recording_, "backward: tape was created without gradient recording");
    detail::require(loss.tape == this && loss.id < nodes_.size(), "backward: loss was not recorded on this tape");
    detail::require(nodes_[loss.id].value.is_scalar(),
                    "backward: loss must be a scalar, got shape " + shape_string(nodes_[loss.id].value.shape()));
    detail::require(!consumed_, "backward: tape already consumed; reset() before recording a new pass");
    consumed_ = true;

    if (nodes_[loss.id].requires_grad) {
      nodes_[loss.id].grad = Matrix::Ones(1, 1);
      for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.backward || n.grad.size() == 0) continue;
        Matrix g = std::move(n.grad);
        n.backward(*this, g);
        n.grad = std::move(g);
      }
    }

    std::vector<Tensor> grads;
    grads.reserve(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Tensor g(params_[i]->shape());
      const Node& n = nodes_[param_nodes_[i]];
      if (n.grad.size() != 0) g.matrix() = n.grad;
      grads.push_back(std::move(g));
    }
    return Gradients(params_, std::move(grads));
  }

  void reset() {
    nodes_.clear();
    params_.clear();
    param_nodes_.clear();
    param_index_.clear();
    consumed_ = false;
  }

 private:
  struct Node {
    Tensor value;
    Matrix grad;
    BackwardFn backward;
    bool requires_grad = false;
  };

  Var push(Tensor value, std::initializer_list<Var>, BackwardFn backward, bool requires_grad, const char* op) {
    if (!value.all_finite()) throw NumericalError(std::string(op) + ": non-finite value produced");
    nodes_.push_back(Node{std::move(value), Matrix(), std::move(backward), requires_grad});
    return Var{this, nodes_.size() - 1};
  }

  bool recording_;
  bool consumed_ = false;
  std::vector<Node> nodes_;
  std::vector<const Tensor*> params_;
  std::vector<std::size_t> param_nodes_;
  std::unordered_map<const Tensor*, std::size_t> param_index_;
};

inline const Tensor& Var::value() const { return tape->value(id); }

namespace detail {

inline Tensor make(const Matrix& m) { return Tensor::from_matrix(m); }

inline Tensor like(const Tensor& shape_of, Matrix m) {
  Tensor t(shape_of.shape());
  t.matrix() = std::move(m);
  return t;
}

inline void same_shape(const Var& a, const Var& b, const char* op) {
  gcrnn::detail::require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                                                     " vs " + shape_string(b.shape()));
}

inline void require_matrix(const Var& a, const char* op) {
  gcrnn::detail::require(a.value().rank() <= 2,
                         std::string(op) + ": expected rank <= 2, got " + shape_string(a.shape()));
}

}  // namespace detail

// ---------------------------------------------------------------- primitives

inline Var matmul(Var a, Var b) {
  detail::require_matrix(a, "matmul");
  detail::require_matrix(b, "matmul");
  gcrnn::detail::require(a.matrix().cols() == b.matrix().rows(),
                         "matmul: inner dimensions differ " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  Matrix out = a.matrix() * b.matrix();
  return a.tape->record(detail::make(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.needs_grad(a)) t.accumulate(a, g * b.matrix().transpose());
    if (t.needs_grad(b)) t.accumulate(b, a.matrix().transpose() * g);
  }, "matmul");
}

inline Var transpose(Var a) {
  detail::require_matrix(a, "transpose");
  return a.tape->record(detail::make(a.matrix().transpose()), {a},
                        [a](Tape& t, const Matrix& g) { t.accumulate(a, g.transpose()); }, "transpose");
}

inline Var add(Var a, Var b) {
  detail::same_shape(a, b, "add");
  return a.tape->record(detail::like(a.value(), a.matrix() + b.matrix()), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  }, "add");
}

inline Var scale(Var a, double c) {
  return a.tape->record(detail::like(a.value(), a.matrix() * c), {a},
                        [a, c](Tape& t, const Matrix& g) { t.accumulate(a, g * c); }, "scale");
}

/// Multiplies `a` by the recorded scalar `s`.
inline Var scale_by(Var a, Var s) {
  gcrnn::detail::require(s.value().is_scalar(), "scale_by: factor must be a scalar, got " + shape_string(s.shape()));
  double c = s.value().item();
  return a.tape->record(detail::like(a.value(), a.matrix() * c), {a, s}, [a, s, c](Tape& t, const Matrix& g) {
    t.accumulate(a, g * c);
    if (t.needs_grad(s)) t.accumulate(s, Matrix::Constant(1, 1, g.cwiseProduct(a.matrix()).sum()));
  }, "scale_by");
}

inline Var hadamard(Var a, Var b) {
  detail::same_shape(a, b, "hadamard");
  return a.tape->record(detail::like(a.value(), a.matrix().cwiseProduct(b.matrix())), {a, b},
                        [a, b](Tape& t, const Matrix& g) {
                          if (t.needs_grad(a)) t.accumulate(a, g.cwiseProduct(b.matrix()));
                          if (t.needs_grad(b)) t.accumulate(b, g.cwiseProduct(a.matrix()));
                        },
                        "hadamard");
}

inline Var tanh(Var a) {
  Matrix y = a.matrix().array().tanh().matrix();
  return a.tape->record(detail::like(a.value(), y), {a}, [a, y](Tape& t, const Matrix& g) {
    t.accumulate(a, (g.array() * (1.0 - y.array().square())).matrix());
  }, "tanh");
}

inline Var relu(Var a) {
  Matrix y = a.matrix().cwiseMax(0.0);
  return a.tape->record(detail::like(a.value(), y), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, (a.matrix().array() > 0.0).select(g, 0.0));
  }, "relu");
}

inline Var sigmoid(Var a) {
  Matrix y = (1.0 + (-a.matrix().array()).exp()).inverse().matrix();
  return a.tape->record(detail::like(a.value(), y), {a}, [a, y](Tape& t, const Matrix& g) {
    t.accumulate(a, (g.array() * y.array() * (1.0 - y.array())).matrix());
  }, "sigmoid");
}

inline Var sum(Var a) {
  return a.tape->record(Tensor::scalar(a.matrix().sum()), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, Matrix::Constant(a.matrix().rows(), a.matrix().cols(), g(0, 0)));
  }, "sum");
}

/// mean(|a - b|) over all entries. The subgradient at a == b is 0.
inline Var mean_abs(Var a, Var b) {
  detail::same_shape(a, b, "mean_abs");
  Matrix diff = a.matrix() - b.matrix();
  const double n = static_cast<double>(diff.size());
  return a.tape->record(Tensor::scalar(diff.cwiseAbs().sum() / n), {a, b}, [a, b, diff, n](Tape& t, const Matrix& g) {
    Matrix s = diff.array().sign().matrix() * (g(0, 0) / n);
    if (t.needs_grad(a)) t.accumulate(a, s);
    if (t.needs_grad(b)) t.accumulate(b, -s);
  }, "mean_abs");
}

/// -log softmax(logits)[label] with the logits flattened in row-major order.
inline Var softmax_cross_entropy(Var logits, std::size_t label) {
  const Matrix& z = logits.matrix();
  const auto n = static_cast<std::size_t>(z.size());
  gcrnn::detail::require(label < n, "softmax_cross_entropy: label " + std::to_string(label) + " out of range [0, " +
                                        std::to_string(n) + ")");
  const double* zd = z.data();
  double zmax = z.maxCoeff();
  Matrix p(z.rows(), z.cols());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += (p.data()[i] = std::exp(zd[i] - zmax));
  p /= total;
  double loss = std::log(total) - (zd[label] - zmax);
  return logits.tape->record(Tensor::scalar(loss), {logits}, [logits, p, label](Tape& t, const Matrix& g) {
    Matrix d = p;
    d.data()[label] -= 1.0;
    t.accumulate(logits, d * g(0, 0));
  }, "softmax_cross_entropy");
}

}  // namespace gcrnn::ad
