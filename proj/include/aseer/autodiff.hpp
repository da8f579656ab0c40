#pragma once

// Reverse-mode automatic differentiation over dense Eigen matrices.
//
// A Tape records every operation of one forward pass as a node holding its
// value and a closure that scatters the node's gradient into its inputs.
// Nodes are created in topological order, so the backward sweep is a single
// reverse pass over the node list. Parameters are leaf nodes bound to a
// Parameter; backward() adds the leaf gradients into Parameter::grad.
//
// Conventions: batches are rows. A feature vector is a 1 x k matrix and a
// scalar is 1 x 1.

#include <Eigen/Dense>

#include <cassert>
#include <cmath>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace aseer::ad {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool frozen = false;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  double scalar() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t)>;

  // With record_gradients = false no backward closures are kept (inference).
  explicit Tape(bool record_gradients = true) : record_(record_gradients) { nodes_.reserve(4096); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value) {
    nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false, false});
    return {this, nodes_.size() - 1};
  }

  Var constant(double value) { return constant(Matrix::Constant(1, 1, value)); }

  // One leaf per parameter per tape; repeated calls return the same node.
  Var param(Parameter& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return {this, it->second};
    nodes_.push_back(Node{p.value, {}, {}, &p, record_ && !p.frozen, false});
    param_nodes_.emplace(&p, nodes_.size() - 1);
    return {this, nodes_.size() - 1};
  }

  Var record(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                  std::move(backward));
  }

  Var record(Matrix value, std::span<const Var> inputs, Backward backward) {
    bool needs = false;
    for (const Var& in : inputs) {
      assert(in.tape() == this);
      needs = needs || nodes_[in.id()].needs_grad;
    }
    nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : Backward{},
                          nullptr, needs, false});
    return {this, nodes_.size() - 1};
  }

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  bool needs_grad(const Var& v) const { return nodes_[v.id()].needs_grad; }

  // Gradient slot of a node, allocated as zeros on first access.
  Matrix& grad(std::size_t id) {
    Node& n = nodes_[id];
    if (!n.has_grad) {
      n.grad.setZero(n.value.rows(), n.value.cols());
      n.has_grad = true;
    }
    return n.grad;
  }

  // Reads a node's gradient; nodes that never received one read as zero.
  const Matrix* grad_if_any(std::size_t id) const {
    return nodes_[id].has_grad ? &nodes_[id].grad : nullptr;
  }

  void backward(const Var& root) {
    if (root.rows() != 1 || root.cols() != 1)
      throw std::invalid_argument("backward() needs a scalar root");
    if (!nodes_[root.id()].needs_grad) return;
    grad(root.id())(0, 0) += 1.0;
    for (std::size_t i = root.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.has_grad) continue;
      if (n.backward) n.backward(*this, i);
      if (n.param != nullptr && !n.param->frozen) {
        if (n.param->grad.size() != n.param->value.size()) n.param->zero_grad();
        n.param->grad += n.grad;
      }
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    Parameter* param;
    bool needs_grad;
    bool has_grad;
  };

  bool record_ = true;
  std::vector<Node> nodes_;
  std::unordered_map<Parameter*, std::size_t> param_nodes_;
};

inline const Matrix& Var::value() const { return tape_->value(id_); }
inline double Var::scalar() const { return value()(0, 0); }

namespace detail {

inline void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

// Adds `delta` into the gradient of `v` when v participates in differentiation.
template <class Expr>
inline void accumulate(Tape& t, const Var& v, const Expr& delta) {
  if (t.needs_grad(v)) t.grad(v.id()) += delta;
}

}  // namespace detail

inline Var operator+(const Var& a, const Var& b) {
  detail::check_same_shape(a, b, "add");
  return a.tape()->record(a.value() + b.value(), {a, b}, [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    detail::accumulate(t, a, g);
    detail::accumulate(t, b, g);
  });
}

inline Var operator-(const Var& a, const Var& b) {
  detail::check_same_shape(a, b, "sub");
  return a.tape()->record(a.value() - b.value(), {a, b}, [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    detail::accumulate(t, a, g);
    detail::accumulate(t, b, -g);
  });
}

inline Var operator-(const Var& a) {
  return a.tape()->record(-a.value(), {a}, [a](Tape& t, std::size_t self) {
    detail::accumulate(t, a, -t.grad(self));
  });
}

inline Var operator+(const Var& a, double c) {
  return a.tape()->record(a.value().array() + c, {a}, [a](Tape& t, std::size_t self) {
    detail::accumulate(t, a, t.grad(self));
  });
}

inline Var operator-(const Var& a, double c) { return a + (-c); }
inline Var operator-(double c, const Var& a) { return (-a) + c; }

inline Var operator*(const Var& a, double c) {
  return a.tape()->record(a.value() * c, {a}, [a, c](Tape& t, std::size_t self) {
    detail::accumulate(t, a, t.grad(self) * c);
  });
}

inline Var operator*(double c, const Var& a) { return a * c; }

// Elementwise product.
inline Var hadamard(const Var& a, const Var& b) {
  detail::check_same_shape(a, b, "hadamard");
  return a.tape()->record(a.value().cwiseProduct(b.value()), {a, b},
                          [a, b](Tape& t, std::size_t self) {
                            const Matrix& g = t.grad(self);
                            detail::accumulate(t, a, g.cwiseProduct(b.value()));
                            detail::accumulate(t, b, g.cwiseProduct(a.value()));
                          });
}

// Multiplies every element of `a` by the 1 x 1 variable `s`.
inline Var scale_by(const Var& a, const Var& s) {
  if (s.rows() != 1 || s.cols() != 1) throw std::invalid_argument("scale_by: scalar expected");
  return a.tape()->record(a.value() * s.scalar(), {a, s}, [a, s](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    detail::accumulate(t, a, g * s.scalar());
    if (t.needs_grad(s)) t.grad(s.id())(0, 0) += g.cwiseProduct(a.value()).sum();
  });
}

inline Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  return a.tape()->record(a.value() * b.value(), {a, b}, [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(a)) t.grad(a.id()).noalias() += g * b.value().transpose();
    if (t.needs_grad(b)) t.grad(b.id()).noalias() += a.value().transpose() * g;
  });
}

// x * w + 1 * b, with x (n x in), w (in x out), b (1 x out).
inline Var linear(const Var& x, const Var& w, const Var& b) {
  if (x.cols() != w.rows() || b.rows() != 1 || b.cols() != w.cols())
    throw std::invalid_argument("linear: shape mismatch");
  Matrix out = x.value() * w.value();
  out.rowwise() += b.value().row(0);
  return x.tape()->record(std::move(out), {x, w, b}, [x, w, b](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(x)) t.grad(x.id()).noalias() += g * w.value().transpose();
    if (t.needs_grad(w)) t.grad(w.id()).noalias() += x.value().transpose() * g;
    if (t.needs_grad(b)) t.grad(b.id()) += g.colwise().sum();
  });
}

inline Var tanh(const Var& a) {
  Matrix y = a.value().array().tanh().matrix();
  return a.tape()->record(y, {a}, [a](Tape& t, std::size_t self) {
    const Matrix& y = t.value(self);
    detail::accumulate(t, a, (t.grad(self).array() * (1.0 - y.array().square())).matrix());
  });
}

inline Var sigmoid(const Var& a) {
  Matrix y = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return a.tape()->record(y, {a}, [a](Tape& t, std::size_t self) {
    const Matrix& y = t.value(self);
    detail::accumulate(t, a, (t.grad(self).array() * y.array() * (1.0 - y.array())).matrix());
  });
}

inline Var relu(const Var& a) {
  return a.tape()->record(a.value().cwiseMax(0.0), {a}, [a](Tape& t, std::size_t self) {
    detail::accumulate(t, a,
                       (t.grad(self).array() * (a.value().array() > 0.0).cast<double>()).matrix());
  });
}

inline Var exp(const Var& a) {
  return a.tape()->record(a.value().array().exp().matrix(), {a}, [a](Tape& t, std::size_t self) {
    detail::accumulate(t, a, t.grad(self).cwiseProduct(t.value(self)));
  });
}

inline Var square(const Var& a) {
  return a.tape()->record(a.value().array().square().matrix(), {a},
                          [a](Tape& t, std::size_t self) {
                            detail::accumulate(t, a, 2.0 * t.grad(self).cwiseProduct(a.value()));
                          });
}

// Subgradient 0 at the kink.
inline Var abs(const Var& a) {
  return a.tape()->record(a.value().cwiseAbs(), {a}, [a](Tape& t, std::size_t self) {
    detail::accumulate(t, a, (t.grad(self).array() * a.value().array().sign()).matrix());
  });
}

inline Var clamp_min(const Var& a, double lo) {
  return a.tape()->record(a.value().cwiseMax(lo), {a}, [a, lo](Tape& t, std::size_t self) {
    detail::accumulate(t, a,
                       (t.grad(self).array() * (a.value().array() > lo).cast<double>()).matrix());
  });
}

inline Var sum(const Var& a) {
  return a.tape()->record(Matrix::Constant(1, 1, a.value().sum()), {a},
                          [a](Tape& t, std::size_t self) {
                            if (t.needs_grad(a))
                              t.grad(a.id()).array() += t.grad(self)(0, 0);
                          });
}

inline Var element(const Var& a, Index r, Index c) {
  return a.tape()->record(Matrix::Constant(1, 1, a.value()(r, c)), {a},
                          [a, r, c](Tape& t, std::size_t self) {
                            if (t.needs_grad(a)) t.grad(a.id())(r, c) += t.grad(self)(0, 0);
                          });
}

inline Var slice_cols(const Var& a, Index start, Index count) {
  return a.tape()->record(a.value().middleCols(start, count), {a},
                          [a, start, count](Tape& t, std::size_t self) {
                            if (t.needs_grad(a))
                              t.grad(a.id()).middleCols(start, count) += t.grad(self);
                          });
}

inline Var slice_rows(const Var& a, Index start, Index count) {
  return a.tape()->record(a.value().middleRows(start, count), {a},
                          [a, start, count](Tape& t, std::size_t self) {
                            if (t.needs_grad(a))
                              t.grad(a.id()).middleRows(start, count) += t.grad(self);
                          });
}

inline Var transpose(const Var& a) {
  return a.tape()->record(a.value().transpose(), {a}, [a](Tape& t, std::size_t self) {
    detail::accumulate(t, a, t.grad(self).transpose());
  });
}

// Concatenates side by side; all parts share the row count.
inline Var hcat(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("hcat: no inputs");
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("hcat: row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Index at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts.front().tape()->record(std::move(out), parts, [inputs](Tape& t, std::size_t self) {
    Index at = 0;
    for (const Var& p : inputs) {
      if (t.needs_grad(p)) t.grad(p.id()) += t.grad(self).middleCols(at, p.cols());
      at += p.cols();
    }
  });
}

inline Var hcat(std::initializer_list<Var> parts) {
  return hcat(std::span<const Var>(parts.begin(), parts.size()));
}

// Stacks vertically; all parts share the column count.
inline Var vcat(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("vcat: no inputs");
  const Index cols = parts.front().cols();
  Index rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("vcat: column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Index at = 0;
  for (const Var& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts.front().tape()->record(std::move(out), parts, [inputs](Tape& t, std::size_t self) {
    Index at = 0;
    for (const Var& p : inputs) {
      if (t.needs_grad(p)) t.grad(p.id()) += t.grad(self).middleRows(at, p.rows());
      at += p.rows();
    }
  });
}

// Normalized exponentials down each column, max-shifted for stability.
inline Matrix softmax_cols_value(const Matrix& scores) {
  Matrix out = scores;
  for (Index c = 0; c < out.cols(); ++c) {
    const double m = out.col(c).maxCoeff();
    out.col(c) = (out.col(c).array() - m).exp().matrix();
    out.col(c) /= out.col(c).sum();
  }
  return out;
}

inline Var softmax_cols(const Var& a) {
  return a.tape()->record(softmax_cols_value(a.value()), {a}, [a](Tape& t, std::size_t self) {
    if (!t.needs_grad(a)) return;
    const Matrix& y = t.value(self);
    const Matrix& g = t.grad(self);
    // dx = y * (g - sum(g * y)) per column
    Eigen::RowVectorXd dots = y.cwiseProduct(g).colwise().sum();
    Matrix dx = g;
    dx.rowwise() -= dots;
    t.grad(a.id()) += y.cwiseProduct(dx);
  });
}

}  // namespace aseer::ad
