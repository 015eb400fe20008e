#pragma once

// Tape-based reverse-mode differentiation over dense row-major matrices.
//
// A Tape owns every intermediate value of one forward pass. Ops are free
// functions taking Var handles; each op records a closure that pushes the
// output gradient back to its inputs. Parameters live in a separate
// Parameters store and enter the tape through Tape::param(), which is also
// where their gradients are collected after backward().

#include "audiox/tensor.hpp"

#include <deque>
#include <functional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace audiox::ad {

template <typename Scalar>
class Parameters {
 public:
  int add(std::string name, Mat<Scalar> init) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    index_.emplace(name, static_cast<int>(values_.size()));
    names_.push_back(std::move(name));
    values_.push_back(std::move(init));
    return static_cast<int>(values_.size()) - 1;
  }

  std::size_t size() const { return values_.size(); }
  const std::string& name(int i) const { return names_.at(static_cast<std::size_t>(i)); }
  Mat<Scalar>& operator[](int i) { return values_[static_cast<std::size_t>(i)]; }
  const Mat<Scalar>& operator[](int i) const { return values_[static_cast<std::size_t>(i)]; }

  int find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
  }

  Index scalar_count() const {
    Index n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
  }

  /// Scalars held by parameters whose name starts with `prefix`.
  Index scalar_count(const std::string& prefix) const {
    Index n = 0;
    for (std::size_t i = 0; i < values_.size(); ++i)
      if (names_[i].rfind(prefix, 0) == 0) n += values_[i].size();
    return n;
  }

  const std::vector<Mat<Scalar>>& values() const { return values_; }
  std::vector<Mat<Scalar>>& values() { return values_; }

  template <typename Other>
  Parameters<Other> cast() const {
    Parameters<Other> out;
    for (std::size_t i = 0; i < values_.size(); ++i) out.add(names_[i], values_[i].template cast<Other>());
    return out;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Mat<Scalar>> values_;
  std::unordered_map<std::string, int> index_;
};

template <typename Scalar>
using Gradients = std::vector<Mat<Scalar>>;

template <typename Scalar>
Gradients<Scalar> zero_gradients(const Parameters<Scalar>& params) {
  Gradients<Scalar> g;
  g.reserve(params.size());
  for (const auto& v : params.values()) g.push_back(Mat<Scalar>::Zero(v.rows(), v.cols()));
  return g;
}

template <typename Scalar>
class Tape;

template <typename Scalar>
struct Var {
  Tape<Scalar>* tape = nullptr;
  int id = -1;

  const Mat<Scalar>& value() const { return tape->value(id); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
};

template <typename Scalar>
class Tape {
 public:
  using Matrix = Mat<Scalar>;

  /// `record == false` builds values only (inference); no closures are kept.
  explicit Tape(const Parameters<Scalar>* params = nullptr, bool record = true)
      : params_(params), record_(record) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var<Scalar> constant(Matrix value) { return make(std::move(value), false); }

  /// Leaf whose gradient is retained (used to differentiate w.r.t. inputs).
  Var<Scalar> input(Matrix value) { return make(std::move(value), record_); }

  Var<Scalar> param(int index) {
    if (!params_) throw std::logic_error("tape has no parameter store");
    if (auto it = param_nodes_.find(index); it != param_nodes_.end()) return {this, it->second};
    Var<Scalar> v = make((*params_)[index], record_);
    nodes_[static_cast<std::size_t>(v.id)].param = index;
    param_nodes_.emplace(index, v.id);
    return v;
  }

  const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  bool needs_grad(std::initializer_list<Var<Scalar>> vars) const {
    if (!record_) return false;
    for (const auto& v : vars)
      if (needs_grad(v.id)) return true;
    return false;
  }

  /// Gradient of node `id`; empty matrix if nothing flowed into it.
  const Matrix& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
  const Matrix& grad(Var<Scalar> v) const { return grad(v.id); }

  template <typename Expr>
  void accumulate(int id, const Expr& expr) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0)
      n.grad = expr;
    else
      n.grad += expr;
  }

  /// Appends an op output. `backward` receives the output gradient and runs
  /// only if some input needs one.
  Var<Scalar> push(Matrix value, bool needs, std::function<void(const Matrix&)> backward) {
    Var<Scalar> v = make(std::move(value), needs && record_);
    if (needs && record_) nodes_[static_cast<std::size_t>(v.id)].backward = std::move(backward);
    return v;
  }

  /// Seeds d(root)/d(root) = 1 (root must be 1x1) and propagates.
  void backward(Var<Scalar> root) {
    if (root.value().size() != 1) throw std::invalid_argument("backward() needs a scalar root");
    backward(root, Matrix::Ones(1, 1));
  }

  void backward(Var<Scalar> root, const Matrix& seed) {
    if (!record_) throw std::logic_error("backward() on a non-recording tape");
    accumulate(root.id, seed);
    for (int id = root.id; id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (n.backward && n.grad.size() != 0) n.backward(n.grad);
    }
  }

  /// Parameter gradients aligned with the parameter store (zeros where untouched).
  Gradients<Scalar> param_grads() const {
    Gradients<Scalar> g = zero_gradients(*params_);
    add_param_grads(g);
    return g;
  }

  void add_param_grads(Gradients<Scalar>& out) const {
    for (const auto& [index, id] : param_nodes_) {
      const Matrix& gr = grad(id);
      if (gr.size() != 0) out[static_cast<std::size_t>(index)] += gr;
    }
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void(const Matrix&)> backward;
    bool needs_grad = false;
    int param = -1;
  };

  Var<Scalar> make(Matrix value, bool needs) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs;
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  const Parameters<Scalar>* params_;
  bool record_;
  std::deque<Node> nodes_;
  std::unordered_map<int, int> param_nodes_;
};

namespace detail {
inline void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}
}  // namespace detail

}  // namespace audiox::ad
