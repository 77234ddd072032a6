#pragma once

// Reverse-mode automatic differentiation over dense row-major matrices.
//
// A Tape records every operation of one forward pass. Values are Eigen
// matrices of doubles; sequences are stored one timestep per row. Calling
// backward() on a 1x1 result propagates gradients to every node created with
// requires-grad semantics (leaves and bound parameters).

#include <Eigen/Core>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace sas::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

struct Parameter {
  std::string name;
  Matrix value;
  bool trainable = true;
};

/// Owns model parameters in registration order. Addresses are stable.
class ParameterSet {
 public:
  Parameter& add(const std::string& name, Matrix init, bool trainable = true);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  const Parameter* find(const std::string& name) const;
  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }
  std::size_t trainable_count() const;

  template <typename F>
  void for_each(F&& f) {
    for (auto& p : params_) f(*p);
  }
  template <typename F>
  void for_each(F&& f) const {
    for (const auto& p : params_) f(static_cast<const Parameter&>(*p));
  }

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

using GradMap = std::map<std::string, Matrix>;

class Tape;

/// Handle to a node on a tape. Cheap to copy.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  double scalar() const;
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// A leaf that receives gradients; read them back with grad().
  Var leaf(Matrix value);
  /// Binds a parameter; repeated binds of the same parameter share one node.
  /// Non-trainable parameters are bound as constants.
  Var param(Parameter& p);

  /// Records an op. `inputs` decide whether the result needs a gradient.
  Var record(Matrix value, const std::vector<Var>& inputs, Backward backward);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  /// Accumulates into a node's gradient buffer (allocated on first use).
  void accumulate(std::size_t id, const Matrix& g);
  template <typename Expr>
  void accumulate_expr(std::size_t id, const Expr& g) {
    auto& n = nodes_[id];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  /// Throws NonScalarLoss unless `loss` is 1x1.
  void backward(Var loss);
  /// Gradient of a leaf or bound parameter after backward(); zeros if none flowed.
  Matrix grad(Var v) const;
  /// Gradients for every trainable parameter of `params`, zeros for unused ones.
  GradMap gradients(const ParameterSet& params) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    bool needs_grad = false;
  };
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> bound_;
};

// --- operations ---------------------------------------------------------------

Var matmul(Var a, Var b);    // a * b
Var matmul_t(Var a, Var b);  // a * b^T
Var transpose(Var a);
/// Elementwise sum; `b` may also be a 1 x cols row (broadcast over rows) or 1x1.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise, same shape
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
/// s (1x1) times a constant matrix.
Var scalar_times(Var s, const Matrix& m);
Var mul_const(Var a, const Matrix& m);  // elementwise by a constant
Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var exp(Var a);
Var log(Var a);
/// Clamp with pass-through gradient inside [lo, hi] and zero outside.
Var clamp(Var a, double lo, double hi);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(Var a, Index start, Index count);
Var slice_rows(Var a, Index start, Index count);
Var row(Var a, Index i);
/// Gathers whole rows by index (embedding lookup).
Var gather_rows(Var a, const std::vector<int>& rows);
/// Picks a[r, cols[r]] for every row r; result is rows x 1.
Var pick(Var a, const std::vector<int>& cols);
Var sum(Var a);
Var mean(Var a);
/// Column-wise mean over rows: rows x c -> 1 x c.
Var mean_rows(Var a);
Var softmax_rows(Var a);
Var log_softmax_rows(Var a);
/// Sliding windows of `width` rows flattened into one row each:
/// L x D -> (L - width + 1) x (width * D).
Var unfold(Var a, Index width);

// Operator sugar.
inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

}  // namespace sas::nn
