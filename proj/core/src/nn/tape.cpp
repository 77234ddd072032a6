#include "sas/nn/tape.hpp"

#include <cmath>

#include "sas/errors.hpp"

namespace sas::nn {

namespace {

std::string shape_str(const Matrix& m) {
  return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

void require(bool ok, const char* op, const Matrix& a, const Matrix& b) {
  if (!ok) throw ShapeError(std::string(op) + ": " + shape_str(a) + " vs " + shape_str(b));
}

}  // namespace

// --- ParameterSet ---------------------------------------------------------------

Parameter& ParameterSet::add(const std::string& name, Matrix init, bool trainable) {
  if (index_.count(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  index_.emplace(name, params_.size());
  params_.push_back(std::make_unique<Parameter>(Parameter{name, std::move(init), trainable}));
  return *params_.back();
}

Parameter& ParameterSet::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return *params_[it->second];
}

const Parameter& ParameterSet::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return *params_[it->second];
}

const Parameter* ParameterSet::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : params_[it->second].get();
}

std::size_t ParameterSet::trainable_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (p->trainable) n += static_cast<std::size_t>(p->value.size());
  }
  return n;
}

// --- Var / Tape -----------------------------------------------------------------

const Matrix& Var::value() const { return tape_->value(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw ShapeError("scalar() on " + shape_str(v));
  return v(0, 0);
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, false});
  return {this, nodes_.size() - 1};
}

Var Tape::leaf(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, true});
  return {this, nodes_.size() - 1};
}

Var Tape::param(Parameter& p) {
  auto it = bound_.find(&p);
  if (it != bound_.end()) return {this, it->second};
  Var v = p.trainable ? leaf(p.value) : constant(p.value);
  bound_.emplace(&p, v.id());
  return v;
}

Var Tape::record(Matrix value, const std::vector<Var>& inputs, Backward backward) {
  bool needs = false;
  for (const auto& in : inputs) needs = needs || nodes_[in.id()].needs_grad;
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : Backward{}, needs});
  return {this, nodes_.size() - 1};
}

void Tape::accumulate(std::size_t id, const Matrix& g) { accumulate_expr(id, g); }

void Tape::backward(Var loss) {
  const Matrix& v = loss.value();
  if (v.rows() != 1 || v.cols() != 1) throw NonScalarLoss("loss has shape " + shape_str(v));
  for (auto& n : nodes_) n.grad.resize(0, 0);
  nodes_[loss.id()].grad = Matrix::Ones(1, 1);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || !n.backward || n.grad.size() == 0) continue;
    // Copy: the closure may accumulate into other nodes of the deque.
    const Matrix g = n.grad;
    n.backward(*this, g);
  }
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

GradMap Tape::gradients(const ParameterSet& params) const {
  GradMap out;
  params.for_each([&](const Parameter& p) {
    if (!p.trainable) return;
    auto it = bound_.find(&p);
    if (it == bound_.end() || nodes_[it->second].grad.size() == 0) {
      out.emplace(p.name, Matrix::Zero(p.value.rows(), p.value.cols()));
    } else {
      out.emplace(p.name, nodes_[it->second].grad);
    }
  });
  return out;
}

// --- ops ----------------------------------------------------------------------------

Var matmul(Var a, Var b) {
  Tape& t = *a.tape();
  require(a.cols() == b.rows(), "matmul", a.value(), b.value());
  const auto ia = a.id(), ib = b.id();
  return t.record(a.value() * b.value(), {a, b}, [ia, ib](Tape& t, const Matrix& g) {
    if (t.needs_grad(ia)) t.accumulate_expr(ia, g * t.value(ib).transpose());
    if (t.needs_grad(ib)) t.accumulate_expr(ib, t.value(ia).transpose() * g);
  });
}

Var matmul_t(Var a, Var b) {
  Tape& t = *a.tape();
  require(a.cols() == b.cols(), "matmul_t", a.value(), b.value());
  const auto ia = a.id(), ib = b.id();
  return t.record(a.value() * b.value().transpose(), {a, b}, [ia, ib](Tape& t, const Matrix& g) {
    if (t.needs_grad(ia)) t.accumulate_expr(ia, g * t.value(ib));
    if (t.needs_grad(ib)) t.accumulate_expr(ib, g.transpose() * t.value(ia));
  });
}

Var transpose(Var a) {
  Tape& t = *a.tape();
  const auto ia = a.id();
  return t.record(a.value().transpose(), {a},
                  [ia](Tape& t, const Matrix& g) { t.accumulate_expr(ia, g.transpose()); });
}

Var add(Var a, Var b) {
  Tape& t = *a.tape();
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  const auto ia = a.id(), ib = b.id();
  if (av.rows() == bv.rows() && av.cols() == bv.cols()) {
    return t.record(av + bv, {a, b}, [ia, ib](Tape& t, const Matrix& g) {
      t.accumulate_expr(ia, g);
      t.accumulate_expr(ib, g);
    });
  }
  if (bv.rows() == 1 && bv.cols() == av.cols()) {
    Matrix out = av.rowwise() + bv.row(0);
    return t.record(std::move(out), {a, b}, [ia, ib](Tape& t, const Matrix& g) {
      t.accumulate_expr(ia, g);
      if (t.needs_grad(ib)) t.accumulate_expr(ib, g.colwise().sum());
    });
  }
  if (bv.rows() == 1 && bv.cols() == 1) {
    Matrix out = av.array() + bv(0, 0);
    return t.record(std::move(out), {a, b}, [ia, ib](Tape& t, const Matrix& g) {
      t.accumulate_expr(ia, g);
      if (t.needs_grad(ib)) t.accumulate_expr(ib, Matrix::Constant(1, 1, g.sum()));
    });
  }
  require(false, "add", av, bv);
  return {};
}

Var sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

Var mul(Var a, Var b) {
  Tape& t = *a.tape();
  require(a.rows() == b.rows() && a.cols() == b.cols(), "mul", a.value(), b.value());
  const auto ia = a.id(), ib = b.id();
  return t.record(a.value().cwiseProduct(b.value()), {a, b}, [ia, ib](Tape& t, const Matrix& g) {
    if (t.needs_grad(ia)) t.accumulate_expr(ia, g.cwiseProduct(t.value(ib)));
    if (t.needs_grad(ib)) t.accumulate_expr(ib, g.cwiseProduct(t.value(ia)));
  });
}

Var scale(Var a, double s) {
  Tape& t = *a.tape();
  const auto ia = a.id();
  return t.record(a.value() * s, {a},
                  [ia, s](Tape& t, const Matrix& g) { t.accumulate_expr(ia, g * s); });
}

Var add_scalar(Var a, double s) {
  Tape& t = *a.tape();
  const auto ia = a.id();
  Matrix out = a.value().array() + s;
  return t.record(std::move(out), {a}, [ia](Tape& t, const Matrix& g) { t.accumulate_expr(ia, g); });
}

Var scalar_times(Var s, const Matrix& m) {
  Tape& t = *s.tape();
  if (s.rows() != 1 || s.cols() != 1) throw ShapeError("scalar_times needs a 1x1 scalar");
  const auto is = s.id();
  return t.record(m * s.scalar(), {s}, [is, m](Tape& t, const Matrix& g) {
    t.accumulate_expr(is, Matrix::Constant(1, 1, g.cwiseProduct(m).sum()));
  });
}

Var mul_const(Var a, const Matrix& m) {
  Tape& t = *a.tape();
  require(a.rows() == m.rows() && a.cols() == m.cols(), "mul_const", a.value(), m);
  const auto ia = a.id();
  return t.record(a.value().cwiseProduct(m), {a},
                  [ia, m](Tape& t, const Matrix& g) { t.accumulate_expr(ia, g.cwiseProduct(m)); });
}

Var tanh(Var a) {
  Tape& t = *a.tape();
  const auto ia = a.id();
  Matrix y = a.value().array().tanh();
  const auto iy = t.size();
  return t.record(std::move(y), {a}, [ia, iy](Tape& t, const Matrix& g) {
    const Matrix& y = t.value(iy);
    t.accumulate_expr(ia, g.cwiseProduct((1.0 - y.array().square()).matrix()));
  });
}

Var sigmoid(Var a) {
  Tape& t = *a.tape();
  const auto ia = a.id();
  Matrix y = (1.0 + (-a.value().array()).exp()).inverse();
  const auto iy = t.size();
  return t.record(std::move(y), {a}, [ia, iy](Tape& t, const Matrix& g) {
    const Matrix& y = t.value(iy);
    t.accumulate_expr(ia, (g.array() * y.array() * (1.0 - y.array())).matrix());
  });
}

Var relu(Var a) {
  Tape& t = *a.tape();
  const auto ia = a.id();
  Matrix y = a.value().cwiseMax(0.0);
  return t.record(std::move(y), {a}, [ia](Tape& t, const Matrix& g) {
    const Matrix& x = t.value(ia);
    t.accumulate_expr(ia, (x.array() > 0.0).select(g.array(), 0.0).matrix());
  });
}

Var exp(Var a) {
  Tape& t = *a.tape();
  const auto ia = a.id();
  Matrix y = a.value().array().exp();
  const auto iy = t.size();
  return t.record(std::move(y), {a}, [ia, iy](Tape& t, const Matrix& g) {
    t.accumulate_expr(ia, g.cwiseProduct(t.value(iy)));
  });
}

Var log(Var a) {
  Tape& t = *a.tape();
  const auto ia = a.id();
  Matrix y = a.value().array().log();
  return t.record(std::move(y), {a}, [ia](Tape& t, const Matrix& g) {
    t.accumulate_expr(ia, g.cwiseQuotient(t.value(ia)));
  });
}

Var clamp(Var a, double lo, double hi) {
  Tape& t = *a.tape();
  const auto ia = a.id();
  Matrix y = a.value().cwiseMax(lo).cwiseMin(hi);
  return t.record(std::move(y), {a}, [ia, lo, hi](Tape& t, const Matrix& g) {
    const Matrix& x = t.value(ia);
    t.accumulate_expr(ia, (x.array() >= lo && x.array() <= hi).select(g.array(), 0.0).matrix());
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols of nothing");
  Tape& t = *parts.front().tape();
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const auto& p : parts) {
    require(p.rows() == rows, "concat_cols", parts.front().value(), p.value());
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<std::size_t, Index>> spans;
  Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    spans.emplace_back(p.id(), at);
    at += p.cols();
  }
  return t.record(std::move(out), parts, [spans](Tape& t, const Matrix& g) {
    for (const auto& [id, start] : spans) {
      if (t.needs_grad(id)) t.accumulate_expr(id, g.middleCols(start, t.value(id).cols()));
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows of nothing");
  Tape& t = *parts.front().tape();
  const Index cols = parts.front().cols();
  Index rows = 0;
  for (const auto& p : parts) {
    require(p.cols() == cols, "concat_rows", parts.front().value(), p.value());
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<std::size_t, Index>> spans;
  Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    spans.emplace_back(p.id(), at);
    at += p.rows();
  }
  return t.record(std::move(out), parts, [spans](Tape& t, const Matrix& g) {
    for (const auto& [id, start] : spans) {
      if (t.needs_grad(id)) t.accumulate_expr(id, g.middleRows(start, t.value(id).rows()));
    }
  });
}

Var slice_cols(Var a, Index start, Index count) {
  Tape& t = *a.tape();
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw ShapeError("slice_cols out of range on " + shape_str(a.value()));
  }
  const auto ia = a.id();
  return t.record(a.value().middleCols(start, count), {a}, [ia, start](Tape& t, const Matrix& g) {
    Matrix full = Matrix::Zero(t.value(ia).rows(), t.value(ia).cols());
    full.middleCols(start, g.cols()) = g;
    t.accumulate(ia, full);
  });
}

Var slice_rows(Var a, Index start, Index count) {
  Tape& t = *a.tape();
  if (start < 0 || count < 0 || start + count > a.rows()) {
    throw ShapeError("slice_rows out of range on " + shape_str(a.value()));
  }
  const auto ia = a.id();
  return t.record(a.value().middleRows(start, count), {a}, [ia, start](Tape& t, const Matrix& g) {
    Matrix full = Matrix::Zero(t.value(ia).rows(), t.value(ia).cols());
    full.middleRows(start, g.rows()) = g;
    t.accumulate(ia, full);
  });
}

Var row(Var a, Index i) { return slice_rows(a, i, 1); }

Var gather_rows(Var a, const std::vector<int>& rows) {
  Tape& t = *a.tape();
  const Matrix& av = a.value();
  Matrix out(static_cast<Index>(rows.size()), av.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= av.rows()) throw ShapeError("gather_rows index out of range");
    out.row(static_cast<Index>(r)) = av.row(rows[r]);
  }
  const auto ia = a.id();
  return t.record(std::move(out), {a}, [ia, rows](Tape& t, const Matrix& g) {
    Matrix full = Matrix::Zero(t.value(ia).rows(), t.value(ia).cols());
    for (std::size_t r = 0; r < rows.size(); ++r) full.row(rows[r]) += g.row(static_cast<Index>(r));
    t.accumulate(ia, full);
  });
}

Var pick(Var a, const std::vector<int>& cols) {
  Tape& t = *a.tape();
  const Matrix& av = a.value();
  if (static_cast<Index>(cols.size()) != av.rows()) throw ShapeError("pick needs one column per row");
  Matrix out(av.rows(), 1);
  for (Index r = 0; r < av.rows(); ++r) {
    const int c = cols[static_cast<std::size_t>(r)];
    if (c < 0 || c >= av.cols()) throw ShapeError("pick column out of range");
    out(r, 0) = av(r, c);
  }
  const auto ia = a.id();
  return t.record(std::move(out), {a}, [ia, cols](Tape& t, const Matrix& g) {
    Matrix full = Matrix::Zero(t.value(ia).rows(), t.value(ia).cols());
    for (Index r = 0; r < full.rows(); ++r) full(r, cols[static_cast<std::size_t>(r)]) = g(r, 0);
    t.accumulate(ia, full);
  });
}

Var sum(Var a) {
  Tape& t = *a.tape();
  const auto ia = a.id();
  return t.record(Matrix::Constant(1, 1, a.value().sum()), {a}, [ia](Tape& t, const Matrix& g) {
    t.accumulate(ia, Matrix::Constant(t.value(ia).rows(), t.value(ia).cols(), g(0, 0)));
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw ShapeError("mean of empty matrix");
  return scale(sum(a), 1.0 / n);
}

Var mean_rows(Var a) {
  Tape& t = *a.tape();
  const auto ia = a.id();
  const double n = static_cast<double>(a.rows());
  if (n == 0) throw ShapeError("mean_rows of empty matrix");
  Matrix out = a.value().colwise().sum() / n;
  return t.record(std::move(out), {a}, [ia, n](Tape& t, const Matrix& g) {
    Matrix full = g.replicate(t.value(ia).rows(), 1) / n;
    t.accumulate(ia, full);
  });
}

Var softmax_rows(Var a) {
  Tape& t = *a.tape();
  const auto ia = a.id();
  const Matrix& x = a.value();
  Matrix y(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - m).exp();
    y.row(r) /= y.row(r).sum();
  }
  const auto iy = t.size();
  return t.record(std::move(y), {a}, [ia, iy](Tape& t, const Matrix& g) {
    const Matrix& y = t.value(iy);
    Matrix dx(y.rows(), y.cols());
    for (Index r = 0; r < y.rows(); ++r) {
      const double dot = g.row(r).dot(y.row(r));
      dx.row(r) = y.row(r).cwiseProduct((g.row(r).array() - dot).matrix());
    }
    t.accumulate(ia, dx);
  });
}

Var log_softmax_rows(Var a) {
  Tape& t = *a.tape();
  const auto ia = a.id();
  const Matrix& x = a.value();
  Matrix y(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    const double lse = m + std::log((x.row(r).array() - m).exp().sum());
    y.row(r) = x.row(r).array() - lse;
  }
  const auto iy = t.size();
  return t.record(std::move(y), {a}, [ia, iy](Tape& t, const Matrix& g) {
    const Matrix& y = t.value(iy);
    Matrix dx(y.rows(), y.cols());
    for (Index r = 0; r < y.rows(); ++r) {
      dx.row(r) = g.row(r) - y.row(r).array().exp().matrix() * g.row(r).sum();
    }
    t.accumulate(ia, dx);
  });
}

Var unfold(Var a, Index width) {
  Tape& t = *a.tape();
  const Matrix& x = a.value();
  if (width < 1 || x.rows() < width) {
    throw SequenceTooShort("unfold width " + std::to_string(width) + " over " +
                           std::to_string(x.rows()) + " rows");
  }
  const Index d = x.cols();
  const Index n = x.rows() - width + 1;
  Matrix out(n, width * d);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < width; ++k) out.block(i, k * d, 1, d) = x.row(i + k);
  }
  const auto ia = a.id();
  return t.record(std::move(out), {a}, [ia, width, d, n](Tape& t, const Matrix& g) {
    Matrix full = Matrix::Zero(t.value(ia).rows(), d);
    for (Index i = 0; i < n; ++i) {
      for (Index k = 0; k < width; ++k) full.row(i + k) += g.block(i, k * d, 1, d);
    }
    t.accumulate(ia, full);
  });
}

}  // namespace sas::nn
