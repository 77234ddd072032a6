#include "sas/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "sas/errors.hpp"

namespace sas::nn {

Matrix uniform_init(Index rows, Index cols, Index fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Index>(fan_in, 1)));
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  return m;
}

Var linear(Var x, Var w, Var b) {
  if (x.cols() != w.cols()) {
    throw ShapeError("linear: input has " + std::to_string(x.cols()) + " columns, weight expects " +
                     std::to_string(w.cols()));
  }
  if (b.rows() != 1 || b.cols() != w.rows()) throw ShapeError("linear: bias shape mismatch");
  return add(matmul_t(x, w), b);
}

Var linear(Var x, Var w) {
  if (x.cols() != w.cols()) throw ShapeError("linear: input/weight column mismatch");
  return matmul_t(x, w);
}

Linear::Linear(ParameterSet& ps, const std::string& name, Index in, Index out, Rng& rng,
               bool with_bias) {
  weight = &ps.add(name + ".weight", uniform_init(out, in, in, rng));
  if (with_bias) bias = &ps.add(name + ".bias", Matrix::Zero(1, out));
}

Var Linear::operator()(Tape& t, Var x) const {
  return bias ? linear(x, t.param(*weight), t.param(*bias)) : linear(x, t.param(*weight));
}

Embedding::Embedding(ParameterSet& ps, const std::string& name, Index vocab, Index dim, Rng& rng) {
  Matrix m(vocab, dim);
  const double s = 1.0 / std::sqrt(static_cast<double>(dim));
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal() * s;
  table = &ps.add(name + ".table", std::move(m));
}

Var Embedding::operator()(Tape& t, const std::vector<int>& ids) const {
  return gather_rows(t.param(*table), ids);
}

LstmCell::LstmCell(ParameterSet& ps, const std::string& name, Index in, Index hidden_dim, Rng& rng)
    : input_dim(in), hidden(hidden_dim) {
  weight = &ps.add(name + ".weight", uniform_init(4 * hidden_dim, in + hidden_dim, in + hidden_dim, rng));
  Matrix b = Matrix::Zero(1, 4 * hidden_dim);
  b.middleCols(hidden_dim, hidden_dim).setConstant(1.0);  // forget gate
  bias = &ps.add(name + ".bias", std::move(b));
}

LstmState lstm_step(Var x, const LstmState& prev, Var weight, Var bias) {
  const Index d = prev.h.cols();
  if (weight.rows() != 4 * d || weight.cols() != x.cols() + d) {
    throw ShapeError("lstm_step: weight must be 4D x (in + D)");
  }
  Var z = linear(concat_cols({x, prev.h}), weight, bias);
  Var i = sigmoid(slice_cols(z, 0, d));
  Var f = sigmoid(slice_cols(z, d, d));
  Var g = tanh(slice_cols(z, 2 * d, d));
  Var o = sigmoid(slice_cols(z, 3 * d, d));
  Var c = add(mul(f, prev.c), mul(i, g));
  Var h = mul(o, tanh(c));
  return {h, c};
}

LstmState LstmCell::operator()(Tape& t, Var x, const LstmState& prev) const {
  if (x.cols() != input_dim) {
    throw ShapeError("lstm cell expects input dim " + std::to_string(input_dim) + ", got " +
                     std::to_string(x.cols()));
  }
  return lstm_step(x, prev, t.param(*weight), t.param(*bias));
}

LstmState LstmCell::zero_state(Tape& t) const {
  return {t.constant(Matrix::Zero(1, hidden)), t.constant(Matrix::Zero(1, hidden))};
}

Var run_lstm(Tape& t, const LstmCell& cell, Var xs, bool reverse, const LstmState* init) {
  const Index steps = xs.rows();
  if (steps < 1) throw ShapeError("run_lstm over an empty sequence");
  LstmState s = init ? *init : cell.zero_state(t);
  std::vector<Var> out(static_cast<std::size_t>(steps));
  for (Index k = 0; k < steps; ++k) {
    const Index idx = reverse ? steps - 1 - k : k;
    s = cell(t, row(xs, idx), s);
    out[static_cast<std::size_t>(idx)] = s.h;
  }
  return concat_rows(out);
}

BiLstm::BiLstm(ParameterSet& ps, const std::string& name, Index in, Index hidden_dim,
               int num_layers, Rng& rng) {
  if (num_layers < 1) throw ConfigError("BiLSTM needs at least one layer");
  Index layer_in = in;
  for (int l = 0; l < num_layers; ++l) {
    const std::string p = name + ".l" + std::to_string(l);
    LstmCell fwd(ps, p + ".fwd", layer_in, hidden_dim, rng);
    LstmCell bwd(ps, p + ".bwd", layer_in, hidden_dim, rng);
    layers.emplace_back(fwd, bwd);
    layer_in = 2 * hidden_dim;
  }
}

Var BiLstm::operator()(Tape& t, Var xs) const {
  Var h = xs;
  for (const auto& [fwd, bwd] : layers) {
    h = concat_cols({run_lstm(t, fwd, h, false), run_lstm(t, bwd, h, true)});
  }
  return h;
}

GruCell::GruCell(ParameterSet& ps, const std::string& name, Index in, Index hidden_dim, Rng& rng)
    : hidden(hidden_dim) {
  weight_gates = &ps.add(name + ".gates.weight",
                         uniform_init(2 * hidden_dim, in + hidden_dim, in + hidden_dim, rng));
  bias_gates = &ps.add(name + ".gates.bias", Matrix::Zero(1, 2 * hidden_dim));
  weight_cand = &ps.add(name + ".cand.weight",
                        uniform_init(hidden_dim, in + hidden_dim, in + hidden_dim, rng));
  bias_cand = &ps.add(name + ".cand.bias", Matrix::Zero(1, hidden_dim));
}

Var GruCell::operator()(Tape& t, Var x, Var h) const {
  const Index d = hidden;
  Var gates = sigmoid(linear(concat_cols({x, h}), t.param(*weight_gates), t.param(*bias_gates)));
  Var z = slice_cols(gates, 0, d);
  Var r = slice_cols(gates, d, d);
  Var cand = tanh(linear(concat_cols({x, mul(r, h)}), t.param(*weight_cand), t.param(*bias_cand)));
  // h' = (1 - z) * h + z * cand
  return add(h, mul(z, sub(cand, h)));
}

Attention scaled_dot_attention(Var q, Var k, Var v, Var bias) {
  if (q.cols() != k.cols()) throw ShapeError("attention: query/key width mismatch");
  if (k.rows() != v.rows()) throw ShapeError("attention: key/value count mismatch");
  if (k.rows() < 1) throw ShapeError("attention over zero keys");
  Var logits = scale(matmul_t(q, k), 1.0 / std::sqrt(static_cast<double>(k.cols())));
  if (bias.valid()) logits = add(logits, bias);
  Var w = softmax_rows(logits);
  return {matmul(w, v), w};
}

Conv1dSeq::Conv1dSeq(ParameterSet& ps, const std::string& name, Index in, Index filters_per_width,
                     const std::vector<Index>& widths, Rng& rng) {
  for (Index w : widths) {
    filters.emplace_back(w, Linear(ps, name + ".w" + std::to_string(w), w * in, filters_per_width, rng));
  }
}

Var Conv1dSeq::operator()(Tape& t, Var xs) const {
  if (xs.rows() < max_width()) {
    throw SequenceTooShort("sequence of " + std::to_string(xs.rows()) +
                           " rows shorter than widest filter " + std::to_string(max_width()));
  }
  std::vector<Var> pooled;
  for (const auto& [width, proj] : filters) {
    pooled.push_back(mean_rows(relu(proj(t, unfold(xs, width)))));
  }
  return concat_cols(pooled);
}

Index Conv1dSeq::max_width() const {
  Index m = 0;
  for (const auto& f : filters) m = std::max(m, f.first);
  return m;
}

Index Conv1dSeq::out_dim() const {
  Index n = 0;
  for (const auto& f : filters) n += f.second.out();
  return n;
}

}  // namespace sas::nn
