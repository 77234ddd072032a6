#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sas/nn/tape.hpp"
#include "sas/rng.hpp"

namespace sas::nn {

/// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)).
Matrix uniform_init(Index rows, Index cols, Index fan_in, Rng& rng);

/// y = x W^T + b, W is out x in and b is 1 x out.
Var linear(Var x, Var w, Var b);
Var linear(Var x, Var w);

struct Linear {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;

  Linear() = default;
  Linear(ParameterSet& ps, const std::string& name, Index in, Index out, Rng& rng,
         bool with_bias = true);
  Var operator()(Tape& t, Var x) const;
  Index in() const { return weight->value.cols(); }
  Index out() const { return weight->value.rows(); }
};

struct Embedding {
  Parameter* table = nullptr;

  Embedding() = default;
  Embedding(ParameterSet& ps, const std::string& name, Index vocab, Index dim, Rng& rng);
  Var operator()(Tape& t, const std::vector<int>& ids) const;
};

struct LstmState {
  Var h;
  Var c;
};

/// Gate layout along the 4D axis: input, forget, cell candidate, output.
struct LstmCell {
  Parameter* weight = nullptr;  // 4D x (in + D)
  Parameter* bias = nullptr;    // 1 x 4D
  Index input_dim = 0;
  Index hidden = 0;

  LstmCell() = default;
  LstmCell(ParameterSet& ps, const std::string& name, Index in, Index hidden_dim, Rng& rng);
  LstmState operator()(Tape& t, Var x, const LstmState& prev) const;
  LstmState zero_state(Tape& t) const;
};

/// Functional LSTM step on explicit weights; rows of x/h/c are batch entries.
LstmState lstm_step(Var x, const LstmState& prev, Var weight, Var bias);

/// Runs a cell over the rows of `xs`; returns T x D hidden states.
Var run_lstm(Tape& t, const LstmCell& cell, Var xs, bool reverse = false,
             const LstmState* init = nullptr);

/// Stacked bidirectional LSTM: T x Din -> T x 2D (forward half first).
struct BiLstm {
  std::vector<std::pair<LstmCell, LstmCell>> layers;  // (forward, backward)

  BiLstm() = default;
  BiLstm(ParameterSet& ps, const std::string& name, Index in, Index hidden_dim, int num_layers,
         Rng& rng);
  Var operator()(Tape& t, Var xs) const;
  Index hidden() const { return layers.front().first.hidden; }
};

struct GruCell {
  Parameter* weight_gates = nullptr;  // 2D x (in + D): update, reset
  Parameter* bias_gates = nullptr;
  Parameter* weight_cand = nullptr;   // D x (in + D)
  Parameter* bias_cand = nullptr;
  Index hidden = 0;

  GruCell() = default;
  GruCell(ParameterSet& ps, const std::string& name, Index in, Index hidden_dim, Rng& rng);
  Var operator()(Tape& t, Var x, Var h) const;
};

struct Attention {
  Var context;  // rows(Q) x Dv
  Var weights;  // rows(Q) x n
};

/// softmax(Q K^T / sqrt(Dk) + bias) V, row-wise. `bias` is optional (invalid Var).
Attention scaled_dot_attention(Var q, Var k, Var v, Var bias = {});

/// Valid-mode convolution per width, ReLU, mean-pool over positions, concat.
struct Conv1dSeq {
  std::vector<std::pair<Index, Linear>> filters;  // (width, projection of the unfolded window)

  Conv1dSeq() = default;
  Conv1dSeq(ParameterSet& ps, const std::string& name, Index in, Index filters_per_width,
            const std::vector<Index>& widths, Rng& rng);
  Var operator()(Tape& t, Var xs) const;
  Index max_width() const;
  Index out_dim() const;
};

}  // namespace sas::nn
