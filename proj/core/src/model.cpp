#include "sas/model.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "sas/corpus.hpp"
#include "sas/errors.hpp"
#include "sas/rng.hpp"

namespace sas::model {

using corpus::Vocabulary;
using nn::concat_cols;
using nn::matmul;
using nn::matmul_t;
using nn::row;

void ModelConfig::validate() const {
  if (visual_dim <= 0 || embed_dim <= 0 || attn_dim <= 0 || hidden_dim <= 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (layers < 1) throw ConfigError("model needs at least one recurrent layer");
  if (vocab_size < Vocabulary::kReserved) throw ConfigError("vocabulary is smaller than the reserved tokens");
  if (max_decode_len < 1) throw ConfigError("max_decode_len must be positive");
  if (headings < 1 || elevations < 1) throw ConfigError("panorama must have at least one slot");
}

ModelConfig ModelConfig::full_scale(Index vocab_size) {
  ModelConfig c;
  c.visual_dim = 2048;
  c.embed_dim = 300;
  c.attn_dim = 512;
  c.hidden_dim = 768;
  c.vocab_size = vocab_size;
  return c;
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"visual_dim", c.visual_dim}, {"embed_dim", c.embed_dim},
          {"attn_dim", c.attn_dim},     {"hidden_dim", c.hidden_dim},
          {"layers", c.layers},         {"vocab_size", c.vocab_size},
          {"max_decode_len", c.max_decode_len}, {"headings", c.headings},
          {"elevations", c.elevations}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.visual_dim = j.at("visual_dim");
    c.embed_dim = j.at("embed_dim");
    c.attn_dim = j.at("attn_dim");
    c.hidden_dim = j.at("hidden_dim");
    c.layers = j.at("layers");
    c.vocab_size = j.at("vocab_size");
    c.max_decode_len = j.value("max_decode_len", 100);
    c.headings = j.value("headings", 12);
    c.elevations = j.value("elevations", 3);
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("model config: ") + ex.what());
  }
  c.validate();
  return c;
}

Matrix heading_adjacency(int headings, int elevations) {
  const Index n = static_cast<Index>(headings) * elevations;
  Matrix a = Matrix::Zero(n, n);
  if (headings < 2) return a;
  for (int e = 0; e < elevations; ++e) {
    for (int h = 0; h < headings; ++h) {
      const Index i = e * headings + h;
      a(i, e * headings + (h + 1) % headings) = 1.0;
      a(i, e * headings + (h + headings - 1) % headings) = 1.0;
    }
  }
  return a;
}

SpeakerModel::SpeakerModel(const ModelConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), adjacency_(heading_adjacency(cfg.headings, cfg.elevations)) {
  cfg_.validate();
  Rng rng(seed);
  const Index dh = cfg_.hidden_dim;
  const Index dk = cfg_.attn_dim;
  auto& ps = params_;
  pano_fcs_ = nn::Linear(ps, "pano.fcs", cfg_.slot_feature_dim(), dk, rng);
  pano_q_ = nn::Linear(ps, "pano.q", 2 * dh, dk, rng);
  pano_k_ = nn::Linear(ps, "pano.k", dk, dk, rng);
  pano_v_ = nn::Linear(ps, "pano.v", dk, dh, rng);
  pano_b_adj_ = &ps.add("pano.b_adj", Matrix::Zero(1, 1));
  pano_g_ = nn::Linear(ps, "pano.g", 3 * dh, dh, rng);
  lstm_v_ = nn::LstmCell(ps, "lstm_v", dh, dh, rng);
  bilstm_a_ = nn::BiLstm(ps, "bilstm_a", 4, dh, cfg_.layers, rng);
  traj_q_ = nn::Linear(ps, "traj.q", 2 * dh, dk, rng);
  traj_k_ = nn::Linear(ps, "traj.k", dh, dk, rng);
  traj_mix_ = nn::Linear(ps, "traj.mix", 2 * dh, dh, rng);
  bilstm_va_ = nn::BiLstm(ps, "bilstm_va", 2 * dh, dh, cfg_.layers, rng);
  word_embed_ = nn::Embedding(ps, "dec.embed", cfg_.vocab_size, cfg_.embed_dim, rng);
  bridge_ = nn::Linear(ps, "dec.bridge", 2 * dh, dh, rng);
  lstm_x_ = nn::LstmCell(ps, "dec.lstm", cfg_.embed_dim, dh, rng);
  dec_q_ = nn::Linear(ps, "dec.q", dh, dk, rng);
  dec_k_ = nn::Linear(ps, "dec.k", 2 * dh, dk, rng);
  dec_val_ = nn::Linear(ps, "dec.val", 2 * dh, dh, rng);
  dec_fv_ = nn::Linear(ps, "dec.fv", dh, dh, rng);
  dec_out_ = nn::Linear(ps, "dec.out", 2 * dh, dh, rng);
  vocab_proj_ = nn::Linear(ps, "dec.vocab", dh, cfg_.vocab_size, rng);
}

PanoOutput SpeakerModel::pano_attend(Tape& t, Var fcs, Var h_a) const {
  if (fcs.rows() != cfg_.view_count() || fcs.cols() != cfg_.attn_dim) {
    throw ShapeError("pano_attend expects " + std::to_string(cfg_.view_count()) + " x " +
                     std::to_string(cfg_.attn_dim) + " projected slots");
  }
  if (h_a.rows() != 1 || h_a.cols() != 2 * cfg_.hidden_dim) throw ShapeError("pano_attend: bad action state");
  Var q = pano_q_(t, h_a);
  Var k = pano_k_(t, fcs);
  Var v = pano_v_(t, fcs);
  Var logits = nn::scale(matmul_t(q, k), 1.0 / std::sqrt(static_cast<double>(cfg_.attn_dim)));
  Var spread = matmul(logits, t.constant(adjacency_));
  logits = nn::add(logits, matmul(t.param(*pano_b_adj_), spread));
  Var w = nn::softmax_rows(logits);
  Var c = matmul(w, v);
  return {nn::tanh(pano_g_(t, concat_cols({c, h_a}))), w};
}

Var SpeakerModel::vision_action_attend(Tape& t, Var h_a, Var h_v, Var* weights) const {
  auto att = nn::scaled_dot_attention(traj_q_(t, h_a), traj_k_(t, h_v), h_v);
  if (weights) *weights = att.weights;
  return att.context;
}

EncoderOutput SpeakerModel::encode(Tape& t, const data::TrajectoryInput& traj) const {
  const Index steps = static_cast<Index>(traj.steps());
  if (steps == 0) throw EmptyTrajectory("cannot encode an empty trajectory");
  if (traj.actions.rows() != steps || traj.actions.cols() != 4) {
    throw ShapeError("trajectory needs one 4-d action per step");
  }
  const Index s = cfg_.view_count();
  const Index f = cfg_.slot_feature_dim();
  Matrix stacked(steps * s, f);
  for (Index i = 0; i < steps; ++i) {
    const Matrix& v = traj.views[static_cast<std::size_t>(i)];
    if (v.rows() != s || v.cols() != f) {
      throw ShapeError("view " + std::to_string(i) + " is " + std::to_string(v.rows()) + " x " +
                       std::to_string(v.cols()) + ", expected " + std::to_string(s) + " x " +
                       std::to_string(f));
    }
    stacked.middleRows(i * s, s) = v;
  }
  EncoderOutput out;
  out.action = bilstm_a_(t, t.constant(traj.actions));
  Var fcs = pano_fcs_(t, t.constant(std::move(stacked)));

  nn::LstmState state = lstm_v_.zero_state(t);
  std::vector<Var> hv;
  for (Index i = 0; i < steps; ++i) {
    auto pano = pano_attend(t, nn::slice_rows(fcs, i * s, s), row(out.action, i));
    out.pano_weights.push_back(pano.weights);
    state = lstm_v_(t, pano.g, state);
    hv.push_back(state.h);
  }
  out.visual = nn::concat_rows(hv);
  Var c_w = vision_action_attend(t, out.action, out.visual, &out.traj_weights);
  Var mixed = nn::tanh(traj_mix_(t, concat_cols({c_w, out.visual})));
  out.states = bilstm_va_(t, concat_cols({c_w, mixed}));
  out.summary = nn::mean_rows(out.visual);
  return out;
}

DecoderState SpeakerModel::init_decoder(Tape& t, const EncoderOutput& enc) const {
  DecoderState s;
  Var last = row(enc.states, enc.states.rows() - 1);
  s.lstm.h = nn::tanh(bridge_(t, last));
  s.lstm.c = t.constant(Matrix::Zero(1, cfg_.hidden_dim));
  s.keys = dec_k_(t, enc.states);
  s.values = dec_val_(t, enc.states);
  return s;
}

Var SpeakerModel::decoder_output(Tape& t, Var h_x, const DecoderState& s, Var* attention) const {
  auto att = nn::scaled_dot_attention(dec_q_(t, h_x), s.keys, s.values);
  if (attention) *attention = att.weights;
  Var out = nn::tanh(dec_out_(t, concat_cols({att.context, dec_fv_(t, h_x)})));
  return vocab_proj_(t, out);
}

namespace {
void check_token(int id, Index vocab) {
  if (id < 0 || id >= vocab) {
    throw VocabError("token id " + std::to_string(id) + " outside vocabulary of " +
                     std::to_string(vocab));
  }
}
}  // namespace

StepOutput SpeakerModel::decode_step(Tape& t, int prev_token, DecoderState& state) const {
  check_token(prev_token, cfg_.vocab_size);
  Var x = word_embed_(t, {prev_token});
  state.lstm = lstm_x_(t, x, state.lstm);
  StepOutput out;
  out.logits = decoder_output(t, state.lstm.h, state, &out.attention);
  return out;
}

DecoderOutput SpeakerModel::decode(Tape& t, const EncoderOutput& enc,
                                   const std::vector<int>& inputs) const {
  if (inputs.empty()) throw EmptyBatch("decode needs at least one input token");
  for (int id : inputs) check_token(id, cfg_.vocab_size);
  DecoderState s = init_decoder(t, enc);
  DecoderOutput out;
  out.hidden = nn::run_lstm(t, lstm_x_, word_embed_(t, inputs), false, &s.lstm);
  out.logits = decoder_output(t, out.hidden, s, &out.attention);
  return out;
}

Generation SpeakerModel::generate(const data::TrajectoryInput& traj, const DecodeMode& mode) const {
  Tape t;
  const auto enc = encode(t, traj);
  DecoderState state = init_decoder(t, enc);
  Rng rng(mode.seed);
  const int max_len = mode.max_len.value_or(cfg_.max_decode_len);
  Generation g;
  std::vector<Eigen::RowVectorXd> rows;
  int prev = Vocabulary::kBos;
  for (int step = 0; step < max_len; ++step) {
    auto out = decode_step(t, prev, state);
    Eigen::RowVectorXd z = out.logits.value().row(0) / mode.temperature;
    const double m = z.maxCoeff();
    const double lse = m + std::log((z.array() - m).exp().sum());
    int tok = 0;
    if (mode.sample) {
      std::vector<double> w(static_cast<std::size_t>(z.size()));
      for (Index i = 0; i < z.size(); ++i) w[static_cast<std::size_t>(i)] = std::exp(z[i] - m);
      tok = static_cast<int>(rng.categorical(w));
    } else {
      z.maxCoeff(&tok);
    }
    g.tokens.push_back(tok);
    g.log_probs.push_back(z[tok] - lse);
    rows.push_back(out.attention.value().row(0));
    prev = tok;
    if (tok == Vocabulary::kEos) break;
  }
  g.attention.resize(static_cast<Index>(rows.size()), enc.states.rows());
  for (std::size_t i = 0; i < rows.size(); ++i) g.attention.row(static_cast<Index>(i)) = rows[i];
  return g;
}

Rollout SpeakerModel::rollout(Tape& t, const EncoderOutput& enc, Rng& rng, int steps,
                              bool stop_at_eos, double temperature) const {
  if (steps < 1) throw ConfigError("rollout needs at least one step");
  DecoderState state = init_decoder(t, enc);
  Rollout r;
  std::vector<Var> logits, attention, picked;
  int prev = Vocabulary::kBos;
  for (int step = 0; step < steps; ++step) {
    r.inputs.push_back(prev);
    auto out = decode_step(t, prev, state);
    Var logp = nn::log_softmax_rows(nn::scale(out.logits, 1.0 / temperature));
    const auto& lp = logp.value();
    std::vector<double> w(static_cast<std::size_t>(lp.cols()));
    for (Index i = 0; i < lp.cols(); ++i) w[static_cast<std::size_t>(i)] = std::exp(lp(0, i));
    const int tok = static_cast<int>(rng.categorical(w));
    r.tokens.push_back(tok);
    logits.push_back(out.logits);
    attention.push_back(out.attention);
    picked.push_back(nn::pick(logp, {tok}));
    prev = tok;
    if (stop_at_eos && tok == Vocabulary::kEos) break;
  }
  r.logits = nn::concat_rows(logits);
  r.attention = nn::concat_rows(attention);
  r.log_prob_sum = nn::sum(nn::concat_rows(picked));
  return r;
}

std::vector<int> shift_right(const std::vector<int>& targets) {
  std::vector<int> in;
  in.reserve(targets.size());
  in.push_back(Vocabulary::kBos);
  for (std::size_t i = 0; i + 1 < targets.size(); ++i) in.push_back(targets[i]);
  return in;
}

std::size_t count_parameters(const nn::ParameterSet& params) {
  std::size_t n = 0;
  params.for_each([&](const nn::Parameter& p) {
    if (p.trainable) n += static_cast<std::size_t>(p.value.size());
  });
  return n;
}

std::map<std::string, std::size_t> parameter_ledger(const nn::ParameterSet& params) {
  std::map<std::string, std::size_t> ledger;
  params.for_each([&](const nn::Parameter& p) {
    if (!p.trainable) return;
    const auto dot = p.name.rfind('.');
    ledger[dot == std::string::npos ? p.name : p.name.substr(0, dot)] +=
        static_cast<std::size_t>(p.value.size());
  });
  return ledger;
}

}  // namespace sas::model
