#pragma once

// The speaker network: panoramic room-object attention, the trajectory
// encoder and the attentive instruction decoder.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sas/dataset.hpp"
#include "sas/nn/layers.hpp"
#include "sas/nn/tape.hpp"
#include "sas/rng.hpp"

namespace sas::model {

using nn::Index;
using nn::Matrix;
using nn::Tape;
using nn::Var;

struct ModelConfig {
  Index visual_dim = 64;   // V
  Index embed_dim = 32;    // G, also the word embedding width
  Index attn_dim = 64;     // D_k
  Index hidden_dim = 64;   // D_h
  int layers = 2;
  Index vocab_size = 0;
  int max_decode_len = 100;
  int headings = 12;
  int elevations = 3;

  Index view_count() const { return static_cast<Index>(headings) * elevations; }
  Index slot_feature_dim() const { return visual_dim + 7 * embed_dim + 4; }
  void validate() const;

  /// V=2048, G=300, D_k=512, D_h=768.
  static ModelConfig full_scale(Index vocab_size);
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct PanoOutput {
  Var g;        // 1 x D_h
  Var weights;  // 1 x S
};

struct EncoderOutput {
  Var states;   // T x 2D_h, the vision-action states
  Var visual;   // T x D_h
  Var action;   // T x 2D_h
  Var summary;  // 1 x D_h, mean of the visual states
  std::vector<Var> pano_weights;
  Var traj_weights;  // T x T
};

struct DecoderOutput {
  Var logits;     // L x |vocab|
  Var attention;  // L x T
  Var hidden;     // L x D_h
};

struct DecoderState {
  nn::LstmState lstm;
  Var keys;    // T x D_k
  Var values;  // T x D_h
};

struct StepOutput {
  Var logits;     // 1 x |vocab|
  Var attention;  // 1 x T
};

struct DecodeMode {
  bool sample = false;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  std::optional<int> max_len;

  static DecodeMode greedy() { return {}; }
  static DecodeMode sampling(std::uint64_t seed, double temperature = 1.0) {
    return {true, temperature, seed, std::nullopt};
  }
};

/// Decoding on a live tape: each input is a token drawn from the previous
/// step's distribution.
struct Rollout {
  std::vector<int> tokens;  // drawn outputs, one per step
  std::vector<int> inputs;  // tokens fed to the decoder (BOS first)
  Var logits;               // steps x |vocab|
  Var attention;            // steps x T
  Var log_prob_sum;         // 1 x 1, sum of log p(tokens)
};

struct Generation {
  std::vector<int> tokens;  // includes the EOS if one was emitted
  Matrix attention;         // L x T
  std::vector<double> log_probs;
};

/// Heading-adjacency of the S panorama slots (same elevation, headings differ by one).
Matrix heading_adjacency(int headings, int elevations);

class SpeakerModel {
 public:
  SpeakerModel(const ModelConfig& cfg, std::uint64_t seed);
  SpeakerModel(SpeakerModel&&) = default;
  SpeakerModel& operator=(SpeakerModel&&) = default;

  const ModelConfig& config() const { return cfg_; }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }

  PanoOutput pano_attend(Tape& t, Var fcs, Var h_a) const;
  EncoderOutput encode(Tape& t, const data::TrajectoryInput& traj) const;

  DecoderState init_decoder(Tape& t, const EncoderOutput& enc) const;
  StepOutput decode_step(Tape& t, int prev_token, DecoderState& state) const;
  /// Teacher-forced pass: `inputs` are the previous tokens (BOS first).
  DecoderOutput decode(Tape& t, const EncoderOutput& enc, const std::vector<int>& inputs) const;

  Generation generate(const data::TrajectoryInput& traj, const DecodeMode& mode) const;

  /// Samples `steps` tokens (stopping after EOS when `stop_at_eos`).
  Rollout rollout(Tape& t, const EncoderOutput& enc, Rng& rng, int steps, bool stop_at_eos,
                  double temperature = 1.0) const;

 private:
  Var vision_action_attend(Tape& t, Var h_a, Var h_v, Var* weights) const;
  Var decoder_output(Tape& t, Var h_x, const DecoderState& s, Var* attention) const;

  ModelConfig cfg_;
  nn::ParameterSet params_;
  Matrix adjacency_;

  nn::Linear pano_fcs_, pano_q_, pano_k_, pano_v_, pano_g_;
  nn::Parameter* pano_b_adj_ = nullptr;
  nn::LstmCell lstm_v_;
  nn::BiLstm bilstm_a_;
  nn::Linear traj_q_, traj_k_, traj_mix_;
  nn::BiLstm bilstm_va_;
  nn::Embedding word_embed_;
  nn::Linear bridge_;
  nn::LstmCell lstm_x_;
  nn::Linear dec_q_, dec_k_, dec_val_, dec_fv_, dec_out_, vocab_proj_;
};

/// Teacher-forcing inputs for a target sequence: BOS then all but the last target.
std::vector<int> shift_right(const std::vector<int>& targets);

std::size_t count_parameters(const nn::ParameterSet& params);

/// Trainable scalars grouped by layer (parameter name without its last component).
std::map<std::string, std::size_t> parameter_ledger(const nn::ParameterSet& params);

}  // namespace sas::model
