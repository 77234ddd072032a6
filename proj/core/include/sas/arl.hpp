#pragma once

// Adversarial reward learning: reward models over (instruction, trajectory)
// pairs, the policy-gradient speaker update and the alternation schedule.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sas/corpus.hpp"
#include "sas/features.hpp"
#include "sas/model.hpp"
#include "sas/nn/layers.hpp"
#include "sas/nn/optim.hpp"
#include "sas/train.hpp"

namespace sas::arl {

using nn::Index;
using nn::Matrix;
using nn::Tape;
using nn::Var;

enum class RewardKind { kCnn, kGru };
std::string to_string(RewardKind k);
RewardKind parse_reward_kind(const std::string& s);

struct RewardModelConfig {
  RewardKind kind = RewardKind::kCnn;
  Index embed_dim = 32;
  Index visual_dim = 64;
  std::vector<Index> widths{3, 4, 5};
  Index filters = 16;
  Index hidden_dim = 64;
  void validate() const;
};

class RewardModel {
 public:
  RewardModel(const RewardModelConfig& cfg, std::uint64_t seed);
  RewardModel(RewardModel&&) = default;
  RewardModel& operator=(RewardModel&&) = default;

  const RewardModelConfig& config() const { return cfg_; }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }

  /// Reward in (0, 1). `embedding` is L x G, `visual` holds per-step visual states (T x V).
  Var score(Tape& t, const Matrix& embedding, const Matrix& visual) const;
  double score(const Matrix& embedding, const Matrix& visual) const;
  /// Shortest instruction the model accepts.
  Index min_length() const;

 private:
  Var cnn(Tape& t, const Matrix& embedding, const Matrix& visual) const;
  Var gru(Tape& t, const Matrix& embedding, const Matrix& visual) const;

  RewardModelConfig cfg_;
  nn::ParameterSet params_;
  nn::Conv1dSeq conv_;
  nn::GruCell cell_;
  nn::Linear visual_proj_;
  nn::Linear head_;
};

/// Softmax of rewards over the provided candidate set.
std::vector<double> boltzmann(const std::vector<double>& rewards);

/// Frozen word embeddings for reward inputs, padded with zero rows to `min_rows`.
Matrix instruction_embedding(const std::vector<int>& ids, const corpus::Vocabulary& vocab,
                             const features::EmbeddingTable& table, Index min_rows = 1);

struct ScoredSample {
  Matrix embedding;
  Matrix visual;
};

struct RewardPhaseResult {
  double loss = 0.0;
  double mean_real = 0.0;
  double mean_fake = 0.0;
  double accuracy = 0.0;
};

/// Binary discrimination step on reward parameters only (real = 1, fake = 0).
RewardPhaseResult reward_phase(RewardModel& reward, nn::OptimizerState& opt,
                               const std::vector<ScoredSample>& real,
                               const std::vector<ScoredSample>& fake, double clip_norm = 5.0);

/// Scores a sampled token sequence for a trajectory with visual states `visual`.
using RewardFn = std::function<double(const std::vector<int>& tokens, const Matrix& visual)>;

struct Baseline {
  double decay = 0.95;
  std::optional<double> value;
  double advantage(double reward) const { return reward - value.value_or(reward); }
  void update(double batch_mean);
};

struct PolicyPhaseResult {
  double pg_loss = 0.0;
  double sup_loss = 0.0;
  double mean_reward = 0.0;
  std::vector<std::vector<int>> samples;
};

struct PolicyConfig {
  double pg_weight = 1.0;
  double supervised_weight = 1.0;  // 0 turns the step into pure REINFORCE
  int max_sample_len = 60;
  double temperature = 1.0;
  double clip_norm = 5.0;
};

/// REINFORCE step on speaker parameters only, mixed with the teacher-forced supervised loss.
PolicyPhaseResult policy_phase(model::SpeakerModel& speaker, nn::OptimizerState& opt,
                               const std::vector<const data::Example*>& batch,
                               const RewardFn& reward, Baseline& baseline,
                               const train::TrainConfig& sup_cfg, const PolicyConfig& cfg, Rng& rng);

struct ArlConfig {
  int iterations = 1000;
  int period = 100;
  double pg_weight = 1.0;
  double baseline_decay = 0.95;
  int batch_size = 8;
  int max_sample_len = 60;
  double learning_rate = 5e-4;
  double reward_learning_rate = 5e-4;
  std::uint64_t seed = 1;
  void validate() const;
};

enum class Phase { kPolicy, kReward };
std::string to_string(Phase p);
/// Phase of an iteration under the alternation schedule (policy first).
Phase phase_at(int iteration, int period);

struct CurvePoint {
  int iter = 0;
  Phase phase = Phase::kPolicy;
  double mean_reward_real = 0.0;
  double mean_reward_fake = 0.0;
  std::optional<double> pg_loss;
  std::optional<double> sup_loss;
};

nlohmann::json to_json(const CurvePoint& p);

struct ArlResult {
  std::vector<CurvePoint> curve;
  std::filesystem::path checkpoint;
  std::filesystem::path reward_checkpoint;
};

/// Visual states of the speaker's encoder for a trajectory (T x D_h).
Matrix visual_states(const model::SpeakerModel& speaker, const data::TrajectoryInput& traj);

/// Alternates policy and reward phases; writes reward_curve.jsonl and archives
/// under `out_dir` when it is non-empty.
ArlResult arl_fit(model::SpeakerModel& speaker, RewardModel& reward,
                  const std::vector<data::Example>& examples, const corpus::Vocabulary& vocab,
                  const features::EmbeddingTable& table, const ArlConfig& cfg,
                  const train::TrainConfig& sup_cfg, const std::filesystem::path& out_dir = {});

}  // namespace sas::arl
