#pragma once

// Supervised training: language-model, unlikelihood and temporal alignment
// losses, the optimizer step and the fit loop with evaluation and checkpoints.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sas/corpus.hpp"
#include "sas/dataset.hpp"
#include "sas/metrics.hpp"
#include "sas/model.hpp"
#include "sas/nn/optim.hpp"

namespace sas::train {

using nn::Matrix;
using nn::Tape;
using nn::Var;

enum class Forcing { kTeacher, kStudent };
std::string to_string(Forcing f);
Forcing parse_forcing(const std::string& s);

struct LossWeights {
  double lm = 2.0;
  double uls = 1.0;
  double tal = 1.0;
};

struct TrainConfig {
  int batch_size = 8;
  double learning_rate = 5e-4;
  double weight_decay = 0.01;
  double clip_norm = 5.0;
  int iterations = 5000;
  LossWeights weights;
  Forcing forcing = Forcing::kTeacher;
  std::uint64_t seed = 1;
  int eval_interval = 500;       // 0 disables periodic evaluation
  int checkpoint_interval = 0;   // 0 writes only the initial and final checkpoints
  int uls_window = 0;            // 0 uses the whole prefix
  void validate() const;
};

struct LossBreakdown {
  double lm = 0.0;
  double uls = 0.0;
  double tal = 0.0;
  double total = 0.0;
  std::size_t tokens = 0;
};

/// A loss accumulated as a sum with the number of terms it averages over.
struct LossSum {
  Var sum;
  double count = 0.0;
};

/// Negative log-likelihood of every unmasked target; mask may be empty (all on).
LossSum lm_sum(Var logits, const std::vector<int>& targets, const std::vector<bool>& mask = {});
Var loss_lm(Var logits, const std::vector<int>& targets, const std::vector<bool>& mask = {});

/// Negative candidates per position: tokens of the decoder-input prefix
/// (window-limited, specials dropped) other than that position's target.
std::vector<std::vector<int>> uls_candidates(const std::vector<int>& inputs,
                                             const std::vector<int>& targets, int window = 0);
LossSum uls_sum(Var logits, const std::vector<int>& inputs, const std::vector<int>& targets,
                int window = 0);
Var loss_uls(Var logits, const std::vector<int>& inputs, const std::vector<int>& targets,
             int window = 0);

inline constexpr double kProbClamp = 1e-7;

/// Elementwise BCE over rows of `gt` that contain any alignment.
LossSum tal_sum(Var attention, const Matrix& gt);
Var loss_tal(Var attention, const Matrix& gt);

struct BatchLosses {
  Var lm, uls, tal, total;
  std::size_t tokens = 0;
};

/// Forward pass of a batch on one tape. Student forcing draws decoder inputs from `rng`.
BatchLosses batch_losses(Tape& t, const model::SpeakerModel& model,
                         const std::vector<const data::Example*>& batch, const TrainConfig& cfg,
                         Rng* rng = nullptr);

LossBreakdown breakdown(const BatchLosses& l);

nn::OptimizerState make_optimizer(const TrainConfig& cfg);

LossBreakdown train_step(model::SpeakerModel& model, nn::OptimizerState& opt,
                         const std::vector<const data::Example*>& batch, const TrainConfig& cfg,
                         Rng& rng);

/// Greedy decodes of every example scored against its own target tokens.
metrics::EvalReport evaluate_model(const model::SpeakerModel& model,
                                   const std::vector<data::Example>& examples,
                                   const corpus::Vocabulary& vocab);

std::vector<std::string> decode_tokens(const std::vector<int>& ids, const corpus::Vocabulary& vocab);

struct FitResult {
  std::filesystem::path checkpoint;
  std::filesystem::path metrics_log;
  std::vector<LossBreakdown> history;
  std::optional<metrics::EvalReport> last_eval;
};

/// Writes ckpt_{iter}.archive, model.json and metrics.jsonl under `out_dir`.
FitResult fit(model::SpeakerModel& model, const std::vector<data::Example>& train_set,
              const std::vector<data::Example>& eval_set, const corpus::Vocabulary& vocab,
              const TrainConfig& cfg, const std::filesystem::path& out_dir);

/// Ablation rows: forcing strategy, path mixing, alignment loss and ARL variant.
struct Ablation {
  std::string name;
  Forcing forcing = Forcing::kTeacher;
  bool path_mixing = false;
  bool tal = false;
  bool uls = true;
  std::string reward;  // "", "cnn" or "gru"
};

const std::vector<Ablation>& ablations();
const Ablation& find_ablation(const std::string& name);
/// Applies the forcing and loss switches of an ablation to a config.
TrainConfig apply(const Ablation& a, TrainConfig cfg);

nlohmann::json to_json(const LossBreakdown& b);

}  // namespace sas::train
