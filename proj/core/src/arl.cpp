#include "sas/arl.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "sas/errors.hpp"
#include "sas/nn/archive.hpp"

namespace sas::arl {

std::string to_string(RewardKind k) { return k == RewardKind::kCnn ? "cnn" : "gru"; }

RewardKind parse_reward_kind(const std::string& s) {
  if (s == "cnn") return RewardKind::kCnn;
  if (s == "gru" || s == "rnn") return RewardKind::kGru;
  throw ConfigError("unknown reward model '" + s + "'");
}

void RewardModelConfig::validate() const {
  if (embed_dim <= 0 || visual_dim <= 0 || hidden_dim <= 0 || filters <= 0) {
    throw ConfigError("reward model dimensions must be positive");
  }
  if (kind == RewardKind::kCnn && widths.empty()) throw ConfigError("CNN reward needs filter widths");
  for (Index w : widths) {
    if (w < 1) throw ConfigError("filter widths must be positive");
  }
}

RewardModel::RewardModel(const RewardModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  Index text_dim = 0;
  if (cfg_.kind == RewardKind::kCnn) {
    conv_ = nn::Conv1dSeq(params_, "reward.conv", cfg_.embed_dim, cfg_.filters, cfg_.widths, rng);
    text_dim = conv_.out_dim();
  } else {
    cell_ = nn::GruCell(params_, "reward.gru", cfg_.embed_dim, cfg_.hidden_dim, rng);
    text_dim = cfg_.hidden_dim;
  }
  visual_proj_ = nn::Linear(params_, "reward.visual", cfg_.visual_dim, cfg_.hidden_dim, rng);
  head_ = nn::Linear(params_, "reward.head", text_dim + cfg_.hidden_dim, 1, rng);
}

Index RewardModel::min_length() const {
  return cfg_.kind == RewardKind::kCnn ? conv_.max_width() : 1;
}

Var RewardModel::cnn(Tape& t, const Matrix& embedding, const Matrix& visual) const {
  Var text = conv_(t, t.constant(embedding));
  Var vis = visual_proj_(t, nn::mean_rows(t.constant(visual)));
  return nn::sigmoid(head_(t, nn::concat_cols({text, vis})));
}

Var RewardModel::gru(Tape& t, const Matrix& embedding, const Matrix& visual) const {
  Var xs = t.constant(embedding);
  Var h = t.constant(Matrix::Zero(1, cfg_.hidden_dim));
  for (Index i = 0; i < embedding.rows(); ++i) h = cell_(t, nn::row(xs, i), h);
  Var vis = visual_proj_(t, nn::mean_rows(t.constant(visual)));
  return nn::sigmoid(head_(t, nn::concat_cols({h, vis})));
}

Var RewardModel::score(Tape& t, const Matrix& embedding, const Matrix& visual) const {
  if (embedding.cols() != cfg_.embed_dim) throw ShapeError("reward: embedding width mismatch");
  if (visual.cols() != cfg_.visual_dim || visual.rows() < 1) throw ShapeError("reward: visual states mismatch");
  if (embedding.rows() < min_length()) {
    throw SequenceTooShort("instruction of " + std::to_string(embedding.rows()) +
                           " tokens is shorter than " + std::to_string(min_length()));
  }
  return cfg_.kind == RewardKind::kCnn ? cnn(t, embedding, visual) : gru(t, embedding, visual);
}

double RewardModel::score(const Matrix& embedding, const Matrix& visual) const {
  Tape t;
  return score(t, embedding, visual).scalar();
}

std::vector<double> boltzmann(const std::vector<double>& rewards) {
  if (rewards.empty()) throw EmptyBatch("boltzmann over no candidates");
  const double m = *std::max_element(rewards.begin(), rewards.end());
  std::vector<double> p(rewards.size());
  double z = 0.0;
  for (std::size_t i = 0; i < rewards.size(); ++i) z += p[i] = std::exp(rewards[i] - m);
  for (double& x : p) x /= z;
  return p;
}

Matrix instruction_embedding(const std::vector<int>& ids, const corpus::Vocabulary& vocab,
                             const features::EmbeddingTable& table, Index min_rows) {
  const auto tokens = vocab.decode(ids);
  const Index rows = std::max<Index>(static_cast<Index>(tokens.size()), min_rows);
  Matrix out = Matrix::Zero(rows, table.dim());
  for (std::size_t i = 0; i < tokens.size(); ++i) out.row(static_cast<Index>(i)) = table[tokens[i]].transpose();
  return out;
}

RewardPhaseResult reward_phase(RewardModel& reward, nn::OptimizerState& opt,
                               const std::vector<ScoredSample>& real,
                               const std::vector<ScoredSample>& fake, double clip_norm) {
  if (real.empty() && fake.empty()) throw EmptyBatch("reward phase without samples");
  Tape t;
  std::vector<Var> terms;
  RewardPhaseResult res;
  double correct = 0.0;
  auto add = [&](const ScoredSample& s, bool is_real) {
    Var r = nn::clamp(reward.score(t, s.embedding, s.visual), train::kProbClamp, 1.0 - train::kProbClamp);
    const double v = r.scalar();
    (is_real ? res.mean_real : res.mean_fake) += v;
    correct += (is_real ? v > 0.5 : v < 0.5) ? 1.0 : 0.0;
    terms.push_back(is_real ? nn::log(r) : nn::log(nn::add_scalar(nn::scale(r, -1.0), 1.0)));
  };
  for (const auto& s : real) add(s, true);
  for (const auto& s : fake) add(s, false);
  const double n = static_cast<double>(terms.size());
  Var loss = nn::scale(nn::sum(nn::concat_rows(terms)), -1.0 / n);
  t.backward(loss);
  auto grads = t.gradients(reward.params());
  nn::clip_global_norm(grads, clip_norm);
  nn::adamw_step(reward.params(), grads, opt);
  res.loss = loss.scalar();
  if (!real.empty()) res.mean_real /= static_cast<double>(real.size());
  if (!fake.empty()) res.mean_fake /= static_cast<double>(fake.size());
  res.accuracy = correct / n;
  return res;
}

void Baseline::update(double batch_mean) {
  value = value ? decay * *value + (1.0 - decay) * batch_mean : batch_mean;
}

PolicyPhaseResult policy_phase(model::SpeakerModel& speaker, nn::OptimizerState& opt,
                               const std::vector<const data::Example*>& batch,
                               const RewardFn& reward, Baseline& baseline,
                               const train::TrainConfig& sup_cfg, const PolicyConfig& cfg, Rng& rng) {
  if (batch.empty()) throw EmptyBatch("policy phase without trajectories");
  Tape t;
  PolicyPhaseResult res;
  std::vector<Var> log_probs;
  std::vector<double> rewards;
  for (const auto* ex : batch) {
    const auto enc = speaker.encode(t, ex->trajectory);
    auto roll = speaker.rollout(t, enc, rng, cfg.max_sample_len, true, cfg.temperature);
    rewards.push_back(reward(roll.tokens, enc.visual.value()));
    log_probs.push_back(roll.log_prob_sum);
    res.samples.push_back(std::move(roll.tokens));
  }
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(rewards.size());
  if (!baseline.value) baseline.value = mean;

  std::vector<Var> pg_terms;
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    pg_terms.push_back(nn::scale(log_probs[i], -baseline.advantage(rewards[i])));
  }
  Var pg = nn::scale(nn::sum(nn::concat_rows(pg_terms)), 1.0 / static_cast<double>(pg_terms.size()));
  Var total = nn::scale(pg, cfg.pg_weight);
  if (cfg.supervised_weight > 0.0) {
    train::TrainConfig tf = sup_cfg;
    tf.forcing = train::Forcing::kTeacher;
    auto sup = train::batch_losses(t, speaker, batch, tf);
    res.sup_loss = sup.total.scalar();
    total = nn::add(total, nn::scale(sup.total, cfg.supervised_weight));
  }
  t.backward(total);
  auto grads = t.gradients(speaker.params());
  nn::clip_global_norm(grads, cfg.clip_norm);
  nn::adamw_step(speaker.params(), grads, opt);
  baseline.update(mean);
  res.pg_loss = pg.scalar();
  res.mean_reward = mean;
  return res;
}

void ArlConfig::validate() const {
  if (period < 1) throw ConfigError("ARL period must be at least 1");
  if (iterations < 0) throw ConfigError("ARL iterations must be non-negative");
  if (batch_size < 1) throw ConfigError("ARL batch_size must be at least 1");
  if (max_sample_len < 1) throw ConfigError("ARL max_sample_len must be positive");
  if (baseline_decay < 0.0 || baseline_decay >= 1.0) throw ConfigError("baseline_decay must be in [0, 1)");
}

std::string to_string(Phase p) { return p == Phase::kPolicy ? "policy" : "reward"; }

Phase phase_at(int iteration, int period) {
  return (iteration / period) % 2 == 0 ? Phase::kPolicy : Phase::kReward;
}

nlohmann::json to_json(const CurvePoint& p) {
  nlohmann::json j{{"iter", p.iter},
                   {"phase", to_string(p.phase)},
                   {"mean_reward_real", p.mean_reward_real},
                   {"mean_reward_fake", p.mean_reward_fake}};
  j["pg_loss"] = p.pg_loss ? nlohmann::json(*p.pg_loss) : nlohmann::json(nullptr);
  j["sup_loss"] = p.sup_loss ? nlohmann::json(*p.sup_loss) : nlohmann::json(nullptr);
  return j;
}

Matrix visual_states(const model::SpeakerModel& speaker, const data::TrajectoryInput& traj) {
  Tape t;
  return speaker.encode(t, traj).visual.value();
}

ArlResult arl_fit(model::SpeakerModel& speaker, RewardModel& reward,
                  const std::vector<data::Example>& examples, const corpus::Vocabulary& vocab,
                  const features::EmbeddingTable& table, const ArlConfig& cfg,
                  const train::TrainConfig& sup_cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  if (examples.empty()) throw EmptyCorpus("ARL needs at least one example");
  std::ofstream log;
  if (!out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    log.open(out_dir / "reward_curve.jsonl");
    if (!log) throw IoError("cannot write " + (out_dir / "reward_curve.jsonl").string());
  }
  nn::OptimizerState speaker_opt;
  speaker_opt.config.learning_rate = cfg.learning_rate;
  nn::OptimizerState reward_opt;
  reward_opt.config.learning_rate = cfg.reward_learning_rate;
  Baseline baseline{cfg.baseline_decay, std::nullopt};
  PolicyConfig pcfg;
  pcfg.pg_weight = cfg.pg_weight;
  pcfg.max_sample_len = cfg.max_sample_len;
  pcfg.clip_norm = sup_cfg.clip_norm;

  Rng order_rng(cfg.seed);
  Rng sample_rng(mix_seed(cfg.seed, 2));
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  order_rng.shuffle(order);
  std::size_t cursor = 0;
  const Index min_rows = reward.min_length();

  auto embed = [&](const std::vector<int>& ids) {
    return instruction_embedding(ids, vocab, table, min_rows);
  };
  RewardFn reward_fn = [&](const std::vector<int>& tokens, const Matrix& visual) {
    return reward.score(embed(tokens), visual);
  };

  ArlResult res;
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    std::vector<const data::Example*> batch;
    for (int b = 0; b < cfg.batch_size && b < static_cast<int>(examples.size()); ++b) {
      if (cursor == order.size()) {
        order_rng.shuffle(order);
        cursor = 0;
      }
      batch.push_back(&examples[order[cursor++]]);
    }
    std::vector<ScoredSample> real;
    for (const auto* ex : batch) {
      real.push_back({embed(ex->targets), visual_states(speaker, ex->trajectory)});
    }
    CurvePoint p;
    p.iter = iter;
    p.phase = phase_at(iter, cfg.period);
    if (p.phase == Phase::kPolicy) {
      auto pr = policy_phase(speaker, speaker_opt, batch, reward_fn, baseline, sup_cfg, pcfg, sample_rng);
      double real_mean = 0.0;
      for (const auto& s : real) real_mean += reward.score(s.embedding, s.visual);
      p.mean_reward_real = real_mean / static_cast<double>(real.size());
      p.mean_reward_fake = pr.mean_reward;
      p.pg_loss = pr.pg_loss;
      p.sup_loss = pr.sup_loss;
    } else {
      std::vector<ScoredSample> fake;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        model::DecodeMode mode = model::DecodeMode::sampling(sample_rng.bits());
        mode.max_len = cfg.max_sample_len;
        const auto g = speaker.generate(batch[i]->trajectory, mode);
        fake.push_back({embed(g.tokens), real[i].visual});
      }
      auto rr = reward_phase(reward, reward_opt, real, fake, sup_cfg.clip_norm);
      p.mean_reward_real = rr.mean_real;
      p.mean_reward_fake = rr.mean_fake;
    }
    res.curve.push_back(p);
    if (log.is_open()) log << to_json(p).dump() << "\n";
  }
  if (!out_dir.empty()) {
    res.checkpoint = out_dir / ("ckpt_" + std::to_string(cfg.iterations) + ".archive");
    res.reward_checkpoint = out_dir / ("reward_" + std::to_string(cfg.iterations) + ".archive");
    nn::save_archive(res.checkpoint, speaker.params());
    nn::save_archive(res.reward_checkpoint, reward.params());
  }
  return res;
}

}  // namespace sas::arl
