#include "sas/train.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>

#include "sas/errors.hpp"
#include "sas/nn/archive.hpp"

namespace sas::train {

using corpus::Vocabulary;

std::string to_string(Forcing f) { return f == Forcing::kTeacher ? "teacher" : "student"; }

Forcing parse_forcing(const std::string& s) {
  if (s == "teacher" || s == "tf") return Forcing::kTeacher;
  if (s == "student" || s == "sf") return Forcing::kStudent;
  throw ConfigError("unknown forcing mode '" + s + "'");
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (weights.lm < 0 || weights.uls < 0 || weights.tal < 0) throw ConfigError("loss weights must be non-negative");
  if (iterations < 0) throw ConfigError("iterations must be non-negative");
  if (learning_rate <= 0) throw ConfigError("learning_rate must be positive");
  if (eval_interval < 0 || checkpoint_interval < 0 || uls_window < 0) {
    throw ConfigError("intervals and windows must be non-negative");
  }
}

namespace {

bool special(int id) { return id < Vocabulary::kReserved; }

Var zero(Tape& t) { return t.constant(Matrix::Zero(1, 1)); }

Var ratio(Tape& t, const std::vector<LossSum>& parts) {
  double count = 0.0;
  std::vector<Var> sums;
  for (const auto& p : parts) {
    if (p.count > 0) {
      count += p.count;
      sums.push_back(p.sum);
    }
  }
  if (count == 0.0) return zero(t);
  Var acc = sums.front();
  for (std::size_t i = 1; i < sums.size(); ++i) acc = nn::add(acc, sums[i]);
  return nn::scale(acc, 1.0 / count);
}

}  // namespace

LossSum lm_sum(Var logits, const std::vector<int>& targets, const std::vector<bool>& mask) {
  if (logits.rows() != static_cast<nn::Index>(targets.size())) throw ShapeError("loss_lm: one target per logit row");
  if (!mask.empty() && mask.size() != targets.size()) throw ShapeError("loss_lm: mask length mismatch");
  for (int id : targets) {
    if (id < 0 || id >= logits.cols()) throw VocabError("loss_lm: target id out of range");
  }
  Matrix m(static_cast<nn::Index>(targets.size()), 1);
  double count = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const bool on = mask.empty() || mask[i];
    m(static_cast<nn::Index>(i), 0) = on ? 1.0 : 0.0;
    count += on ? 1.0 : 0.0;
  }
  Var picked = nn::pick(nn::log_softmax_rows(logits), targets);
  return {nn::scale(nn::sum(nn::mul_const(picked, m)), -1.0), count};
}

Var loss_lm(Var logits, const std::vector<int>& targets, const std::vector<bool>& mask) {
  auto s = lm_sum(logits, targets, mask);
  if (s.count == 0.0) throw EmptyBatch("every target position is masked");
  return nn::scale(s.sum, 1.0 / s.count);
}

std::vector<std::vector<int>> uls_candidates(const std::vector<int>& inputs,
                                             const std::vector<int>& targets, int window) {
  if (inputs.size() != targets.size()) throw ShapeError("uls: inputs and targets differ in length");
  std::vector<std::vector<int>> out(targets.size());
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const std::size_t begin = window > 0 && t + 1 > static_cast<std::size_t>(window)
                                  ? t + 1 - static_cast<std::size_t>(window)
                                  : 0;
    std::set<int> c;
    for (std::size_t k = begin; k <= t; ++k) {
      if (!special(inputs[k]) && inputs[k] != targets[t]) c.insert(inputs[k]);
    }
    out[t].assign(c.begin(), c.end());
  }
  return out;
}

LossSum uls_sum(Var logits, const std::vector<int>& inputs, const std::vector<int>& targets,
                int window) {
  Tape& t = *logits.tape();
  if (logits.rows() != static_cast<nn::Index>(targets.size())) throw ShapeError("loss_uls: one target per row");
  const auto cands = uls_candidates(inputs, targets, window);
  std::vector<int> rows, cols;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    for (int c : cands[i]) {
      rows.push_back(static_cast<int>(i));
      cols.push_back(c);
    }
  }
  const double count = static_cast<double>(targets.size());
  if (rows.empty()) return {zero(t), count};
  Var probs = nn::exp(nn::log_softmax_rows(logits));
  Var p = nn::clamp(nn::pick(nn::gather_rows(probs, rows), cols), 0.0, 1.0 - kProbClamp);
  Var terms = nn::log(nn::add_scalar(nn::scale(p, -1.0), 1.0));
  return {nn::scale(nn::sum(terms), -1.0), count};
}

Var loss_uls(Var logits, const std::vector<int>& inputs, const std::vector<int>& targets,
             int window) {
  auto s = uls_sum(logits, inputs, targets, window);
  if (s.count == 0.0) return s.sum;
  return nn::scale(s.sum, 1.0 / s.count);
}

LossSum tal_sum(Var attention, const Matrix& gt) {
  Tape& t = *attention.tape();
  if (attention.rows() != gt.rows() || attention.cols() != gt.cols()) {
    throw ShapeError("loss_tal: attention is " + std::to_string(attention.rows()) + " x " +
                     std::to_string(attention.cols()) + ", alignment is " +
                     std::to_string(gt.rows()) + " x " + std::to_string(gt.cols()));
  }
  Matrix mask = Matrix::Zero(gt.rows(), gt.cols());
  double count = 0.0;
  for (nn::Index r = 0; r < gt.rows(); ++r) {
    if ((gt.row(r).array() != 0.0).any()) {
      mask.row(r).setOnes();
      count += static_cast<double>(gt.cols());
    }
  }
  if (count == 0.0) return {zero(t), 0.0};
  Var a = nn::clamp(attention, kProbClamp, 1.0 - kProbClamp);
  Var pos = nn::mul_const(nn::log(a), gt);
  Var neg = nn::mul_const(nn::log(nn::add_scalar(nn::scale(a, -1.0), 1.0)),
                          (1.0 - gt.array()).matrix());
  Var bce = nn::mul_const(nn::add(pos, neg), mask);
  return {nn::scale(nn::sum(bce), -1.0), count};
}

Var loss_tal(Var attention, const Matrix& gt) {
  auto s = tal_sum(attention, gt);
  if (s.count == 0.0) return s.sum;
  return nn::scale(s.sum, 1.0 / s.count);
}

BatchLosses batch_losses(Tape& t, const model::SpeakerModel& model,
                         const std::vector<const data::Example*>& batch, const TrainConfig& cfg,
                         Rng* rng) {
  if (batch.empty()) throw EmptyBatch("empty training batch");
  if (cfg.forcing == Forcing::kStudent && !rng) throw ConfigError("student forcing needs a random source");
  std::vector<LossSum> lm, uls, tal;
  std::size_t tokens = 0;
  for (const auto* ex : batch) {
    const auto enc = model.encode(t, ex->trajectory);
    Var logits, attention;
    std::vector<int> inputs;
    if (cfg.forcing == Forcing::kTeacher) {
      inputs = model::shift_right(ex->targets);
      auto dec = model.decode(t, enc, inputs);
      logits = dec.logits;
      attention = dec.attention;
    } else {
      auto roll = model.rollout(t, enc, *rng, static_cast<int>(ex->targets.size()), false);
      inputs = roll.inputs;
      logits = roll.logits;
      attention = roll.attention;
    }
    lm.push_back(lm_sum(logits, ex->targets));
    uls.push_back(uls_sum(logits, inputs, ex->targets, cfg.uls_window));
    tal.push_back(tal_sum(attention, ex->alignment));
    tokens += ex->targets.size();
  }
  BatchLosses out;
  out.tokens = tokens;
  out.lm = ratio(t, lm);
  out.uls = ratio(t, uls);
  out.tal = ratio(t, tal);
  out.total = nn::add(nn::add(nn::scale(out.lm, cfg.weights.lm), nn::scale(out.uls, cfg.weights.uls)),
                      nn::scale(out.tal, cfg.weights.tal));
  return out;
}

LossBreakdown breakdown(const BatchLosses& l) {
  return {l.lm.scalar(), l.uls.scalar(), l.tal.scalar(), l.total.scalar(), l.tokens};
}

nn::OptimizerState make_optimizer(const TrainConfig& cfg) {
  nn::OptimizerState s;
  s.config.learning_rate = cfg.learning_rate;
  s.config.weight_decay = cfg.weight_decay;
  return s;
}

LossBreakdown train_step(model::SpeakerModel& model, nn::OptimizerState& opt,
                         const std::vector<const data::Example*>& batch, const TrainConfig& cfg,
                         Rng& rng) {
  Tape t;
  auto losses = batch_losses(t, model, batch, cfg, &rng);
  t.backward(losses.total);
  auto grads = t.gradients(model.params());
  nn::clip_global_norm(grads, cfg.clip_norm);
  nn::adamw_step(model.params(), grads, opt);
  return breakdown(losses);
}

std::vector<std::string> decode_tokens(const std::vector<int>& ids, const Vocabulary& vocab) {
  return vocab.decode(ids);
}

metrics::EvalReport evaluate_model(const model::SpeakerModel& model,
                                   const std::vector<data::Example>& examples,
                                   const Vocabulary& vocab) {
  std::vector<metrics::EvalPair> pairs;
  for (const auto& ex : examples) {
    const auto g = model.generate(ex.trajectory, model::DecodeMode::greedy());
    pairs.push_back({decode_tokens(g.tokens, vocab), {decode_tokens(ex.targets, vocab)}});
  }
  return metrics::evaluate(pairs);
}

nlohmann::json to_json(const LossBreakdown& b) {
  return {{"lm", b.lm}, {"uls", b.uls}, {"tal", b.tal}, {"total", b.total}};
}

namespace {

void write_model_config(const std::filesystem::path& dir, const model::ModelConfig& cfg) {
  std::ofstream out(dir / "model.json");
  if (!out) throw IoError("cannot write " + (dir / "model.json").string());
  out << model::to_json(cfg).dump(2) << "\n";
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, int iter) {
  return dir / ("ckpt_" + std::to_string(iter) + ".archive");
}

}  // namespace

FitResult fit(model::SpeakerModel& model, const std::vector<data::Example>& train_set,
              const std::vector<data::Example>& eval_set, const Vocabulary& vocab,
              const TrainConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  if (train_set.empty()) throw EmptyCorpus("fit needs at least one training example");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  write_model_config(out_dir, model.config());

  FitResult res;
  res.metrics_log = out_dir / "metrics.jsonl";
  std::ofstream log(res.metrics_log);
  if (!log) throw IoError("cannot write " + res.metrics_log.string());
  nn::save_archive(checkpoint_path(out_dir, 0), model.params());
  res.checkpoint = checkpoint_path(out_dir, 0);

  auto opt = make_optimizer(cfg);
  Rng order_rng(cfg.seed);
  Rng sample_rng(mix_seed(cfg.seed, 1));
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  order_rng.shuffle(order);
  std::size_t cursor = 0;

  for (int iter = 1; iter <= cfg.iterations; ++iter) {
    std::vector<const data::Example*> batch;
    for (int b = 0; b < cfg.batch_size && b < static_cast<int>(train_set.size()); ++b) {
      if (cursor == order.size()) {
        order_rng.shuffle(order);
        cursor = 0;
      }
      batch.push_back(&train_set[order[cursor++]]);
    }
    const auto loss = train_step(model, opt, batch, cfg, sample_rng);
    res.history.push_back(loss);
    nlohmann::json line = to_json(loss);
    line["iter"] = iter;
    line["eval"] = nullptr;
    const bool last = iter == cfg.iterations;
    if (!eval_set.empty() && ((cfg.eval_interval > 0 && iter % cfg.eval_interval == 0) || last)) {
      res.last_eval = evaluate_model(model, eval_set, vocab);
      auto e = metrics::to_json(*res.last_eval);
      e.erase("n_pairs");
      line["eval"] = e;
    }
    log << line.dump() << "\n";
    if (last || (cfg.checkpoint_interval > 0 && iter % cfg.checkpoint_interval == 0)) {
      res.checkpoint = checkpoint_path(out_dir, iter);
      nn::save_archive(res.checkpoint, model.params());
    }
  }
  if (!log) throw IoError("write failed: " + res.metrics_log.string());
  return res;
}

const std::vector<Ablation>& ablations() {
  static const std::vector<Ablation> kRows{
      {"sf", Forcing::kStudent, false, false, true, ""},
      {"tf", Forcing::kTeacher, false, false, true, ""},
      {"tf+pm", Forcing::kTeacher, true, false, true, ""},
      {"tf+tal", Forcing::kTeacher, false, true, true, ""},
      {"tf+pm+tal", Forcing::kTeacher, true, true, true, ""},
      {"tf+pm+tal+arl-cnn", Forcing::kTeacher, true, true, true, "cnn"},
      {"tf+pm+tal+arl-gru", Forcing::kTeacher, true, true, true, "gru"},
  };
  return kRows;
}

const Ablation& find_ablation(const std::string& name) {
  for (const auto& a : ablations()) {
    if (a.name == name) return a;
  }
  throw ConfigError("unknown ablation '" + name + "'");
}

TrainConfig apply(const Ablation& a, TrainConfig cfg) {
  cfg.forcing = a.forcing;
  if (!a.tal) cfg.weights.tal = 0.0;
  if (!a.uls) cfg.weights.uls = 0.0;
  return cfg;
}

}  // namespace sas::train
