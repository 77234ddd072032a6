#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "sas/arl.hpp"
#include "sas/errors.hpp"

using namespace sas;
using namespace sas::arl;
using sas::corpus::Vocabulary;

namespace {

RewardModelConfig small_reward(RewardKind kind) {
  RewardModelConfig c;
  c.kind = kind;
  c.embed_dim = 4;
  c.visual_dim = 3;
  c.filters = 3;
  c.hidden_dim = 5;
  return c;
}

Matrix filled(Index r, Index c, double v) { return Matrix::Constant(r, c, v); }

model::ModelConfig tiny() {
  model::ModelConfig c;
  c.visual_dim = 6;
  c.embed_dim = 4;
  c.attn_dim = 8;
  c.hidden_dim = 3;
  c.layers = 1;
  c.vocab_size = 10;
  c.max_decode_len = 6;
  return c;
}

std::vector<data::Example> examples(const model::ModelConfig& c) {
  std::vector<data::Example> out;
  for (std::uint64_t seed : {1, 2}) {
    Rng rng(seed);
    data::Example ex;
    ex.trajectory.actions = Matrix::Zero(2, 4);
    for (int i = 0; i < 2; ++i) {
      Matrix v(c.view_count(), c.slot_feature_dim());
      for (Index k = 0; k < v.size(); ++k) v.data()[k] = rng.uniform(-1, 1);
      ex.trajectory.views.push_back(v);
      ex.trajectory.actions.row(i) << 1, 0, 1, 0;
    }
    ex.targets = {4, 5, 6, Vocabulary::kEos};
    ex.alignment = Matrix::Zero(4, 2);
    out.push_back(ex);
  }
  return out;
}

Vocabulary six_words() {
  Vocabulary v;
  for (const char* w : {"walk", "past", "the", "sofa", "turn", "left"}) v.add(w);
  return v;
}

}  // namespace

TEST_SUITE("arl") {

TEST_CASE("zero reward weights score one half") {
  for (auto kind : {RewardKind::kCnn, RewardKind::kGru}) {
    RewardModel r(small_reward(kind), 1);
    r.params().for_each([](nn::Parameter& p) { p.value.setZero(); });
    CHECK(r.score(filled(6, 4, 0.3), filled(2, 3, -1.0)) == doctest::Approx(0.5));
  }
}

TEST_CASE("reward inputs are validated") {
  RewardModel cnn(small_reward(RewardKind::kCnn), 2);
  CHECK(cnn.min_length() == 5);
  CHECK_THROWS_AS(cnn.score(filled(6, 3, 0), filled(2, 3, 0)), ShapeError);
  CHECK_THROWS_AS(cnn.score(filled(6, 4, 0), filled(2, 2, 0)), ShapeError);
  CHECK_THROWS_AS(cnn.score(filled(2, 4, 0), filled(2, 3, 0)), SequenceTooShort);
  RewardModel gru(small_reward(RewardKind::kGru), 2);
  CHECK(gru.min_length() == 1);
  const double s = gru.score(filled(1, 4, 0.1), filled(1, 3, 0.1));
  CHECK(s > 0.0);
  CHECK(s < 1.0);

  auto bad = small_reward(RewardKind::kCnn);
  bad.widths.clear();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK(parse_reward_kind(to_string(RewardKind::kGru)) == RewardKind::kGru);
}

TEST_CASE("boltzmann distribution over rewards") {
  const auto p = boltzmann({0.0, std::log(3.0)});
  CHECK(p[0] == doctest::Approx(0.25));
  CHECK(p[1] == doctest::Approx(0.75));
  const auto shifted = boltzmann({1000.0, 1000.0 + std::log(3.0)});
  CHECK(shifted[1] == doctest::Approx(0.75));
  CHECK_THROWS_AS(boltzmann({}), EmptyBatch);
}

TEST_CASE("instruction embeddings are padded with zero rows") {
  const auto vocab = six_words();
  const auto table = features::EmbeddingTable::seeded({"walk", "sofa"}, 4, 3);
  const Matrix e = instruction_embedding({4, 7, Vocabulary::kEos, 5}, vocab, table, 5);
  REQUIRE(e.rows() == 5);
  CHECK(e.row(0).transpose() == table["walk"]);
  CHECK(e.row(1).transpose() == table["sofa"]);
  CHECK(e.bottomRows(3).isZero());
  CHECK(instruction_embedding({4, 5, 6}, vocab, table, 1).rows() == 3);
}

TEST_CASE("reward phase cross-entropy") {
  RewardModel r(small_reward(RewardKind::kGru), 4);
  r.params().for_each([](nn::Parameter& p) { p.value.setZero(); });
  nn::OptimizerState opt;
  std::vector<ScoredSample> real{{filled(3, 4, 1.0), filled(2, 3, 1.0)}};
  std::vector<ScoredSample> fake{{filled(3, 4, -1.0), filled(2, 3, 1.0)}};
  const auto first = reward_phase(r, opt, real, fake);
  CHECK(first.loss == doctest::Approx(std::log(2.0)));
  CHECK(first.mean_real == doctest::Approx(0.5));
  CHECK(first.mean_fake == doctest::Approx(0.5));
  CHECK(first.accuracy == 0.0);

  // Zero weights are a saddle point, so train from a random start.
  RewardModel fresh(small_reward(RewardKind::kGru), 4);
  nn::OptimizerState opt2;
  opt2.config.learning_rate = 1e-2;
  RewardPhaseResult last;
  for (int i = 0; i < 200; ++i) last = reward_phase(fresh, opt2, real, fake);
  CHECK(last.accuracy == 1.0);
  CHECK(last.loss < 0.1);
  CHECK(last.mean_real > last.mean_fake);
  CHECK_THROWS_AS(reward_phase(r, opt, {}, {}), EmptyBatch);
}

TEST_CASE("moving-average baseline") {
  Baseline b{0.9, std::nullopt};
  CHECK(b.advantage(0.7) == 0.0);
  b.update(0.5);
  CHECK(*b.value == 0.5);
  CHECK(b.advantage(0.7) == doctest::Approx(0.2));
  b.update(1.5);
  CHECK(*b.value == doctest::Approx(0.6));
}

TEST_CASE("alternation starts with the policy") {
  CHECK(phase_at(0, 100) == Phase::kPolicy);
  CHECK(phase_at(99, 100) == Phase::kPolicy);
  CHECK(phase_at(100, 100) == Phase::kReward);
  CHECK(phase_at(199, 100) == Phase::kReward);
  CHECK(phase_at(200, 100) == Phase::kPolicy);
  CHECK(phase_at(1, 1) == Phase::kReward);
  CHECK(phase_at(2, 1) == Phase::kPolicy);
}

TEST_CASE("a constant reward has zero advantage and leaves the policy alone") {
  const auto c = tiny();
  model::SpeakerModel m(c, 5);
  std::vector<std::pair<std::string, Matrix>> before;
  m.params().for_each([&](const nn::Parameter& p) { before.emplace_back(p.name, p.value); });
  const auto xs = examples(c);
  std::vector<const data::Example*> batch{&xs[0], &xs[1]};
  nn::OptimizerState opt;
  opt.config.weight_decay = 0.0;
  Baseline base{0.95, std::nullopt};
  PolicyConfig pc;
  pc.supervised_weight = 0.0;
  pc.max_sample_len = 5;
  Rng rng(6);
  const auto res = policy_phase(m, opt, batch, [](const auto&, const auto&) { return 0.4; }, base,
                                train::TrainConfig{}, pc, rng);
  CHECK(res.pg_loss == 0.0);
  CHECK(res.mean_reward == doctest::Approx(0.4));
  CHECK(res.samples.size() == 2);
  for (const auto& s : res.samples) CHECK(s.size() <= 5);
  for (std::size_t i = 0; i < before.size(); ++i) {
    CHECK(m.params().get(before[i].first).value == before[i].second);
  }
  CHECK(*base.value == doctest::Approx(0.4));
  CHECK_THROWS_AS(policy_phase(m, opt, {}, [](const auto&, const auto&) { return 0.0; }, base,
                               train::TrainConfig{}, pc, rng),
                  EmptyBatch);
}

TEST_CASE("arl_fit follows the schedule and writes its outputs") {
  const auto c = tiny();
  model::SpeakerModel m(c, 7);
  auto rc = small_reward(RewardKind::kCnn);
  rc.visual_dim = c.hidden_dim;
  rc.embed_dim = 4;
  RewardModel r(rc, 8);
  const auto vocab = six_words();
  const auto table = features::EmbeddingTable::seeded({"walk", "past", "the", "sofa"}, 4, 9);
  ArlConfig cfg;
  cfg.iterations = 4;
  cfg.period = 2;
  cfg.batch_size = 2;
  cfg.max_sample_len = 6;
  const auto dir = std::filesystem::temp_directory_path() / "sas_unit_arl";
  std::filesystem::remove_all(dir);
  const auto res = arl_fit(m, r, examples(c), vocab, table, cfg, train::TrainConfig{}, dir);
  REQUIRE(res.curve.size() == 4);
  CHECK(res.curve[0].phase == Phase::kPolicy);
  CHECK(res.curve[1].phase == Phase::kPolicy);
  CHECK(res.curve[2].phase == Phase::kReward);
  CHECK(res.curve[3].phase == Phase::kReward);
  CHECK(res.curve[0].pg_loss.has_value());
  CHECK_FALSE(res.curve[2].pg_loss.has_value());
  for (const auto& p : res.curve) {
    CHECK(p.mean_reward_real > 0.0);
    CHECK(p.mean_reward_real < 1.0);
  }
  CHECK(std::filesystem::exists(dir / "reward_curve.jsonl"));
  CHECK(std::filesystem::exists(res.checkpoint));
  CHECK(std::filesystem::exists(res.reward_checkpoint));

  cfg.period = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.baseline_decay = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

}  // TEST_SUITE
