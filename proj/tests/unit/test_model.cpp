#include <doctest.h>

#include <cmath>
#include <nlohmann/json.hpp>

#include "sas/errors.hpp"
#include "sas/model.hpp"

using namespace sas;
using namespace sas::model;
using sas::corpus::Vocabulary;

namespace {

ModelConfig tiny() {
  ModelConfig c;
  c.visual_dim = 6;
  c.embed_dim = 3;
  c.attn_dim = 8;
  c.hidden_dim = 5;
  c.layers = 1;
  c.vocab_size = 12;
  c.max_decode_len = 7;
  return c;
}

data::TrajectoryInput random_trajectory(const ModelConfig& c, int steps, std::uint64_t seed) {
  Rng rng(seed);
  data::TrajectoryInput t;
  t.actions = Matrix::Zero(steps, 4);
  for (int i = 0; i < steps; ++i) {
    Matrix v(c.view_count(), c.slot_feature_dim());
    for (Index k = 0; k < v.size(); ++k) v.data()[k] = rng.uniform(-1, 1);
    t.views.push_back(v);
    const double a = rng.uniform(-3, 3);
    t.actions.row(i) << 1, 0, std::cos(a), std::sin(a);
  }
  return t;
}

bool rows_sum_to_one(const Matrix& m) {
  return ((m.rowwise().sum().array() - 1.0).abs() < 1e-12).all() && (m.array() >= 0).all();
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("encoder and decoder shapes") {
  const auto cfg = tiny();
  SpeakerModel m(cfg, 1);
  const auto traj = random_trajectory(cfg, 3, 2);
  Tape t;
  const auto enc = m.encode(t, traj);
  CHECK(enc.states.rows() == 3);
  CHECK(enc.states.cols() == 10);
  CHECK(enc.visual.cols() == 5);
  CHECK(enc.action.cols() == 10);
  CHECK(enc.summary.rows() == 1);
  CHECK(enc.summary.cols() == 5);
  REQUIRE(enc.pano_weights.size() == 3);
  for (const auto& w : enc.pano_weights) {
    CHECK(w.cols() == 36);
    CHECK(rows_sum_to_one(w.value()));
  }
  CHECK(rows_sum_to_one(enc.traj_weights.value()));

  const auto dec = m.decode(t, enc, {Vocabulary::kBos, 4, 5, 6});
  CHECK(dec.logits.rows() == 4);
  CHECK(dec.logits.cols() == 12);
  CHECK(dec.attention.cols() == 3);
  CHECK(rows_sum_to_one(dec.attention.value()));
  CHECK(dec.hidden.cols() == 5);
}

TEST_CASE("teacher forcing agrees with stepwise decoding") {
  const auto cfg = tiny();
  SpeakerModel m(cfg, 3);
  const auto traj = random_trajectory(cfg, 2, 4);
  const std::vector<int> inputs{Vocabulary::kBos, 7, 8, 4};
  Tape t;
  const auto enc = m.encode(t, traj);
  const Matrix forced = m.decode(t, enc, inputs).logits.value();
  auto state = m.init_decoder(t, enc);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Matrix step = m.decode_step(t, inputs[i], state).logits.value();
    CHECK((step.row(0) - forced.row(static_cast<Index>(i))).norm() < 1e-12);
  }
}

TEST_CASE("input validation") {
  const auto cfg = tiny();
  SpeakerModel m(cfg, 5);
  Tape t;
  CHECK_THROWS_AS(m.encode(t, data::TrajectoryInput{}), EmptyTrajectory);

  auto bad = random_trajectory(cfg, 2, 6);
  bad.views[1] = Matrix::Zero(36, 3);
  CHECK_THROWS_AS(m.encode(t, bad), ShapeError);
  auto bad_actions = random_trajectory(cfg, 2, 6);
  bad_actions.actions = Matrix::Zero(1, 4);
  CHECK_THROWS_AS(m.encode(t, bad_actions), ShapeError);

  const auto enc = m.encode(t, random_trajectory(cfg, 2, 6));
  CHECK_THROWS_AS(m.decode(t, enc, {Vocabulary::kBos, 12}), VocabError);
  CHECK_THROWS_AS(m.decode(t, enc, {-1}), VocabError);
  CHECK_THROWS_AS(m.decode(t, enc, {}), EmptyBatch);

  auto zero = cfg;
  zero.hidden_dim = 0;
  CHECK_THROWS_AS(SpeakerModel(zero, 1), ConfigError);
  auto small_vocab = cfg;
  small_vocab.vocab_size = 3;
  CHECK_THROWS_AS(small_vocab.validate(), ConfigError);
}

TEST_CASE("generation modes") {
  const auto cfg = tiny();
  SpeakerModel m(cfg, 7);
  const auto traj = random_trajectory(cfg, 3, 8);

  auto one = DecodeMode::greedy();
  one.max_len = 1;
  const auto g1 = m.generate(traj, one);
  CHECK(g1.tokens.size() == 1);
  CHECK(g1.attention.rows() == 1);
  CHECK(g1.attention.cols() == 3);

  const auto a = m.generate(traj, DecodeMode::greedy());
  const auto b = m.generate(traj, DecodeMode::greedy());
  CHECK(a.tokens == b.tokens);
  CHECK(a.tokens.size() <= 7);
  for (double lp : a.log_probs) CHECK(lp <= 0.0);
  if (a.tokens.size() < 7) CHECK(a.tokens.back() == Vocabulary::kEos);

  const auto s1 = m.generate(traj, DecodeMode::sampling(42));
  const auto s2 = m.generate(traj, DecodeMode::sampling(42));
  CHECK(s1.tokens == s2.tokens);
  CHECK(s1.log_probs == s2.log_probs);
}

TEST_CASE("rollout log-probability matches its logits") {
  const auto cfg = tiny();
  SpeakerModel m(cfg, 9);
  Tape t;
  const auto enc = m.encode(t, random_trajectory(cfg, 2, 10));
  Rng rng(11);
  const auto r = m.rollout(t, enc, rng, 6, false);
  REQUIRE(r.tokens.size() == 6);
  CHECK(r.inputs.front() == Vocabulary::kBos);
  double expected = 0.0;
  const Matrix& z = r.logits.value();
  for (Index i = 0; i < z.rows(); ++i) {
    const double lse = std::log(z.row(i).array().exp().sum());
    expected += z(i, r.tokens[static_cast<std::size_t>(i)]) - lse;
    if (i > 0) CHECK(r.inputs[static_cast<std::size_t>(i)] == r.tokens[static_cast<std::size_t>(i - 1)]);
  }
  CHECK(r.log_prob_sum.scalar() == doctest::Approx(expected));
  CHECK_THROWS_AS(m.rollout(t, enc, rng, 0, true), ConfigError);
}

TEST_CASE("heading adjacency wraps within each band") {
  const Matrix a = heading_adjacency(12, 3);
  CHECK(a.rows() == 36);
  CHECK(a == a.transpose());
  CHECK((a.rowwise().sum().array() == 2.0).all());
  CHECK(a(0, 11) == 1.0);
  CHECK(a(0, 1) == 1.0);
  CHECK(a(11, 12) == 0.0);
  CHECK(a.diagonal().isZero());
  CHECK(heading_adjacency(1, 3).isZero());
}

TEST_CASE("parameter counting") {
  nn::ParameterSet ps;
  Rng rng(1);
  nn::Linear lin(ps, "proj", 4, 3, rng);
  ps.add("frozen", Matrix::Zero(2, 2), false);
  CHECK(count_parameters(ps) == 15);
  const auto ledger = parameter_ledger(ps);
  CHECK(ledger.size() == 1);
  CHECK(ledger.at("proj") == 15);

  SpeakerModel m(tiny(), 1);
  std::size_t total = 0;
  for (const auto& [name, n] : parameter_ledger(m.params())) total += n;
  CHECK(total == count_parameters(m.params()));
}

TEST_CASE("config serialization and presets") {
  const auto p = ModelConfig::full_scale(991);
  CHECK(p.visual_dim == 2048);
  CHECK(p.embed_dim == 300);
  CHECK(p.attn_dim == 512);
  CHECK(p.hidden_dim == 768);
  CHECK(p.vocab_size == 991);

  const auto c = tiny();
  const auto back = model_config_from_json(to_json(c));
  CHECK(back.hidden_dim == c.hidden_dim);
  CHECK(back.vocab_size == c.vocab_size);
  CHECK(back.max_decode_len == c.max_decode_len);
  CHECK_THROWS_AS(model_config_from_json(nlohmann::json{{"layers", "two"}}), ConfigError);
}

TEST_CASE("shift_right feeds BOS first") {
  CHECK(shift_right({4, 5, Vocabulary::kEos}) == std::vector<int>{Vocabulary::kBos, 4, 5});
  CHECK(shift_right({Vocabulary::kEos}) == std::vector<int>{Vocabulary::kBos});
}

}  // TEST_SUITE
