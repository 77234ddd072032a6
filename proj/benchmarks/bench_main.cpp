#include <benchmark/benchmark.h>

#include "sas/metrics.hpp"
#include "sas/pipeline.hpp"
#include "sas/train.hpp"

using namespace sas;
using sas::corpus::Vocabulary;
using sas::nn::Index;
using sas::nn::Matrix;

namespace {

model::ModelConfig bench_model(int hidden) {
  model::ModelConfig c;
  c.visual_dim = 64;
  c.embed_dim = 16;
  c.attn_dim = hidden;
  c.hidden_dim = hidden;
  c.layers = 1;
  c.vocab_size = 200;
  c.max_decode_len = 40;
  return c;
}

data::Example synthetic(const model::ModelConfig& c, int steps, int words, std::uint64_t seed) {
  Rng rng(seed);
  data::Example ex;
  ex.trajectory.actions = Matrix::Zero(steps, 4);
  for (int i = 0; i < steps; ++i) {
    Matrix v(c.view_count(), c.slot_feature_dim());
    for (Index k = 0; k < v.size(); ++k) v.data()[k] = rng.uniform(-1, 1);
    ex.trajectory.views.push_back(v);
    ex.trajectory.actions.row(i) << 1, 0, 1, 0;
  }
  for (int w = 0; w + 1 < words; ++w) {
    ex.targets.push_back(Vocabulary::kReserved + static_cast<int>(rng.uniform(0, c.vocab_size - 5)));
  }
  ex.targets.push_back(Vocabulary::kEos);
  ex.alignment = Matrix::Zero(words, steps);
  for (int w = 0; w < words; ++w) ex.alignment(w, w * steps / words) = 1.0;
  return ex;
}

void BM_TrainStep(benchmark::State& state) {
  const auto c = bench_model(static_cast<int>(state.range(0)));
  model::SpeakerModel m(c, 1);
  const auto a = synthetic(c, 6, 20, 2);
  const auto b = synthetic(c, 6, 20, 3);
  std::vector<const data::Example*> batch{&a, &b};
  train::TrainConfig cfg;
  auto opt = train::make_optimizer(cfg);
  Rng rng(4);
  for (auto _ : state) benchmark::DoNotOptimize(train::train_step(m, opt, batch, cfg, rng).total);
}
BENCHMARK(BM_TrainStep)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_GreedyDecode(benchmark::State& state) {
  const auto c = bench_model(64);
  model::SpeakerModel m(c, 1);
  const auto ex = synthetic(c, 6, 20, 5);
  auto mode = model::DecodeMode::greedy();
  for (auto _ : state) benchmark::DoNotOptimize(m.generate(ex.trajectory, mode).tokens.size());
}
BENCHMARK(BM_GreedyDecode)->Unit(benchmark::kMillisecond);

std::vector<metrics::EvalPair> eval_pairs(const pipeline::GeneratedCorpus& g) {
  std::vector<metrics::EvalPair> out;
  for (std::size_t i = 0; i + 1 < g.records.size(); ++i) {
    metrics::EvalPair p;
    p.candidate = corpus::tokenize(g.records[i].instruction);
    p.references = {corpus::tokenize(g.records[i + 1].instruction), corpus::tokenize(g.records[i].instruction)};
    out.push_back(std::move(p));
  }
  return out;
}

const pipeline::GeneratedCorpus& small_corpus() {
  static const auto g = [] {
    pipeline::GenConfig cfg;
    cfg.houses = 2;
    cfg.samples_per_house = 50;
    return pipeline::generate(cfg);
  }();
  return g;
}

void BM_Metrics(benchmark::State& state) {
  const auto pairs = eval_pairs(small_corpus());
  for (auto _ : state) benchmark::DoNotOptimize(metrics::evaluate(pairs).cider);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pairs.size()));
}
BENCHMARK(BM_Metrics)->Unit(benchmark::kMillisecond);

void BM_PathMix(benchmark::State& state) {
  const auto& g = small_corpus();
  const auto houses = pipeline::by_id(g.houses);
  corpus::PathMixConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(pipeline::mix_corpus(g.records, houses, cfg, g.lexicon, g.vocab).records.size());
  }
}
BENCHMARK(BM_PathMix)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
