#include "sas/pipeline.hpp"

#include "sas/errors.hpp"
#include "sas/rng.hpp"

namespace sas::pipeline {

void GenConfig::validate() const {
  if (houses < 1) throw ConfigError("gen.houses must be at least 1");
  if (samples_per_house < 0) throw ConfigError("gen.samples_per_house must be non-negative");
  if (spec.rooms < 1 || spec.nodes_per_room < 1 || spec.objects_per_room < 0) {
    throw ConfigError("house spec must have rooms and nodes");
  }
  if (min_path_m < 0 || max_path_m < min_path_m) throw ConfigError("bad path length window");
}

GeneratedCorpus generate(const GenConfig& cfg) {
  cfg.validate();
  GeneratedCorpus out;
  out.lexicon = corpus::PosLexicon::default_lexicon();
  std::vector<envsim::SilverSample> samples;
  for (int h = 0; h < cfg.houses; ++h) {
    const std::uint64_t house_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(h));
    out.houses.push_back(envsim::generate_house(house_seed, cfg.spec));
    const auto& house = out.houses.back();
    for (int i = 0; i < cfg.samples_per_house; ++i) {
      const std::uint64_t s = mix_seed(house_seed, static_cast<std::uint64_t>(i) + 1);
      const auto path = envsim::sample_path(house, s, cfg.min_path_m, cfg.max_path_m);
      samples.push_back(envsim::template_instruction(house, path, s, cfg.view));
    }
  }
  std::vector<corpus::TokenList> sentences;
  for (const auto& s : samples) sentences.push_back(corpus::tokenize(s.instruction));
  out.vocab = corpus::Vocabulary::build(sentences);
  const auto houses = by_id(out.houses);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    out.records.push_back(corpus::make_record(houses.at(s.house_id), s,
                                              "silver_" + s.house_id + "_" + std::to_string(i),
                                              out.vocab, corpus::Provenance::kSilver));
  }
  return out;
}

std::map<std::string, envsim::House> by_id(const std::vector<envsim::House>& houses) {
  std::map<std::string, envsim::House> m;
  for (const auto& h : houses) m.emplace(h.id, h);
  return m;
}

MixOutcome mix_corpus(const std::vector<corpus::CorpusRecord>& records,
                      const std::map<std::string, envsim::House>& houses,
                      const corpus::PathMixConfig& cfg, const corpus::PosLexicon& lexicon,
                      const corpus::Vocabulary& vocab) {
  std::map<std::string, std::vector<corpus::CorpusRecord>> per_house;
  for (const auto& r : records) {
    if (r.provenance != corpus::Provenance::kMixed) per_house[r.house_id].push_back(r);
  }
  MixOutcome out;
  for (const auto& [id, recs] : per_house) {
    auto it = houses.find(id);
    if (it == houses.end()) throw NodeNotFound("house '" + id + "' not loaded");
    corpus::PathMixConfig c = cfg;
    c.seed = mix_seed(cfg.seed, stable_hash(id));
    auto res = corpus::mix_paths_detailed(recs, it->second, c, lexicon, vocab);
    auto& t = out.tally;
    t.candidates += res.tally.candidates;
    t.rejected_gap += res.tally.rejected_gap;
    t.rejected_loop += res.tally.rejected_loop;
    t.rejected_start_end += res.tally.rejected_start_end;
    t.rejected_length += res.tally.rejected_length;
    t.accepted += res.tally.accepted;
    t.random_picks += res.tally.random_picks;
    for (auto& r : res.records) out.records.push_back(std::move(r));
  }
  return out;
}

}  // namespace sas::pipeline
