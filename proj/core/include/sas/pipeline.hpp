#pragma once

// Seeded end-to-end corpus construction shared by the command-line tool and tests.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sas/corpus.hpp"
#include "sas/envsim.hpp"
#include "sas/path_mix.hpp"

namespace sas::pipeline {

struct GenConfig {
  std::uint64_t seed = 1;
  int houses = 4;
  int samples_per_house = 25;
  envsim::HouseSpec spec;
  double min_path_m = 4.0;
  double max_path_m = 12.0;
  envsim::ViewConfig view;
  void validate() const;
};

struct GeneratedCorpus {
  std::vector<envsim::House> houses;
  std::vector<corpus::CorpusRecord> records;
  corpus::Vocabulary vocab;
  corpus::PosLexicon lexicon;
};

GeneratedCorpus generate(const GenConfig& cfg);

std::map<std::string, envsim::House> by_id(const std::vector<envsim::House>& houses);

struct MixOutcome {
  std::vector<corpus::CorpusRecord> records;  // mixed records only
  corpus::MixTally tally;
};

/// Mixes each house's records separately; per-house seeds derive from cfg.seed.
MixOutcome mix_corpus(const std::vector<corpus::CorpusRecord>& records,
                      const std::map<std::string, envsim::House>& houses,
                      const corpus::PathMixConfig& cfg, const corpus::PosLexicon& lexicon,
                      const corpus::Vocabulary& vocab);

}  // namespace sas::pipeline
