#pragma once

// Turns corpus records into model-ready tensors: per-viewpoint slot
// features, action encodings, target token ids and alignment targets.

#include <map>
#include <string>
#include <vector>

#include "sas/corpus.hpp"
#include "sas/envsim.hpp"
#include "sas/features.hpp"
#include "sas/nn/tape.hpp"

namespace sas::data {

using nn::Index;
using nn::Matrix;

struct TrajectoryInput {
  std::vector<Matrix> views;  // T entries of S x F
  Matrix actions;             // T x 4
  std::size_t steps() const { return views.size(); }
};

struct Example {
  std::string record_id;
  TrajectoryInput trajectory;
  std::vector<int> targets;  // token ids ending in EOS
  Matrix alignment;          // targets.size() x T
};

struct FeatureConfig {
  envsim::ViewConfig view;
  int embed_dim = 32;
  std::size_t top_k = 6;
  std::uint64_t embed_seed = 11;
};

/// Relative (elevation, heading) of each move in radians; the last step is (0, 0).
Matrix path_actions(const envsim::House& house, const std::vector<std::string>& path,
                    const std::vector<double>& headings);

/// Caches viewpoint panoramas per (house, node) since rendering dominates setup time.
class FeatureBuilder {
 public:
  FeatureBuilder(const std::map<std::string, envsim::House>& houses, FeatureConfig cfg);
  FeatureBuilder(const std::map<std::string, envsim::House>& houses, FeatureConfig cfg,
                 features::EmbeddingTable table);

  const FeatureConfig& config() const { return cfg_; }
  const features::EmbeddingTable& table() const { return table_; }
  Index feature_dim() const;

  TrajectoryInput trajectory(const corpus::CorpusRecord& record);
  Example example(const corpus::CorpusRecord& record, const corpus::PosLexicon& lexicon);
  std::vector<Example> examples(const std::vector<corpus::CorpusRecord>& records,
                                const corpus::PosLexicon& lexicon);

 private:
  const envsim::House& house(const std::string& id) const;
  const envsim::Panorama& panorama(const envsim::House& house, const std::string& node);

  const std::map<std::string, envsim::House>& houses_;
  FeatureConfig cfg_;
  features::EmbeddingTable table_;
  std::map<std::pair<std::string, std::string>, envsim::Panorama> cache_;
};

}  // namespace sas::data
