#include "sas/dataset.hpp"

#include <cmath>
#include <numbers>

#include "sas/errors.hpp"

namespace sas::data {

namespace {
constexpr double kDeg = std::numbers::pi / 180.0;
}

Matrix path_actions(const envsim::House& house, const std::vector<std::string>& path,
                    const std::vector<double>& headings) {
  if (path.empty()) throw EmptyTrajectory("path has no viewpoints");
  if (headings.size() != path.size()) throw ShapeError("one heading per viewpoint expected");
  Matrix a(static_cast<Index>(path.size()), 4);
  for (std::size_t t = 0; t < path.size(); ++t) {
    double elev = 0.0;
    double turn = 0.0;
    if (t + 1 < path.size()) {
      const auto& p = house.node(path[t]).position;
      const auto& q = house.node(path[t + 1]).position;
      elev = envsim::elevation_deg(p, q);
      turn = envsim::wrap_deg(envsim::bearing_deg(p, q) - headings[t]);
    }
    const auto e = features::encode_action(elev * kDeg, turn * kDeg);
    for (int k = 0; k < 4; ++k) a(static_cast<Index>(t), k) = e[static_cast<std::size_t>(k)];
  }
  return a;
}

FeatureBuilder::FeatureBuilder(const std::map<std::string, envsim::House>& houses,
                               FeatureConfig cfg)
    : FeatureBuilder(houses, cfg,
                     features::EmbeddingTable::seeded(features::scene_tokens(), cfg.embed_dim,
                                                      cfg.embed_seed)) {}

FeatureBuilder::FeatureBuilder(const std::map<std::string, envsim::House>& houses,
                               FeatureConfig cfg, features::EmbeddingTable table)
    : houses_(houses), cfg_(cfg), table_(std::move(table)) {
  cfg_.embed_dim = table_.dim();
}

Index FeatureBuilder::feature_dim() const {
  return features::viewpoint_feature_dim(cfg_.view.visual_dim, cfg_.embed_dim);
}

const envsim::House& FeatureBuilder::house(const std::string& id) const {
  auto it = houses_.find(id);
  if (it == houses_.end()) throw NodeNotFound("house '" + id + "' not loaded");
  return it->second;
}

const envsim::Panorama& FeatureBuilder::panorama(const envsim::House& h, const std::string& node) {
  auto key = std::make_pair(h.id, node);
  auto it = cache_.find(key);
  if (it == cache_.end()) it = cache_.emplace(key, envsim::render_panorama(h, node, cfg_.view)).first;
  return it->second;
}

TrajectoryInput FeatureBuilder::trajectory(const corpus::CorpusRecord& record) {
  const auto& h = house(record.house_id);
  if (record.path.empty()) throw EmptyTrajectory("record '" + record.record_id + "' has no path");
  const auto headings =
      record.headings.size() == record.path.size() ? record.headings : envsim::path_headings(h, record.path);
  TrajectoryInput in;
  for (std::size_t t = 0; t < record.path.size(); ++t) {
    const auto& pano = panorama(h, record.path[t]);
    in.views.push_back(
        features::viewpoint_features(pano, h, table_, headings[t], cfg_.top_k, cfg_.view));
  }
  in.actions = path_actions(h, record.path, headings);
  return in;
}

Example FeatureBuilder::example(const corpus::CorpusRecord& record,
                                const corpus::PosLexicon& lexicon) {
  Example ex;
  ex.record_id = record.record_id;
  ex.trajectory = trajectory(record);
  ex.targets = record.token_ids;
  if (ex.targets.empty() || ex.targets.back() != corpus::Vocabulary::kEos) {
    ex.targets.push_back(corpus::Vocabulary::kEos);
  }
  const auto a = corpus::build_alignment(record, lexicon);
  if (a.rows() != static_cast<Index>(ex.targets.size())) {
    throw ShapeError("record '" + record.record_id + "': alignment has " +
                     std::to_string(a.rows()) + " rows for " + std::to_string(ex.targets.size()) +
                     " target tokens");
  }
  ex.alignment = a;
  return ex;
}

std::vector<Example> FeatureBuilder::examples(const std::vector<corpus::CorpusRecord>& records,
                                              const corpus::PosLexicon& lexicon) {
  std::vector<Example> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(example(r, lexicon));
  return out;
}

}  // namespace sas::data
