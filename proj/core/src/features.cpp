#include "sas/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "sas/errors.hpp"
#include "sas/rng.hpp"

namespace sas::features {

namespace {

double wrap_rad(double a) {
  const double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

bool xy_overlap(const envsim::PlacedObject& a, const envsim::PlacedObject& b) {
  for (int k = 0; k < 2; ++k) {
    const double lo = std::max(a.center[k] - a.extents[k] / 2, b.center[k] - b.extents[k] / 2);
    const double hi = std::min(a.center[k] + a.extents[k] / 2, b.center[k] + b.extents[k] / 2);
    if (hi <= lo) return false;
  }
  return true;
}

constexpr double kContactTol = 0.1;
constexpr double kNextTo = 1.0;
constexpr double kNear = 2.5;

Eigen::VectorXd seeded_row(const std::string& token, int dim, std::uint64_t seed) {
  Rng rng(stable_hash(token, seed));
  Eigen::VectorXd v(dim);
  const double s = 1.0 / std::sqrt(static_cast<double>(dim));
  for (int i = 0; i < dim; ++i) v[i] = rng.normal() * s;
  return v;
}

}  // namespace

ActionEncoding encode_action(double elevation_rad, double heading_rad) {
  const double t = wrap_rad(elevation_rad);
  const double p = wrap_rad(heading_rad);
  return {std::cos(t), std::sin(t), std::cos(p), std::sin(p)};
}

SizeDistance back_project(const envsim::ObjectObservation& obs, const Intrinsics&) {
  if (obs.depth_points.empty()) throw NoDepth("observation of '" + obs.object_id + "' has no depth");
  envsim::Vec3 lo = obs.depth_points.front();
  envsim::Vec3 hi = lo;
  envsim::Vec3 sum = envsim::Vec3::Zero();
  for (const auto& p : obs.depth_points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
    sum += p;
  }
  const envsim::Vec3 centroid = sum / static_cast<double>(obs.depth_points.size());
  const envsim::Vec3 ext = hi - lo;
  return {std::max(ext.prod(), kMinVolume), centroid.norm()};
}

const std::vector<std::string>& relation_tokens() {
  static const std::vector<std::string> kRelations{"on top of", "under",   "above",   "below",
                                                   "next to",   "near",    "far from"};
  return kRelations;
}

double box_gap(const envsim::PlacedObject& a, const envsim::PlacedObject& b) {
  envsim::Vec3 gap;
  for (int k = 0; k < 3; ++k) {
    const double d = std::abs(a.center[k] - b.center[k]) - (a.extents[k] + b.extents[k]) / 2;
    gap[k] = std::max(d, 0.0);
  }
  return gap.norm();
}

std::string infer_relation(const envsim::PlacedObject& a, const envsim::PlacedObject& b) {
  if (a.id == b.id) throw SelfRelation("object '" + a.id + "' related to itself");
  if (xy_overlap(a, b)) {
    if (std::abs(a.bottom() - b.top()) <= kContactTol) return "on top of";
    if (std::abs(b.bottom() - a.top()) <= kContactTol) return "under";
    if (a.bottom() - b.top() > kContactTol) return "above";
    if (b.bottom() - a.top() > kContactTol) return "below";
  }
  const double gap = box_gap(a, b);
  if (gap < kNextTo) return "next to";
  if (gap < kNear) return "near";
  return "far from";
}

EmbeddingTable EmbeddingTable::seeded(const std::vector<std::string>& tokens, int dim,
                                      std::uint64_t seed) {
  if (dim <= 0) throw ConfigError("embedding dim must be positive");
  EmbeddingTable t;
  t.dim_ = dim;
  for (const auto& tok : tokens) t.rows_.emplace(tok, seeded_row(tok, dim, seed));
  t.rows_.emplace(kNoneToken, seeded_row(kNoneToken, dim, seed));
  t.rows_.emplace(kUnkToken, seeded_row(kUnkToken, dim, seed));
  return t;
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  EmbeddingTable t;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string word;
    if (!(ss >> word)) continue;
    std::vector<double> vals;
    double x;
    while (ss >> x) vals.push_back(x);
    if (!ss.eof()) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad number");
    if (t.dim_ == 0) t.dim_ = static_cast<int>(vals.size());
    if (vals.empty() || static_cast<int>(vals.size()) != t.dim_) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(t.dim_) + " values");
    }
    t.rows_[word] = Eigen::Map<Eigen::VectorXd>(vals.data(), t.dim_);
  }
  if (t.dim_ == 0) throw FormatError(path.string() + ": no embeddings");
  t.rows_.emplace(kNoneToken, seeded_row(kNoneToken, t.dim_, seed));
  t.rows_.emplace(kUnkToken, seeded_row(kUnkToken, t.dim_, seed));
  return t;
}

const Eigen::VectorXd& EmbeddingTable::operator[](const std::string& token) const {
  auto it = rows_.find(token);
  if (it != rows_.end()) return it->second;
  return rows_.at(kUnkToken);
}

Eigen::VectorXd EmbeddingTable::phrase(const std::string& text) const {
  auto it = rows_.find(text);
  if (it != rows_.end()) return it->second;
  std::istringstream ss(text);
  std::string w;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim_);
  int n = 0;
  while (ss >> w) {
    acc += (*this)[w];
    ++n;
  }
  if (n == 0) return (*this)[kUnkToken];
  return acc / n;
}

Matrix EmbeddingTable::embed(const std::vector<std::string>& tokens) const {
  Matrix out(static_cast<Index>(tokens.size()), dim_);
  for (std::size_t i = 0; i < tokens.size(); ++i) out.row(static_cast<Index>(i)) = (*this)[tokens[i]].transpose();
  return out;
}

std::vector<std::string> scene_tokens() {
  std::vector<std::string> out = envsim::object_categories();
  for (const auto& r : envsim::room_labels()) out.push_back(r);
  for (const auto& r : relation_tokens()) out.push_back(r);
  out.push_back(kInToken);
  out.push_back("wall");
  return out;
}

std::vector<const envsim::ObjectObservation*> ranked_detections(const envsim::ViewSlot& slot,
                                                                std::size_t k) {
  std::vector<const envsim::ObjectObservation*> out;
  for (const auto& d : slot.detections) out.push_back(&d);
  std::sort(out.begin(), out.end(), [](const auto* a, const auto* b) {
    if (a->confidence != b->confidence) return a->confidence > b->confidence;
    return a->object_id < b->object_id;
  });
  if (out.size() > k) out.resize(k);
  return out;
}

StructuralEncoding build_structural(const envsim::Panorama& pano, const EmbeddingTable& table) {
  const int g = table.dim();
  StructuralEncoding enc;
  enc.slots = Matrix::Zero(static_cast<Index>(pano.slots.size()), g + 4);
  for (std::size_t s = 0; s < pano.slots.size(); ++s) {
    const auto top = ranked_detections(pano.slots[s], 1);
    if (top.empty()) continue;
    const auto& obs = *top.front();
    const auto sd = back_project(obs);
    auto row = enc.slots.row(static_cast<Index>(s));
    row.head(g) = table[obs.category].transpose();
    row[g] = obs.bbox.cx;
    row[g + 1] = obs.bbox.cy;
    row[g + 2] = sd.size_m3;
    row[g + 3] = sd.distance_m;
  }
  return enc;
}

SemanticEncoding build_semantic(const envsim::Panorama& pano, const envsim::House& house,
                                const EmbeddingTable& table, std::size_t k) {
  if (k == 0) throw ConfigError("K must be at least 1");
  const int g = table.dim();
  const auto n = static_cast<Index>(pano.slots.size());
  SemanticEncoding enc;
  enc.e_obj.resize(n, 3 * g);
  enc.e_room.resize(n, 3 * g);
  const Eigen::VectorXd& none = table[kNoneToken];
  const envsim::Room* room = house.has_node(pano.viewpoint) ? house.room_of(pano.viewpoint) : nullptr;
  const Eigen::VectorXd room_vec = room ? table.phrase(room->label) : none;

  for (Index s = 0; s < n; ++s) {
    const auto ranked = ranked_detections(pano.slots[static_cast<std::size_t>(s)], k);
    auto obj = enc.e_obj.row(s);
    auto rm = enc.e_room.row(s);
    if (ranked.empty()) {
      for (int j = 0; j < 3; ++j) {
        obj.segment(j * g, g) = none.transpose();
        rm.segment(j * g, g) = none.transpose();
      }
      continue;
    }
    const auto& top = *ranked.front();
    const envsim::PlacedObject* a = house.object(top.object_id);
    const envsim::PlacedObject* partner = nullptr;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < ranked.size(); ++i) {
      const envsim::PlacedObject* b = house.object(ranked[i]->object_id);
      if (!a || !b || b->id == a->id) continue;
      const double d = (b->center - a->center).norm();
      if (d < best) {
        best = d;
        partner = b;
      }
    }
    obj.segment(0, g) = table.phrase(top.category).transpose();
    if (partner) {
      obj.segment(g, g) = table.phrase(infer_relation(*a, *partner)).transpose();
      obj.segment(2 * g, g) = table.phrase(partner->category).transpose();
    } else {
      obj.segment(g, g) = none.transpose();
      obj.segment(2 * g, g) = none.transpose();
    }
    rm.segment(0, g) = table.phrase(top.category).transpose();
    rm.segment(g, g) = table[kInToken].transpose();
    rm.segment(2 * g, g) = room_vec.transpose();
  }
  return enc;
}

Matrix viewpoint_features(const envsim::Panorama& pano, const envsim::House& house,
                          const EmbeddingTable& table, double agent_heading_deg, std::size_t k,
                          const envsim::ViewConfig& cfg) {
  const int g = table.dim();
  const int v = cfg.visual_dim;
  const auto sem = build_semantic(pano, house, table, k);
  const auto st = build_structural(pano, table);
  const int hs = envsim::heading_sector(agent_heading_deg, cfg);
  const Index n = cfg.slot_count();
  if (static_cast<Index>(pano.slots.size()) != n) throw ShapeError("panorama slot count mismatch");
  Matrix out(n, viewpoint_feature_dim(v, g));
  for (int e = 0; e < cfg.elevations; ++e) {
    for (int r = 0; r < cfg.headings; ++r) {
      const Index dst = e * cfg.headings + r;
      const Index src = e * cfg.headings + (r + hs) % cfg.headings;
      const auto& slot = pano.slots[static_cast<std::size_t>(src)];
      if (slot.feature.size() != v) throw ShapeError("slot feature has the wrong dimension");
      out.row(dst) << slot.feature.transpose(), sem.e_obj.row(src), sem.e_room.row(src),
          st.slots.row(src);
    }
  }
  return out;
}

}  // namespace sas::features
