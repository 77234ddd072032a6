#pragma once

// Action, structural and semantic encodings of a viewpoint, plus the
// geometric relation oracle that stands in for a knowledge-graph lookup.

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sas/envsim.hpp"
#include "sas/nn/tape.hpp"

namespace sas::features {

using nn::Index;
using nn::Matrix;

inline constexpr const char* kNoneToken = "<none>";
inline constexpr const char* kUnkToken = "<unk>";
inline constexpr const char* kInToken = "in";

/// [cos(elevation), sin(elevation), cos(heading), sin(heading)].
using ActionEncoding = std::array<double, 4>;

/// Angles in radians; both are wrapped into (-pi, pi] first.
ActionEncoding encode_action(double elevation_rad, double heading_rad);

struct Intrinsics {
  double focal = 1.0;
  double cx = 0.5;
  double cy = 0.5;
};

struct SizeDistance {
  double size_m3 = 0.0;
  double distance_m = 0.0;
};

inline constexpr double kMinVolume = 1e-6;

/// Centroid distance and axis-aligned volume of the observation's depth points.
SizeDistance back_project(const envsim::ObjectObservation& obs, const Intrinsics& intrinsics = {});

/// "on top of", "under", "above", "below", "next to", "near", "far from".
const std::vector<std::string>& relation_tokens();

/// First matching geometric rule between two placed objects.
std::string infer_relation(const envsim::PlacedObject& a, const envsim::PlacedObject& b);

/// Closest distance between the surfaces of two axis-aligned boxes (0 if they touch).
double box_gap(const envsim::PlacedObject& a, const envsim::PlacedObject& b);

class EmbeddingTable {
 public:
  /// Seeded N(0, 1/G) rows for every listed token, plus <none> and <unk>.
  static EmbeddingTable seeded(const std::vector<std::string>& tokens, int dim, std::uint64_t seed);
  /// Whitespace `word v1 .. vG` lines; <none>/<unk> are added if absent.
  static EmbeddingTable load(const std::filesystem::path& path, std::uint64_t seed = 0);

  int dim() const { return dim_; }
  bool contains(const std::string& token) const { return rows_.count(token) > 0; }
  /// Row for a token, the <unk> row when missing.
  const Eigen::VectorXd& operator[](const std::string& token) const;
  /// Exact entry if present, else the mean of the word rows.
  Eigen::VectorXd phrase(const std::string& text) const;
  /// L x G matrix of token rows.
  Matrix embed(const std::vector<std::string>& tokens) const;
  std::size_t size() const { return rows_.size(); }

 private:
  int dim_ = 0;
  std::map<std::string, Eigen::VectorXd> rows_;
};

/// Default token list for seeded tables: categories, room labels, relations.
std::vector<std::string> scene_tokens();

struct StructuralEncoding {
  Matrix slots;  // S x (G + 4): [f_o, c_x, c_y, s_o, d_o] of the top detection
};

struct SemanticEncoding {
  Matrix e_obj;   // S x 3G
  Matrix e_room;  // S x 3G
};

/// Detections of a slot sorted by confidence (desc), ties by object id.
std::vector<const envsim::ObjectObservation*> ranked_detections(const envsim::ViewSlot& slot,
                                                                std::size_t k);

StructuralEncoding build_structural(const envsim::Panorama& pano, const EmbeddingTable& table);

SemanticEncoding build_semantic(const envsim::Panorama& pano, const envsim::House& house,
                                const EmbeddingTable& table, std::size_t k);

/// Per-slot model input [f_c; e_obj; e_room; E_so], with slot rows rolled so
/// that heading index 0 is the sector the agent is facing.
Matrix viewpoint_features(const envsim::Panorama& pano, const envsim::House& house,
                          const EmbeddingTable& table, double agent_heading_deg, std::size_t k,
                          const envsim::ViewConfig& cfg = {});

inline Eigen::Index viewpoint_feature_dim(int visual_dim, int g) { return visual_dim + 7 * g + 4; }

}  // namespace sas::features
