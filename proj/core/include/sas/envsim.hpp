#pragma once

// Synthetic houses, panoramic observations and templated silver
// instructions. Everything here is a pure function of (house, seed).

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace sas::envsim {

using Vec3 = Eigen::Vector3d;

inline constexpr double kCeilingHeight = 3.0;
inline constexpr double kCameraHeight = 1.5;
inline constexpr double kMinEdgeLength = 1.0;
inline constexpr double kMaxEdgeLength = 4.0;

struct Node {
  std::string id;
  Vec3 position = Vec3::Zero();
};

struct Edge {
  std::string a;
  std::string b;
  double length = 0.0;
};

struct Room {
  std::string id;
  std::string label;
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  /// Half-open containment so that nodes on a shared wall belong to one room.
  bool contains(const Vec3& p) const {
    for (int k = 0; k < 3; ++k) {
      if (p[k] < min[k] || p[k] >= max[k]) return false;
    }
    return true;
  }
};

struct PlacedObject {
  std::string id;
  std::string category;
  Vec3 center = Vec3::Zero();
  Vec3 extents = Vec3::Ones();

  double bottom() const { return center.z() - extents.z() / 2.0; }
  double top() const { return center.z() + extents.z() / 2.0; }
};

struct House {
  std::string id;
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  std::vector<Room> rooms;
  std::vector<PlacedObject> objects;

  /// Index of a node id; throws NodeNotFound.
  std::size_t node_index(const std::string& node_id) const;
  const Node& node(const std::string& node_id) const { return nodes[node_index(node_id)]; }
  bool has_node(const std::string& node_id) const;
  /// Neighbor ids in edge-list order.
  std::vector<std::string> neighbors(const std::string& node_id) const;
  std::optional<double> edge_length(const std::string& a, const std::string& b) const;
  /// Room containing the node, or nullptr if none does.
  const Room* room_of(const std::string& node_id) const;
  const PlacedObject* object(const std::string& object_id) const;
};

struct HouseSpec {
  int rooms = 6;
  int nodes_per_room = 4;
  int objects_per_room = 3;
};

/// Closed category and room-label vocabularies used by the generator.
const std::vector<std::string>& object_categories();
const std::vector<std::string>& room_labels();

House generate_house(std::uint64_t seed, const HouseSpec& spec);

/// Panorama discretisation and the ground-truth detector settings.
struct ViewConfig {
  int headings = 12;
  int elevations = 3;
  int visual_dim = 64;
  double max_range = 8.0;
  double focal = 1.0;
  /// Std-dev of seeded confidence noise; 0 disables it.
  double confidence_noise = 0.0;
  std::uint64_t noise_seed = 0;
  std::uint64_t feature_seed = 17;

  int slot_count() const { return headings * elevations; }
  double heading_step_deg() const { return 360.0 / headings; }
  double elevation_step_deg() const { return 30.0; }
  /// Center elevation of band e, e.g. {-30, 0, +30} for three bands.
  double elevation_center_deg(int e) const {
    return (e - (elevations - 1) / 2.0) * elevation_step_deg();
  }
  double heading_center_deg(int h) const { return (h + 0.5) * heading_step_deg(); }
};

/// Normalized (c_x, c_y, w, h) bounding box in the unit image.
struct BBox {
  double cx = 0.5;
  double cy = 0.5;
  double w = 0.0;
  double h = 0.0;
};

struct ObjectObservation {
  std::string object_id;
  std::string category;
  BBox bbox;
  std::vector<Vec3> depth_points;  // camera frame, meters
  double confidence = 0.0;
};

struct ViewSlot {
  int heading = 0;
  int elevation = 0;
  Eigen::VectorXd feature;
  bool candidate = false;
  std::string neighbor;
  std::vector<ObjectObservation> detections;
};

struct Panorama {
  std::string viewpoint;
  std::vector<ViewSlot> slots;  // index = elevation * headings + heading

  const ViewSlot& slot(int heading, int elevation, int headings = 12) const {
    return slots[static_cast<std::size_t>(elevation * headings + heading)];
  }
};

/// Heading of the direction from -> to, degrees in [0, 360); 0 = +y, clockwise.
double bearing_deg(const Vec3& from, const Vec3& to);
/// Elevation of the direction from -> to, degrees in [-90, 90].
double elevation_deg(const Vec3& from, const Vec3& to);
/// Wraps an angle in degrees into (-180, 180].
double wrap_deg(double deg);

int heading_sector(double bearing, const ViewConfig& cfg);
int elevation_band(double elevation, const ViewConfig& cfg);

/// Camera pose for a view slot: rows are the camera x (right), y (down) and
/// z (forward) axes expressed in world coordinates.
Eigen::Matrix3d camera_rotation(int heading, int elevation, const ViewConfig& cfg);

/// Pinhole projection of camera-frame corner points into a clamped unit-image box.
BBox project_box(const std::vector<Vec3>& corners, double focal);

/// Corners of an axis-aligned box in camera frame.
std::vector<Vec3> box_corners(const Vec3& center, const Vec3& half_extents);

std::vector<ObjectObservation> detect_objects(const House& house, const std::string& node_id,
                                              int heading, int elevation,
                                              const ViewConfig& cfg = {});

Panorama render_panorama(const House& house, const std::string& node_id,
                         const ViewConfig& cfg = {});

/// Deterministic unit-norm feature for a token; "<empty>" gives the empty-view vector.
Eigen::VectorXd hashed_feature(const std::string& token, int dim, std::uint64_t seed);

double path_length(const House& house, const std::vector<std::string>& path);

std::vector<std::string> sample_path(const House& house, std::uint64_t seed, double min_len_m,
                                     double max_len_m, int max_retries = 1000);

struct MicroInstruction {
  std::size_t edge = 0;
  std::string text;
};

struct SilverSample {
  std::string house_id;
  std::vector<std::string> path;
  std::vector<MicroInstruction> micro_instructions;
  std::string instruction;
};

enum class Turn { kLeft, kRight, kStraight };

/// Positive heading change is clockwise, i.e. a right turn.
Turn classify_turn(double heading_change_deg, double threshold_deg = 30.0);
std::string turn_phrase(Turn turn);

inline constexpr int kMovementTemplates = 6;
inline constexpr int kStopTemplates = 3;

std::string render_movement(int template_index, const std::string& object,
                            const std::string& room, Turn turn);
std::string render_stop(int template_index, const std::string& object, const std::string& room);

/// Per-node agent headings along a path: the heading on arrival, with the
/// start node facing the first edge.
std::vector<double> path_headings(const House& house, const std::vector<std::string>& path);

SilverSample template_instruction(const House& house, const std::vector<std::string>& path,
                                  std::uint64_t seed, const ViewConfig& cfg = {});

nlohmann::json to_json(const House& house);
House house_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SilverSample& sample);
SilverSample silver_from_json(const nlohmann::json& j);

}  // namespace sas::envsim
