#include "sas/envsim.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <map>
#include <nlohmann/json.hpp>
#include <numbers>
#include <queue>
#include <set>

#include "sas/errors.hpp"
#include "sas/rng.hpp"

namespace sas::envsim {

namespace {

constexpr double kDegPerRad = 180.0 / std::numbers::pi;

struct CategoryShape {
  const char* name;
  double x, y, z;  // nominal extents, meters
};

constexpr CategoryShape kCategories[] = {
    {"bed", 1.6, 2.0, 0.6},      {"table", 1.2, 0.8, 0.75},  {"chair", 0.5, 0.5, 0.9},
    {"sofa", 2.0, 0.9, 0.8},     {"desk", 1.2, 0.6, 0.75},   {"cabinet", 0.8, 0.5, 1.8},
    {"lamp", 0.4, 0.4, 1.5},     {"plant", 0.5, 0.5, 1.0},   {"television", 1.0, 0.3, 0.6},
    {"sink", 0.6, 0.5, 0.9},     {"toilet", 0.4, 0.7, 0.8},  {"fridge", 0.8, 0.7, 1.8},
    {"shelf", 1.0, 0.4, 1.8},    {"stove", 0.8, 0.6, 0.9},   {"bathtub", 0.8, 1.7, 0.6},
    {"dresser", 1.2, 0.5, 1.1},
};

double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

bool connected(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  if (n == 0) return true;
  std::vector<std::vector<std::size_t>> adj(n);
  for (auto [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<bool> seen(n, false);
  std::queue<std::size_t> q;
  q.push(0);
  seen[0] = true;
  std::size_t count = 1;
  while (!q.empty()) {
    auto u = q.front();
    q.pop();
    for (auto v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        ++count;
        q.push(v);
      }
    }
  }
  return count == n;
}

nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

Vec3 json_vec(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw FormatError("expected [x,y,z] array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

const std::vector<std::string>& object_categories() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& c : kCategories) out.emplace_back(c.name);
    return out;
  }();
  return names;
}

const std::vector<std::string>& room_labels() {
  static const std::vector<std::string> labels = {"kitchen", "bedroom", "bathroom", "lounge",
                                                  "hallway", "office",  "closet",   "study"};
  return labels;
}

std::size_t House::node_index(const std::string& node_id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id == node_id) return i;
  }
  throw NodeNotFound("node '" + node_id + "' not in house '" + id + "'");
}

bool House::has_node(const std::string& node_id) const {
  return std::any_of(nodes.begin(), nodes.end(),
                     [&](const Node& n) { return n.id == node_id; });
}

std::vector<std::string> House::neighbors(const std::string& node_id) const {
  std::vector<std::string> out;
  for (const auto& e : edges) {
    if (e.a == node_id) out.push_back(e.b);
    if (e.b == node_id) out.push_back(e.a);
  }
  return out;
}

std::optional<double> House::edge_length(const std::string& a, const std::string& b) const {
  for (const auto& e : edges) {
    if ((e.a == a && e.b == b) || (e.a == b && e.b == a)) return e.length;
  }
  return std::nullopt;
}

const Room* House::room_of(const std::string& node_id) const {
  const Vec3& p = node(node_id).position;
  for (const auto& r : rooms) {
    if (r.contains(p)) return &r;
  }
  return nullptr;
}

const PlacedObject* House::object(const std::string& object_id) const {
  for (const auto& o : objects) {
    if (o.id == object_id) return &o;
  }
  return nullptr;
}

House generate_house(std::uint64_t seed, const HouseSpec& spec) {
  const int k = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(spec.nodes_per_room))));
  const double cell = 2.5;
  const double side = cell * k;
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(spec.rooms))));

  // Placement is retried with a derived seed until the graph is connected;
  // the attempt counter is part of the seed so the result stays deterministic.
  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng(mix_seed(seed, attempt));
    House house;
    house.id = "house_" + std::to_string(seed);

    std::vector<std::string> labels = room_labels();
    rng.shuffle(labels);
    for (int r = 0; r < spec.rooms; ++r) {
      Room room;
      room.id = "r" + std::to_string(r);
      room.label = labels[static_cast<std::size_t>(r) % labels.size()];
      const double x0 = (r % cols) * side;
      const double y0 = (r / cols) * side;
      room.min = Vec3(x0, y0, 0.0);
      room.max = Vec3(x0 + side, y0 + side, kCeilingHeight);
      house.rooms.push_back(room);

      std::vector<int> cells(static_cast<std::size_t>(k * k));
      for (int c = 0; c < k * k; ++c) cells[static_cast<std::size_t>(c)] = c;
      rng.shuffle(cells);
      cells.resize(static_cast<std::size_t>(spec.nodes_per_room));
      std::sort(cells.begin(), cells.end());
      for (int c : cells) {
        const double jx = rng.uniform(-0.35, 0.35) * cell;
        const double jy = rng.uniform(-0.35, 0.35) * cell;
        Node n;
        n.id = "n" + std::to_string(house.nodes.size());
        n.position = Vec3(x0 + (c % k + 0.5) * cell + jx, y0 + (c / k + 0.5) * cell + jy,
                          kCameraHeight);
        house.nodes.push_back(n);
      }

      for (int o = 0; o < spec.objects_per_room; ++o) {
        const auto& shape = kCategories[rng.index(std::size(kCategories))];
        const double scale = rng.uniform(0.8, 1.2);
        PlacedObject obj;
        obj.id = "o" + std::to_string(house.objects.size());
        obj.category = shape.name;
        obj.extents = Vec3(shape.x, shape.y, shape.z) * scale;
        const double mx = std::min(obj.extents.x() / 2.0 + 0.1, side / 2.0);
        const double my = std::min(obj.extents.y() / 2.0 + 0.1, side / 2.0);
        obj.center = Vec3(rng.uniform(x0 + mx, x0 + side - mx), rng.uniform(y0 + my, y0 + side - my),
                          obj.extents.z() / 2.0);
        house.objects.push_back(obj);
      }
    }

    std::vector<std::pair<std::size_t, std::size_t>> index_edges;
    for (std::size_t i = 0; i < house.nodes.size(); ++i) {
      for (std::size_t j = i + 1; j < house.nodes.size(); ++j) {
        const double d = distance(house.nodes[i].position, house.nodes[j].position);
        if (d >= kMinEdgeLength && d <= kMaxEdgeLength) {
          index_edges.emplace_back(i, j);
          house.edges.push_back({house.nodes[i].id, house.nodes[j].id, d});
        }
      }
    }
    if (connected(house.nodes.size(), index_edges)) return house;
  }
}

double wrap_deg(double deg) {
  double w = std::fmod(deg, 360.0);
  if (w <= -180.0) w += 360.0;
  if (w > 180.0) w -= 360.0;
  return w;
}

double bearing_deg(const Vec3& from, const Vec3& to) {
  const Vec3 d = to - from;
  double b = std::atan2(d.x(), d.y()) * kDegPerRad;
  if (b < 0.0) b += 360.0;
  if (b >= 360.0) b -= 360.0;
  return b;
}

double elevation_deg(const Vec3& from, const Vec3& to) {
  const Vec3 d = to - from;
  return std::atan2(d.z(), std::hypot(d.x(), d.y())) * kDegPerRad;
}

int heading_sector(double bearing, const ViewConfig& cfg) {
  double b = std::fmod(bearing, 360.0);
  if (b < 0.0) b += 360.0;
  int h = static_cast<int>(std::floor(b / cfg.heading_step_deg()));
  return std::clamp(h, 0, cfg.headings - 1);
}

int elevation_band(double elevation, const ViewConfig& cfg) {
  // Outer bands extend to the poles so every direction maps to some slot.
  for (int e = 0; e < cfg.elevations - 1; ++e) {
    if (elevation < cfg.elevation_center_deg(e) + cfg.elevation_step_deg() / 2.0) return e;
  }
  return cfg.elevations - 1;
}

Eigen::Matrix3d camera_rotation(int heading, int elevation, const ViewConfig& cfg) {
  const double psi = cfg.heading_center_deg(heading) / kDegPerRad;
  const double eps = cfg.elevation_center_deg(elevation) / kDegPerRad;
  const Vec3 forward(std::sin(psi) * std::cos(eps), std::cos(psi) * std::cos(eps), std::sin(eps));
  const Vec3 right(std::cos(psi), -std::sin(psi), 0.0);
  const Vec3 up = right.cross(forward);
  Eigen::Matrix3d r;
  r.row(0) = right.transpose();
  r.row(1) = -up.transpose();
  r.row(2) = forward.transpose();
  return r;
}

std::vector<Vec3> box_corners(const Vec3& center, const Vec3& half_extents) {
  std::vector<Vec3> out;
  out.reserve(8);
  for (int sx : {-1, 1}) {
    for (int sy : {-1, 1}) {
      for (int sz : {-1, 1}) {
        out.emplace_back(center.x() + sx * half_extents.x(), center.y() + sy * half_extents.y(),
                         center.z() + sz * half_extents.z());
      }
    }
  }
  return out;
}

BBox project_box(const std::vector<Vec3>& corners, double focal) {
  constexpr double kNear = 0.05;
  double ulo = INFINITY, uhi = -INFINITY, vlo = INFINITY, vhi = -INFINITY;
  for (const auto& p : corners) {
    const double z = std::max(p.z(), kNear);
    const double u = focal * p.x() / z;
    const double v = focal * p.y() / z;
    ulo = std::min(ulo, u);
    uhi = std::max(uhi, u);
    vlo = std::min(vlo, v);
    vhi = std::max(vhi, v);
  }
  // Offsets are kept relative to the principal point until the end so that a
  // symmetric box yields a center of exactly 0.5.
  ulo = std::clamp(ulo, -0.5, 0.5);
  uhi = std::clamp(uhi, -0.5, 0.5);
  vlo = std::clamp(vlo, -0.5, 0.5);
  vhi = std::clamp(vhi, -0.5, 0.5);
  BBox box;
  box.cx = 0.5 + (ulo + uhi) / 2.0;
  box.cy = 0.5 + (vlo + vhi) / 2.0;
  box.w = uhi - ulo;
  box.h = vhi - vlo;
  return box;
}

std::vector<ObjectObservation> detect_objects(const House& house, const std::string& node_id,
                                              int heading, int elevation, const ViewConfig& cfg) {
  const Vec3& eye = house.node(node_id).position;
  const Eigen::Matrix3d rot = camera_rotation(heading, elevation, cfg);
  std::vector<ObjectObservation> out;
  for (std::size_t i = 0; i < house.objects.size(); ++i) {
    const auto& obj = house.objects[i];
    const double dist = distance(eye, obj.center);
    if (dist > cfg.max_range || dist <= 0.0) continue;
    if (heading_sector(bearing_deg(eye, obj.center), cfg) != heading) continue;
    if (elevation_band(elevation_deg(eye, obj.center), cfg) != elevation) continue;

    const Vec3 center_cam = rot * (obj.center - eye);
    // Boxes are re-aligned to the camera axes: width along x, height along y,
    // depth along the optical axis.
    const Vec3 half(obj.extents.x() / 2.0, obj.extents.z() / 2.0, obj.extents.y() / 2.0);
    ObjectObservation obs;
    obs.object_id = obj.id;
    obs.category = obj.category;
    obs.depth_points = box_corners(center_cam, half);
    obs.bbox = project_box(obs.depth_points, cfg.focal);
    double conf = 1.0 - dist / cfg.max_range;
    if (cfg.confidence_noise > 0.0) {
      Rng rng(mix_seed(cfg.noise_seed, stable_hash(node_id + "/" + obj.id)));
      conf += cfg.confidence_noise * rng.normal();
    }
    obs.confidence = std::clamp(conf, 0.05, 1.0);
    out.push_back(std::move(obs));
  }
  return out;
}

Eigen::VectorXd hashed_feature(const std::string& token, int dim, std::uint64_t seed) {
  Rng rng(stable_hash(token, seed));
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = rng.normal();
  return v / v.norm();
}

Panorama render_panorama(const House& house, const std::string& node_id, const ViewConfig& cfg) {
  const Vec3& eye = house.node(node_id).position;
  Panorama pano;
  pano.viewpoint = node_id;
  pano.slots.resize(static_cast<std::size_t>(cfg.slot_count()));
  for (int e = 0; e < cfg.elevations; ++e) {
    for (int h = 0; h < cfg.headings; ++h) {
      auto& slot = pano.slots[static_cast<std::size_t>(e * cfg.headings + h)];
      slot.heading = h;
      slot.elevation = e;
      slot.detections = detect_objects(house, node_id, h, e, cfg);
      if (slot.detections.empty()) {
        slot.feature = hashed_feature("<empty>", cfg.visual_dim, cfg.feature_seed);
      } else {
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(cfg.visual_dim);
        for (const auto& d : slot.detections) {
          sum += hashed_feature(d.category, cfg.visual_dim, cfg.feature_seed);
        }
        const double norm = sum.norm();
        slot.feature = norm > 0.0 ? Eigen::VectorXd(sum / norm)
                                  : hashed_feature("<empty>", cfg.visual_dim, cfg.feature_seed);
      }
    }
  }

  // Each neighbor claims the level slot of its heading sector. Collisions fall
  // back to the other elevations of that sector, then to the nearest free sector.
  const int level = elevation_band(0.0, cfg);
  for (const auto& nb : house.neighbors(node_id)) {
    const int h0 = heading_sector(bearing_deg(eye, house.node(nb).position), cfg);
    bool placed = false;
    for (int dh = 0; dh <= cfg.headings / 2 && !placed; ++dh) {
      for (int sign : {1, -1}) {
        if (dh == 0 && sign < 0) continue;
        const int h = ((h0 + sign * dh) % cfg.headings + cfg.headings) % cfg.headings;
        std::vector<int> order{level};
        for (int e = 0; e < cfg.elevations; ++e) {
          if (e != level) order.push_back(e);
        }
        for (int e : order) {
          auto& slot = pano.slots[static_cast<std::size_t>(e * cfg.headings + h)];
          if (!slot.candidate) {
            slot.candidate = true;
            slot.neighbor = nb;
            placed = true;
            break;
          }
        }
        if (placed) break;
      }
    }
  }
  return pano;
}

double path_length(const House& house, const std::vector<std::string>& path) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    auto len = house.edge_length(path[i], path[i + 1]);
    if (!len) throw InvalidPath("no edge " + path[i] + " - " + path[i + 1]);
    total += *len;
  }
  return total;
}

std::vector<std::string> sample_path(const House& house, std::uint64_t seed, double min_len_m,
                                     double max_len_m, int max_retries) {
  if (!(min_len_m > 0.0) || max_len_m < min_len_m) {
    throw InvalidPath("require max_len >= min_len > 0");
  }
  if (house.nodes.empty()) throw PathNotFound("house has no nodes");
  Rng rng(seed);
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    const double target = rng.uniform(min_len_m, max_len_m);
    std::vector<std::string> path{house.nodes[rng.index(house.nodes.size())].id};
    std::set<std::string> visited{path.front()};
    double length = 0.0;
    while (length < target) {
      std::vector<std::pair<std::string, double>> options;
      for (const auto& nb : house.neighbors(path.back())) {
        const double len = *house.edge_length(path.back(), nb);
        if (!visited.count(nb) && length + len <= max_len_m) options.emplace_back(nb, len);
      }
      if (options.empty()) break;
      const auto& [next, len] = options[rng.index(options.size())];
      path.push_back(next);
      visited.insert(next);
      length += len;
    }
    if (path.size() >= 2 && length >= min_len_m && length <= max_len_m) return path;
  }
  throw PathNotFound("no simple path with length in [" + std::to_string(min_len_m) + ", " +
                     std::to_string(max_len_m) + "] after " + std::to_string(max_retries) +
                     " attempts");
}

Turn classify_turn(double heading_change_deg, double threshold_deg) {
  const double d = wrap_deg(heading_change_deg);
  if (d > threshold_deg) return Turn::kRight;
  if (d < -threshold_deg) return Turn::kLeft;
  return Turn::kStraight;
}

std::string turn_phrase(Turn turn) {
  switch (turn) {
    case Turn::kLeft:
      return "turn left";
    case Turn::kRight:
      return "turn right";
    case Turn::kStraight:
      break;
  }
  return "go straight";
}

std::string render_movement(int template_index, const std::string& object, const std::string& room,
                            Turn turn) {
  const std::string t = turn_phrase(turn);
  switch (template_index) {
    case 0:
      return "walk past the " + object + " and " + t + ".";
    case 1:
      return t + " at the " + object + ".";
    case 2:
      return "enter the " + room + " and " + t + ".";
    case 3:
      return "head toward the " + object + " and " + t + ".";
    case 4:
      return t + " and continue past the " + object + ".";
    case 5:
      return "walk through the " + room + " and " + t + ".";
    default:
      throw InvalidPath("movement template index out of range");
  }
}

std::string render_stop(int template_index, const std::string& object, const std::string& room) {
  switch (template_index) {
    case 0:
      return "stop near the " + object + ".";
    case 1:
      return "wait by the " + object + ".";
    case 2:
      return "stop in the " + room + ".";
    default:
      throw InvalidPath("stop template index out of range");
  }
}

std::vector<double> path_headings(const House& house, const std::vector<std::string>& path) {
  std::vector<double> headings(path.size(), 0.0);
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const double b = bearing_deg(house.node(path[i]).position, house.node(path[i + 1]).position);
    if (i == 0) headings[0] = b;
    headings[i + 1] = b;
  }
  return headings;
}

namespace {

// Highest-confidence detection visible from a viewpoint; ties broken by object id.
std::optional<ObjectObservation> top_detection(const House& house, const std::string& node_id,
                                               const ViewConfig& cfg) {
  std::optional<ObjectObservation> best;
  const Panorama pano = render_panorama(house, node_id, cfg);
  for (const auto& slot : pano.slots) {
    for (const auto& d : slot.detections) {
      if (!best || d.confidence > best->confidence ||
          (d.confidence == best->confidence && d.object_id < best->object_id)) {
        best = d;
      }
    }
  }
  return best;
}

}  // namespace

SilverSample template_instruction(const House& house, const std::vector<std::string>& path,
                                  std::uint64_t seed, const ViewConfig& cfg) {
  if (path.size() < 2) throw InvalidPath("path needs at least 2 nodes");
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    if (!house.edge_length(path[i], path[i + 1])) {
      throw InvalidPath("no edge " + path[i] + " - " + path[i + 1]);
    }
  }
  Rng rng(seed);
  const auto headings = path_headings(house, path);
  SilverSample sample;
  sample.house_id = house.id;
  sample.path = path;

  auto object_at = [&](const std::string& node_id) {
    auto det = top_detection(house, node_id, cfg);
    return det ? det->category : std::string("wall");
  };
  auto room_at = [&](const std::string& node_id) {
    const Room* r = house.room_of(node_id);
    return r ? r->label : std::string("room");
  };

  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const double edge_bearing =
        bearing_deg(house.node(path[i]).position, house.node(path[i + 1]).position);
    const Turn turn = classify_turn(edge_bearing - headings[i]);
    const int tmpl = static_cast<int>(rng.index(kMovementTemplates));
    std::string text = render_movement(tmpl, object_at(path[i]), room_at(path[i + 1]), turn);
    if (i + 2 == path.size()) {
      const int stop = static_cast<int>(rng.index(kStopTemplates));
      text += " " + render_stop(stop, object_at(path.back()), room_at(path.back()));
    }
    sample.micro_instructions.push_back({i, text});
  }
  for (const auto& m : sample.micro_instructions) {
    if (!sample.instruction.empty()) sample.instruction += ' ';
    sample.instruction += m.text;
  }
  return sample;
}

nlohmann::json to_json(const House& house) {
  nlohmann::json j;
  j["house_id"] = house.id;
  auto& nodes = j["nodes"] = nlohmann::json::array();
  for (const auto& n : house.nodes) nodes.push_back({{"node_id", n.id}, {"position", vec_json(n.position)}});
  auto& edges = j["edges"] = nlohmann::json::array();
  for (const auto& e : house.edges) edges.push_back({{"a", e.a}, {"b", e.b}, {"length", e.length}});
  auto& rooms = j["rooms"] = nlohmann::json::array();
  for (const auto& r : house.rooms) {
    rooms.push_back(
        {{"room_id", r.id}, {"label", r.label}, {"min", vec_json(r.min)}, {"max", vec_json(r.max)}});
  }
  auto& objects = j["objects"] = nlohmann::json::array();
  for (const auto& o : house.objects) {
    objects.push_back({{"object_id", o.id},
                       {"category", o.category},
                       {"center", vec_json(o.center)},
                       {"extents", vec_json(o.extents)}});
  }
  return j;
}

House house_from_json(const nlohmann::json& j) {
  try {
    House h;
    h.id = j.at("house_id").get<std::string>();
    for (const auto& n : j.at("nodes")) h.nodes.push_back({n.at("node_id"), json_vec(n.at("position"))});
    for (const auto& e : j.at("edges")) h.edges.push_back({e.at("a"), e.at("b"), e.at("length")});
    for (const auto& r : j.at("rooms")) {
      h.rooms.push_back({r.at("room_id"), r.at("label"), json_vec(r.at("min")), json_vec(r.at("max"))});
    }
    for (const auto& o : j.at("objects")) {
      h.objects.push_back(
          {o.at("object_id"), o.at("category"), json_vec(o.at("center")), json_vec(o.at("extents"))});
    }
    return h;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("house json: ") + ex.what());
  }
}

nlohmann::json to_json(const SilverSample& sample) {
  nlohmann::json micro = nlohmann::json::array();
  for (const auto& m : sample.micro_instructions) micro.push_back({{"edge", m.edge}, {"text", m.text}});
  return {{"house_id", sample.house_id},
          {"path", sample.path},
          {"micro_instructions", micro},
          {"instruction", sample.instruction}};
}

SilverSample silver_from_json(const nlohmann::json& j) {
  try {
    SilverSample s;
    s.house_id = j.at("house_id");
    s.path = j.at("path").get<std::vector<std::string>>();
    for (const auto& m : j.at("micro_instructions")) s.micro_instructions.push_back({m.at("edge"), m.at("text")});
    s.instruction = j.at("instruction");
    return s;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("silver sample json: ") + ex.what());
  }
}

}  // namespace sas::envsim
