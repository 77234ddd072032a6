#include <doctest.h>

#include <set>

#include "sas/errors.hpp"
#include "sas/path_mix.hpp"

using namespace sas;
using namespace sas::corpus;

namespace {

envsim::House line_house(int n, double step = 2.0) {
  envsim::House h;
  h.id = "line";
  for (int i = 0; i < n; ++i) {
    h.nodes.push_back({"n" + std::to_string(i), envsim::Vec3(step * i, 0, envsim::kCameraHeight)});
  }
  for (int i = 0; i + 1 < n; ++i) h.edges.push_back({h.nodes[i].id, h.nodes[i + 1].id, step});
  return h;
}

envsim::House from_points(const std::vector<std::pair<double, double>>& xy,
                          const std::vector<std::pair<int, int>>& edges) {
  envsim::House h;
  h.id = "pts";
  for (std::size_t i = 0; i < xy.size(); ++i) {
    h.nodes.push_back({"n" + std::to_string(i),
                       envsim::Vec3(xy[i].first, xy[i].second, envsim::kCameraHeight)});
  }
  for (auto [a, b] : edges) {
    h.edges.push_back({h.nodes[a].id, h.nodes[b].id,
                       (h.nodes[a].position - h.nodes[b].position).norm()});
  }
  return h;
}

std::vector<std::string> ids(std::initializer_list<int> xs) {
  std::vector<std::string> out;
  for (int x : xs) out.push_back("n" + std::to_string(x));
  return out;
}

CorpusRecord walk(const std::string& id, const std::vector<std::string>& path,
                  const std::vector<std::string>& texts) {
  CorpusRecord r;
  r.record_id = id;
  r.house_id = "line";
  r.path = path;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    r.micro_instructions.push_back({i, texts[i]});
    r.instruction += (i ? " " : "") + texts[i];
  }
  return r;
}

std::vector<CorpusRecord> three_walks() {
  return {walk("a", ids({0, 1, 2, 3}),
               {"walk past the sofa .", "walk past the bed .", "walk past the lamp ."}),
          walk("b", ids({2, 3, 4, 5}),
               {"walk past the desk .", "walk past the sink .", "walk past the chair ."}),
          walk("c", ids({1, 2, 3, 4}),
               {"walk past the shelf .", "walk past the plant .", "walk past the stove ."})};
}

}  // namespace

TEST_SUITE("path_mix") {

TEST_CASE("check_mixed_path on a straight line") {
  const auto h = line_house(8);
  const PathMixConfig cfg;
  CHECK_FALSE(check_mixed_path(h, ids({0, 1, 2, 3}), cfg).has_value());
  CHECK_FALSE(check_mixed_path(h, ids({0, 1, 2, 3, 4, 5, 6, 7}), cfg).has_value());
  CHECK(check_mixed_path(h, ids({0, 1, 2}), cfg) == MixCriterion::kStartEndShared);
  CHECK(check_mixed_path(h, ids({0, 1}), cfg) == MixCriterion::kStartEndShared);

  PathMixConfig longer = cfg;
  longer.min_len_m = 7.0;
  CHECK(check_mixed_path(h, ids({0, 1, 2, 3}), longer) == MixCriterion::kLength);
}

TEST_CASE("interior hops are capped but the first and last are not") {
  // 4 m first and last hops, 2 m interior hop.
  const auto h = from_points({{0, 0}, {4, 0}, {6, 0}, {10, 0}}, {{0, 1}, {1, 2}, {2, 3}});
  CHECK_FALSE(check_mixed_path(h, ids({0, 1, 2, 3}), PathMixConfig{}).has_value());

  const auto wide = from_points({{0, 0}, {2, 0}, {6, 0}, {8, 0}}, {{0, 1}, {1, 2}, {2, 3}});
  CHECK(check_mixed_path(wide, ids({0, 1, 2, 3}), PathMixConfig{}) == MixCriterion::kNodeGap);

  const auto tight = from_points({{0, 0}, {3, 0}, {3.2, 0}, {6, 0}}, {{0, 1}, {1, 2}, {2, 3}});
  CHECK(check_mixed_path(tight, ids({0, 1, 2, 3}), PathMixConfig{}) == MixCriterion::kNodeGap);
}

TEST_CASE("sharp reversals are rejected as loops") {
  // Second hop turns back by 150 degrees.
  const double c = std::cos(30.0 * 3.14159265358979 / 180.0) * 2.0;
  const double s = std::sin(30.0 * 3.14159265358979 / 180.0) * 2.0;
  const auto h = from_points({{0, 0}, {3, 0}, {3 - c, s}, {3 - c, s + 3}},
                             {{0, 1}, {1, 2}, {2, 3}});
  CHECK(check_mixed_path(h, ids({0, 1, 2, 3}), PathMixConfig{}) == MixCriterion::kLooping);

  // A right angle is fine.
  const auto l = from_points({{0, 0}, {3, 0}, {3, 2}, {3, 5}}, {{0, 1}, {1, 2}, {2, 3}});
  CHECK_FALSE(check_mixed_path(l, ids({0, 1, 2, 3}), PathMixConfig{}).has_value());
}

TEST_CASE("end adjacent to start is rejected") {
  const auto h = from_points({{0, 0}, {3, 0}, {3, 3}, {0, 3}}, {{0, 1}, {1, 2}, {2, 3}, {3, 0}});
  PathMixConfig cfg;
  cfg.min_loop_angle_deg = 10.0;
  CHECK(check_mixed_path(h, ids({0, 1, 2, 3}), cfg) == MixCriterion::kStartEndShared);
}

TEST_CASE("splicing three walks on a line") {
  const auto h = line_house(6);
  const auto records = three_walks();
  const auto lex = PosLexicon::default_lexicon();
  Vocabulary vocab;
  PathMixConfig cfg;
  cfg.seed = 11;
  const auto result = mix_paths_detailed(records, h, cfg, lex, vocab);

  std::set<std::string> pool;
  for (const auto& r : records) {
    for (const auto& m : r.micro_instructions) pool.insert(m.text);
  }
  bool full_line = false;
  for (const auto& r : result.records) {
    CHECK_FALSE(check_mixed_path(h, r.path, cfg).has_value());
    CHECK(r.provenance == Provenance::kMixed);
    CHECK(r.micro_instructions.size() + 1 == r.path.size());
    std::string joined;
    for (const auto& m : r.micro_instructions) {
      CHECK(pool.count(m.text) == 1);
      joined += (joined.empty() ? "" : " ") + m.text;
    }
    CHECK(joined == r.instruction);
    CHECK(r.token_ids.back() == Vocabulary::kEos);
    full_line = full_line || r.path == ids({0, 1, 2, 3, 4, 5});
  }
  CHECK(full_line);
  CHECK(result.tally.accepted == result.records.size());
  CHECK(result.tally.candidates >= result.tally.accepted);

  const auto again = mix_paths(records, h, cfg, lex, vocab);
  REQUIRE(again.size() == result.records.size());
  for (std::size_t i = 0; i < again.size(); ++i) CHECK(again[i].instruction == result.records[i].instruction);
}

TEST_CASE("pair budget and filtered pools") {
  const auto h = line_house(6);
  const auto lex = PosLexicon::default_lexicon();
  Vocabulary vocab;
  PathMixConfig cfg;
  cfg.max_pairs = 1;
  CHECK(mix_paths(three_walks(), h, cfg, lex, vocab).size() == 1);
  cfg.max_pairs = 0;
  CHECK(mix_paths(three_walks(), h, cfg, lex, vocab).empty());

  // Without a noun no micro-instruction enters a pool.
  auto bare = three_walks();
  for (auto& r : bare) {
    for (auto& m : r.micro_instructions) m.text = "turn left .";
  }
  CHECK(mix_paths(bare, h, PathMixConfig{}, lex, vocab).empty());
}

TEST_CASE("records must come from the mixed house") {
  auto records = three_walks();
  records[1].house_id = "elsewhere";
  CHECK_THROWS_AS(mix_paths(records, line_house(6), PathMixConfig{},
                            PosLexicon::default_lexicon(), Vocabulary{}),
                  InvalidPath);
}

TEST_CASE("config validation") {
  PathMixConfig cfg;
  cfg.max_len_m = 2.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = PathMixConfig{};
  cfg.max_node_gap_m = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_NOTHROW(PathMixConfig{}.validate());
}

}  // TEST_SUITE
