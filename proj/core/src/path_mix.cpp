#include "sas/path_mix.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>

#include "sas/errors.hpp"
#include "sas/rng.hpp"

namespace sas::corpus {

void PathMixConfig::validate() const {
  if (!(max_node_gap_m > 0 && min_node_gap_m >= 0 && min_loop_angle_deg > 0 && min_len_m > 0 &&
        max_len_m > min_len_m)) {
    throw ConfigError("path mix config needs positive gaps/angles and min_len < max_len");
  }
}

std::optional<MixCriterion> check_mixed_path(const envsim::House& house,
                                             const std::vector<std::string>& path,
                                             const PathMixConfig& cfg) {
  const std::size_t k = path.size() - 1;  // edge count
  std::vector<envsim::Vec3> pos;
  pos.reserve(path.size());
  for (const auto& id : path) pos.push_back(house.node(id).position);

  for (std::size_t i = 0; i < k; ++i) {
    const double gap = (pos[i + 1] - pos[i]).norm();
    if (gap < cfg.min_node_gap_m) return MixCriterion::kNodeGap;
    const bool interior = i >= 1 && i + 1 <= k - 1;
    if (interior && gap > cfg.max_node_gap_m) return MixCriterion::kNodeGap;
  }

  const double max_change = 180.0 - cfg.min_loop_angle_deg;
  for (std::size_t i = 1; i < k; ++i) {
    const envsim::Vec3 in = pos[i] - pos[i - 1];
    const envsim::Vec3 out = pos[i + 1] - pos[i];
    const double c = std::clamp(in.dot(out) / (in.norm() * out.norm()), -1.0, 1.0);
    if (std::acos(c) * 180.0 / std::numbers::pi > max_change) return MixCriterion::kLooping;
  }

  if (k < 2) return MixCriterion::kStartEndShared;
  const std::set<std::string> start{path[0], path[1]};
  if (start.count(path[k - 1]) || start.count(path[k])) return MixCriterion::kStartEndShared;
  if (house.edge_length(path.front(), path.back())) return MixCriterion::kStartEndShared;

  const double len = envsim::path_length(house, path);
  if (len < cfg.min_len_m || len > cfg.max_len_m) return MixCriterion::kLength;
  return std::nullopt;
}

namespace {

using EdgeKey = std::pair<std::string, std::string>;

EdgeKey undirected(const std::string& a, const std::string& b) {
  return a < b ? EdgeKey{a, b} : EdgeKey{b, a};
}

struct PoolEntry {
  std::set<EdgeKey> directions;  // (from, to) as traversed in some source record
  std::vector<std::string> texts;
};

using Pool = std::map<EdgeKey, PoolEntry>;

struct Step {
  std::string to;
  double length;
  const PoolEntry* entry;
};

// Outgoing directed edges of a pool, indexed by source node.
std::map<std::string, std::vector<Step>> outgoing(const Pool& pool, const envsim::House& house) {
  std::map<std::string, std::vector<Step>> out;
  for (const auto& [key, entry] : pool) {
    for (const auto& [from, to] : entry.directions) {
      out[from].push_back({to, *house.edge_length(from, to), &entry});
    }
  }
  return out;
}

class Mixer {
 public:
  Mixer(const envsim::House& house, const PathMixConfig& cfg, const Vocabulary& vocab)
      : house_(house), cfg_(cfg), vocab_(vocab), rng_(cfg.seed) {}

  MixResult run(const Pool& starts, const Pool& trans, const Pool& ends) {
    trans_out_ = outgoing(trans, house_);
    end_out_ = outgoing(ends, house_);
    std::vector<std::pair<EdgeKey, const PoolEntry*>> start_list;
    for (const auto& [key, entry] : starts) {
      for (const auto& dir : entry.directions) start_list.emplace_back(dir, &entry);
    }
    rng_.shuffle(start_list);
    for (const auto& [dir, entry] : start_list) {
      if (done()) break;
      path_ = {dir.first, dir.second};
      entries_ = {entry};
      visited_ = {dir.first, dir.second};
      dfs(*house_.edge_length(dir.first, dir.second));
    }
    return std::move(result_);
  }

 private:
  bool done() const {
    return result_.records.size() >= cfg_.max_pairs || expansions_ >= cfg_.max_expansions;
  }

  void dfs(double length) {
    if (done()) return;
    ++expansions_;
    const std::string cur = path_.back();

    if (auto it = end_out_.find(cur); it != end_out_.end()) {
      auto ends = it->second;
      rng_.shuffle(ends);
      for (const auto& step : ends) {
        if (done()) return;
        if (visited_.count(step.to)) continue;
        path_.push_back(step.to);
        entries_.push_back(step.entry);
        evaluate();
        path_.pop_back();
        entries_.pop_back();
      }
    }

    if (auto it = trans_out_.find(cur); it != trans_out_.end()) {
      auto next = it->second;
      rng_.shuffle(next);
      for (const auto& step : next) {
        if (done()) return;
        if (visited_.count(step.to) || length + step.length > cfg_.max_len_m) continue;
        path_.push_back(step.to);
        entries_.push_back(step.entry);
        visited_.insert(step.to);
        dfs(length + step.length);
        visited_.erase(step.to);
        path_.pop_back();
        entries_.pop_back();
      }
    }
  }

  void evaluate() {
    auto& t = result_.tally;
    ++t.candidates;
    if (auto bad = check_mixed_path(house_, path_, cfg_)) {
      switch (*bad) {
        case MixCriterion::kNodeGap: ++t.rejected_gap; break;
        case MixCriterion::kLooping: ++t.rejected_loop; break;
        case MixCriterion::kStartEndShared: ++t.rejected_start_end; break;
        case MixCriterion::kLength: ++t.rejected_length; break;
      }
      return;
    }
    ++t.accepted;

    CorpusRecord r;
    r.record_id = "mix_" + house_.id + "_" + std::to_string(cfg_.seed) + "_" +
                  std::to_string(result_.records.size());
    r.house_id = house_.id;
    r.path = path_;
    r.headings = envsim::path_headings(house_, path_);
    r.elevations.assign(path_.size(), 0.0);
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& texts = entries_[i]->texts;
      if (texts.size() > 1) ++t.random_picks;
      r.micro_instructions.push_back({i, texts[rng_.index(texts.size())]});
      if (!r.instruction.empty()) r.instruction += ' ';
      r.instruction += r.micro_instructions.back().text;
    }
    r.token_ids = vocab_.encode(tokenize(r.instruction));
    r.provenance = Provenance::kMixed;
    result_.records.push_back(std::move(r));
  }

  const envsim::House& house_;
  const PathMixConfig& cfg_;
  const Vocabulary& vocab_;
  Rng rng_;
  std::map<std::string, std::vector<Step>> trans_out_;
  std::map<std::string, std::vector<Step>> end_out_;
  std::vector<std::string> path_;
  std::vector<const PoolEntry*> entries_;
  std::set<std::string> visited_;
  std::size_t expansions_ = 0;
  MixResult result_;
};

}  // namespace

MixResult mix_paths_detailed(const std::vector<CorpusRecord>& records, const envsim::House& house,
                             const PathMixConfig& cfg, const PosLexicon& lexicon,
                             const Vocabulary& vocab) {
  cfg.validate();
  Pool starts, trans, ends;
  for (const auto& r : records) {
    if (r.house_id != house.id) {
      throw InvalidPath("record '" + r.record_id + "' is from house '" + r.house_id +
                        "', mixing is restricted to '" + house.id + "'");
    }
    const std::size_t k = r.path.size() - 1;
    if (r.path.size() < 2 || r.micro_instructions.size() != k) continue;
    for (std::size_t i = 0; i < k; ++i) {
      const std::string& text = r.micro_instructions[i].text;
      if (!filter_micro_instruction(text, lexicon)) continue;
      const EdgeKey dir{r.path[i], r.path[i + 1]};
      const EdgeKey key = undirected(dir.first, dir.second);
      auto add = [&](Pool& pool) {
        auto& e = pool[key];
        e.directions.insert(dir);
        e.texts.push_back(text);
      };
      if (i == 0) add(starts);
      if (i == k - 1) add(ends);
      if (i != 0 && i != k - 1) add(trans);
    }
  }
  if (starts.empty() || ends.empty() || cfg.max_pairs == 0) return {};
  return Mixer(house, cfg, vocab).run(starts, trans, ends);
}

std::vector<CorpusRecord> mix_paths(const std::vector<CorpusRecord>& records,
                                    const envsim::House& house, const PathMixConfig& cfg,
                                    const PosLexicon& lexicon, const Vocabulary& vocab) {
  return mix_paths_detailed(records, house, cfg, lexicon, vocab).records;
}

}  // namespace sas::corpus
