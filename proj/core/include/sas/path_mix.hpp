#pragma once

// Same-house trajectory augmentation: splices recorded start, transition and
// end edges into new paths and stitches their micro-instructions together.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sas/corpus.hpp"
#include "sas/envsim.hpp"

namespace sas::corpus {

struct PathMixConfig {
  double max_node_gap_m = 3.0;
  /// Lower bound on any hop; not a published value.
  double min_node_gap_m = 0.5;
  double min_loop_angle_deg = 45.0;
  double min_len_m = 5.0;
  double max_len_m = 20.0;
  std::size_t max_pairs = 100;
  std::uint64_t seed = 0;
  /// DFS node-expansion budget per call.
  std::size_t max_expansions = 2'000'000;

  void validate() const;
};

enum class MixCriterion { kNodeGap = 1, kLooping = 2, kStartEndShared = 3, kLength = 5 };

/// Checks criteria (1)-(3) and the length window for a complete node sequence.
/// Returns the first violated criterion, or nullopt when the path is legal.
std::optional<MixCriterion> check_mixed_path(const envsim::House& house,
                                             const std::vector<std::string>& path,
                                             const PathMixConfig& cfg);

struct MixTally {
  std::size_t candidates = 0;
  std::size_t rejected_gap = 0;        // criterion (1)
  std::size_t rejected_loop = 0;       // criterion (2)
  std::size_t rejected_start_end = 0;  // criterion (3)
  std::size_t rejected_length = 0;
  std::size_t accepted = 0;
  std::size_t random_picks = 0;        // criterion (4): edges with >1 candidate texts
};

struct MixResult {
  std::vector<CorpusRecord> records;
  MixTally tally;
};

/// Records must all belong to `house`; otherwise InvalidPath is thrown.
MixResult mix_paths_detailed(const std::vector<CorpusRecord>& records, const envsim::House& house,
                             const PathMixConfig& cfg, const PosLexicon& lexicon,
                             const Vocabulary& vocab);

std::vector<CorpusRecord> mix_paths(const std::vector<CorpusRecord>& records,
                                    const envsim::House& house, const PathMixConfig& cfg,
                                    const PosLexicon& lexicon, const Vocabulary& vocab);

}  // namespace sas::corpus
