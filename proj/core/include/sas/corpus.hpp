#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sas/envsim.hpp"

namespace sas::corpus {

using TokenList = std::vector<std::string>;

/// Lowercases, splits on whitespace and detaches trailing . , ! ? ; marks.
TokenList tokenize(const std::string& text);
std::string join(const TokenList& tokens);

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kReserved = 4;

  Vocabulary();

  /// Builds from token frequency: most frequent first, ties alphabetical.
  static Vocabulary build(const std::vector<TokenList>& sentences);
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  /// Adds a token if missing and returns its id.
  int add(const std::string& token);
  int id(const std::string& token) const;
  const std::string& token(int id) const;
  bool contains(const std::string& token) const { return index_.count(token) > 0; }
  int size() const { return static_cast<int>(tokens_.size()); }

  std::vector<int> encode(const TokenList& tokens, bool append_eos = true) const;
  /// Decodes ids up to (not including) the first EOS; PAD and BOS are skipped.
  TokenList decode(const std::vector<int>& ids) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

enum class PosTag { kTranVerb, kDitranVerb, kIntranVerb, kNoun, kAdv, kAdp, kIntj, kDet, kOther };

std::string to_string(PosTag tag);
PosTag parse_tag(const std::string& name);

class PosLexicon {
 public:
  /// Lexicon covering every word the silver templates and the envsim
  /// vocabularies can produce.
  static PosLexicon default_lexicon();
  static PosLexicon load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  void set(const std::string& word, PosTag tag) { tags_[word] = tag; }
  PosTag tag(const std::string& word) const;
  const std::map<std::string, PosTag>& entries() const { return tags_; }

 private:
  std::map<std::string, PosTag> tags_;
};

PosTag check_verb(const std::string& word, const PosLexicon& lexicon);

struct ActionPhrase {
  std::size_t begin = 0;
  std::size_t length = 0;  // 1 or 2
};

struct ActionParse {
  std::vector<ActionPhrase> phrases;
  std::vector<bool> mask;  // per token: covered by some phrase
};

/// Action phrases by the adjacent-pair verb/particle rule; see the README for
/// the tag classes involved.
ActionParse extract_action_phrases(const TokenList& tokens, const PosLexicon& lexicon);

/// True iff the text has at least one verb-class word and at least one noun.
bool filter_micro_instruction(const std::string& text, const PosLexicon& lexicon);

enum class Provenance { kOriginal, kMixed, kSilver };
std::string to_string(Provenance p);
Provenance parse_provenance(const std::string& s);

struct CorpusRecord {
  std::string record_id;
  std::string house_id;
  std::vector<std::string> path;
  std::vector<double> headings;    // degrees, per node
  std::vector<double> elevations;  // degrees, per node
  std::string instruction;
  std::vector<int> token_ids;
  std::vector<envsim::MicroInstruction> micro_instructions;
  Provenance provenance = Provenance::kSilver;
};

/// Wraps a silver sample into a record, filling headings and token ids.
CorpusRecord make_record(const envsim::House& house, const envsim::SilverSample& sample,
                         const std::string& record_id, const Vocabulary& vocab,
                         Provenance provenance = Provenance::kSilver);

/// Dense binary L x N matrix; L counts tokens plus EOS, N counts viewpoints.
using AlignmentMatrix = Eigen::MatrixXd;

/// Tokens of each micro-instruction, checked against the whole instruction.
std::vector<TokenList> segment_tokens(const CorpusRecord& record);

AlignmentMatrix build_alignment(const CorpusRecord& record, const PosLexicon& lexicon);

struct StatsReport {
  std::size_t pair_count = 0;
  double mean_views = 0.0;
  double mean_path_len_m = 0.0;
  double mean_words = 0.0;
};

/// Path lengths come from the houses; records whose house is missing throw.
StatsReport corpus_stats(const std::vector<CorpusRecord>& records,
                         const std::map<std::string, envsim::House>& houses);
std::string format_stats(const StatsReport& s);

struct VocabOverlap {
  std::size_t common = 0;
  std::size_t only_a = 0;
  std::size_t only_b = 0;
  std::optional<double> ratio_a;
  std::optional<double> ratio_b;
};

VocabOverlap split_vocab_overlap(const TokenList& split_a, const TokenList& split_b);

nlohmann::json to_json(const CorpusRecord& r);
CorpusRecord record_from_json(const nlohmann::json& j);

std::vector<CorpusRecord> load_corpus(const std::filesystem::path& path);
void save_corpus(const std::filesystem::path& path, const std::vector<CorpusRecord>& records);

std::map<std::string, envsim::House> load_houses(const std::filesystem::path& path);
void save_houses(const std::filesystem::path& path, const std::vector<envsim::House>& houses);

}  // namespace sas::corpus
