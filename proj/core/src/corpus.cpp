#include "sas/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "sas/errors.hpp"

namespace sas::corpus {

namespace {

bool is_trailing_mark(char c) { return c == '.' || c == ',' || c == '!' || c == '?' || c == ';'; }

}  // namespace

TokenList tokenize(const std::string& text) {
  TokenList out;
  std::istringstream in(text);
  std::string word;
  while (in >> word) {
    for (auto& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    std::size_t end = word.size();
    while (end > 0 && is_trailing_mark(word[end - 1])) --end;
    if (end > 0) out.push_back(word.substr(0, end));
    for (std::size_t i = end; i < word.size(); ++i) out.emplace_back(1, word[i]);
  }
  return out;
}

std::string join(const TokenList& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

// --- Vocabulary -------------------------------------------------------------

Vocabulary::Vocabulary() {
  for (const char* t : {"<pad>", "<bos>", "<eos>", "<unk>"}) add(t);
}

Vocabulary Vocabulary::build(const std::vector<TokenList>& sentences) {
  std::map<std::string, std::size_t> counts;
  for (const auto& s : sentences) {
    for (const auto& t : s) ++counts[t];
  }
  std::vector<std::pair<std::string, std::size_t>> sorted(counts.begin(), counts.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  for (const auto& [tok, n] : sorted) v.add(tok);
  return v;
}

int Vocabulary::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  const int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw VocabError("token id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(const TokenList& tokens, bool append_eos) const {
  std::vector<int> ids;
  ids.reserve(tokens.size() + 1);
  for (const auto& t : tokens) ids.push_back(id(t));
  if (append_eos) ids.push_back(kEos);
  return ids;
}

TokenList Vocabulary::decode(const std::vector<int>& ids) const {
  TokenList out;
  for (int id : ids) {
    if (id == kEos) break;
    if (id == kPad || id == kBos) continue;
    out.push_back(token(id));
  }
  return out;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t i = kReserved; i < tokens_.size(); ++i) out << tokens_[i] << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  Vocabulary v;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (v.contains(line)) throw FormatError("duplicate vocabulary token '" + line + "'");
    v.add(line);
  }
  return v;
}

// --- POS lexicon --------------------------------------------------------------

std::string to_string(PosTag tag) {
  switch (tag) {
    case PosTag::kTranVerb: return "TRANVERB";
    case PosTag::kDitranVerb: return "DITRANVERB";
    case PosTag::kIntranVerb: return "INTRANVERB";
    case PosTag::kNoun: return "NOUN";
    case PosTag::kAdv: return "ADV";
    case PosTag::kAdp: return "ADP";
    case PosTag::kIntj: return "INTJ";
    case PosTag::kDet: return "DET";
    case PosTag::kOther: break;
  }
  return "OTHER";
}

PosTag parse_tag(const std::string& name) {
  static const std::map<std::string, PosTag> kTags = {
      {"TRANVERB", PosTag::kTranVerb}, {"DITRANVERB", PosTag::kDitranVerb},
      {"INTRANVERB", PosTag::kIntranVerb}, {"NOUN", PosTag::kNoun},
      {"ADV", PosTag::kAdv},           {"ADP", PosTag::kAdp},
      {"INTJ", PosTag::kIntj},         {"DET", PosTag::kDet},
      {"OTHER", PosTag::kOther}};
  auto it = kTags.find(name);
  if (it == kTags.end()) throw FormatError("unknown POS tag '" + name + "'");
  return it->second;
}

PosLexicon PosLexicon::default_lexicon() {
  PosLexicon lex;
  for (const char* w : {"walk", "enter", "exit", "pass", "leave", "climb", "follow"}) {
    lex.set(w, PosTag::kTranVerb);
  }
  for (const char* w : {"take", "give", "bring"}) lex.set(w, PosTag::kDitranVerb);
  for (const char* w : {"turn", "go", "head", "continue", "stop", "wait", "move", "proceed"}) {
    lex.set(w, PosTag::kIntranVerb);
  }
  for (const char* w : {"left", "right", "straight", "there", "forward", "around", "ahead"}) {
    lex.set(w, PosTag::kAdv);
  }
  for (const char* w : {"past", "at", "toward", "through", "near", "by", "in", "into", "to", "of",
                        "on", "under", "above", "below", "from", "next"}) {
    lex.set(w, PosTag::kAdp);
  }
  for (const char* w : {"the", "a", "an", "this", "that"}) lex.set(w, PosTag::kDet);
  for (const char* w : {"okay", "hey"}) lex.set(w, PosTag::kIntj);
  for (const auto& c : envsim::object_categories()) lex.set(c, PosTag::kNoun);
  for (const auto& r : envsim::room_labels()) lex.set(r, PosTag::kNoun);
  for (const char* w : {"wall", "room", "door", "hallway", "stairs", "top"}) lex.set(w, PosTag::kNoun);
  for (const char* w : {"and", ".", ",", "!", "?", ";"}) lex.set(w, PosTag::kOther);
  return lex;
}

PosTag PosLexicon::tag(const std::string& word) const {
  auto it = tags_.find(word);
  return it == tags_.end() ? PosTag::kOther : it->second;
}

void PosLexicon::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& [w, t] : tags_) out << w << '\t' << to_string(t) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

PosLexicon PosLexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  PosLexicon lex;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected word<TAB>TAG");
    }
    lex.set(line.substr(0, tab), parse_tag(line.substr(tab + 1)));
  }
  return lex;
}

PosTag check_verb(const std::string& word, const PosLexicon& lexicon) { return lexicon.tag(word); }

namespace {

bool in_type_list(PosTag t) {
  return t == PosTag::kTranVerb || t == PosTag::kDitranVerb || t == PosTag::kIntranVerb ||
         t == PosTag::kNoun;
}

bool in_particle_list(PosTag t) {
  return t == PosTag::kAdv || t == PosTag::kAdp || t == PosTag::kIntj || t == PosTag::kDet ||
         t == PosTag::kIntranVerb;
}

bool is_verb(PosTag t) {
  return t == PosTag::kTranVerb || t == PosTag::kDitranVerb || t == PosTag::kIntranVerb;
}

}  // namespace

ActionParse extract_action_phrases(const TokenList& tokens, const PosLexicon& lexicon) {
  ActionParse parse;
  parse.mask.assign(tokens.size(), false);
  for (std::size_t j = 0; j + 1 < tokens.size(); ++j) {
    const PosTag cur = check_verb(tokens[j], lexicon);
    const PosTag next = check_verb(tokens[j + 1], lexicon);
    if (!in_type_list(cur)) continue;
    if (in_particle_list(next)) {
      parse.phrases.push_back({j, 2});
      parse.mask[j] = parse.mask[j + 1] = true;
    } else if (cur != PosTag::kNoun) {
      parse.phrases.push_back({j, 1});
      parse.mask[j] = true;
    }
  }
  return parse;
}

bool filter_micro_instruction(const std::string& text, const PosLexicon& lexicon) {
  bool verb = false;
  bool noun = false;
  for (const auto& t : tokenize(text)) {
    const PosTag tag = lexicon.tag(t);
    verb = verb || is_verb(tag);
    noun = noun || tag == PosTag::kNoun;
  }
  return verb && noun;
}

// --- records ----------------------------------------------------------------------

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::kOriginal: return "original";
    case Provenance::kMixed: return "mixed";
    case Provenance::kSilver: break;
  }
  return "silver";
}

Provenance parse_provenance(const std::string& s) {
  if (s == "original") return Provenance::kOriginal;
  if (s == "mixed") return Provenance::kMixed;
  if (s == "silver") return Provenance::kSilver;
  throw FormatError("unknown provenance '" + s + "'");
}

CorpusRecord make_record(const envsim::House& house, const envsim::SilverSample& sample,
                         const std::string& record_id, const Vocabulary& vocab,
                         Provenance provenance) {
  CorpusRecord r;
  r.record_id = record_id;
  r.house_id = sample.house_id;
  r.path = sample.path;
  r.headings = envsim::path_headings(house, sample.path);
  r.elevations.assign(sample.path.size(), 0.0);
  for (std::size_t i = 0; i + 1 < sample.path.size(); ++i) {
    r.elevations[i + 1] = envsim::elevation_deg(house.node(sample.path[i]).position,
                                                house.node(sample.path[i + 1]).position);
  }
  r.instruction = sample.instruction;
  r.token_ids = vocab.encode(tokenize(sample.instruction));
  r.micro_instructions = sample.micro_instructions;
  r.provenance = provenance;
  return r;
}

std::vector<TokenList> segment_tokens(const CorpusRecord& record) {
  if (record.path.size() < 2 || record.micro_instructions.size() + 1 != record.path.size()) {
    throw SegmentationError("record '" + record.record_id + "' has " +
                            std::to_string(record.micro_instructions.size()) +
                            " micro-instructions for " +
                            std::to_string(record.path.size() > 0 ? record.path.size() - 1 : 0) +
                            " edges");
  }
  std::vector<TokenList> segments;
  TokenList flat;
  for (std::size_t i = 0; i < record.micro_instructions.size(); ++i) {
    if (record.micro_instructions[i].edge != i) {
      throw SegmentationError("record '" + record.record_id + "' micro-instructions out of order");
    }
    segments.push_back(tokenize(record.micro_instructions[i].text));
    flat.insert(flat.end(), segments.back().begin(), segments.back().end());
  }
  if (flat != tokenize(record.instruction)) {
    throw SegmentationError("record '" + record.record_id +
                            "' micro-instructions do not concatenate to the instruction");
  }
  return segments;
}

AlignmentMatrix build_alignment(const CorpusRecord& record, const PosLexicon& lexicon) {
  const auto segments = segment_tokens(record);
  const TokenList tokens = tokenize(record.instruction);
  const ActionParse parse = extract_action_phrases(tokens, lexicon);
  AlignmentMatrix a = AlignmentMatrix::Zero(static_cast<Eigen::Index>(tokens.size() + 1),
                                            static_cast<Eigen::Index>(record.path.size()));
  std::size_t row = 0;
  for (std::size_t edge = 0; edge < segments.size(); ++edge) {
    for (std::size_t k = 0; k < segments[edge].size(); ++k, ++row) {
      if (parse.mask[row]) a(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(edge)) = 1.0;
    }
  }
  return a;
}

StatsReport corpus_stats(const std::vector<CorpusRecord>& records,
                         const std::map<std::string, envsim::House>& houses) {
  if (records.empty()) throw EmptyCorpus("corpus_stats needs at least one record");
  StatsReport s;
  s.pair_count = records.size();
  for (const auto& r : records) {
    auto it = houses.find(r.house_id);
    if (it == houses.end()) throw NodeNotFound("house '" + r.house_id + "' not loaded");
    s.mean_views += static_cast<double>(r.path.size());
    s.mean_path_len_m += envsim::path_length(it->second, r.path);
    std::istringstream in(r.instruction);
    std::string w;
    while (in >> w) s.mean_words += 1.0;
  }
  const double n = static_cast<double>(records.size());
  s.mean_views /= n;
  s.mean_path_len_m /= n;
  s.mean_words /= n;
  return s;
}

std::string format_stats(const StatsReport& s) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "pairs=%zu mean_views=%.2f mean_path_len_m=%.1f mean_words=%.1f", s.pair_count,
                s.mean_views, s.mean_path_len_m, s.mean_words);
  return buf;
}

VocabOverlap split_vocab_overlap(const TokenList& split_a, const TokenList& split_b) {
  const std::set<std::string> a(split_a.begin(), split_a.end());
  const std::set<std::string> b(split_b.begin(), split_b.end());
  VocabOverlap o;
  for (const auto& t : a) {
    if (b.count(t)) {
      ++o.common;
    } else {
      ++o.only_a;
    }
  }
  o.only_b = b.size() - o.common;
  if (o.common > 0) {
    o.ratio_a = static_cast<double>(o.only_a) / static_cast<double>(o.common);
    o.ratio_b = static_cast<double>(o.only_b) / static_cast<double>(o.common);
  }
  return o;
}

// --- serialization ------------------------------------------------------------------

nlohmann::json to_json(const CorpusRecord& r) {
  nlohmann::json micro = nlohmann::json::array();
  for (const auto& m : r.micro_instructions) micro.push_back({{"edge", m.edge}, {"text", m.text}});
  return {{"record_id", r.record_id},
          {"house_id", r.house_id},
          {"path", r.path},
          {"headings", r.headings},
          {"elevations", r.elevations},
          {"instruction", r.instruction},
          {"token_ids", r.token_ids},
          {"micro_instructions", micro},
          {"provenance", to_string(r.provenance)}};
}

CorpusRecord record_from_json(const nlohmann::json& j) {
  try {
    CorpusRecord r;
    r.record_id = j.at("record_id");
    r.house_id = j.at("house_id");
    r.path = j.at("path").get<std::vector<std::string>>();
    r.headings = j.at("headings").get<std::vector<double>>();
    r.elevations = j.at("elevations").get<std::vector<double>>();
    r.instruction = j.at("instruction");
    r.token_ids = j.at("token_ids").get<std::vector<int>>();
    for (const auto& m : j.at("micro_instructions")) r.micro_instructions.push_back({m.at("edge"), m.at("text")});
    r.provenance = parse_provenance(j.at("provenance"));
    return r;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("corpus record: ") + ex.what());
  }
}

std::vector<CorpusRecord> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<CorpusRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& ex) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return out;
}

void save_corpus(const std::filesystem::path& path, const std::vector<CorpusRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : records) out << to_json(r).dump() << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

std::map<std::string, envsim::House> load_houses(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(path.string() + ": " + ex.what());
  }
  std::map<std::string, envsim::House> houses;
  for (const auto& h : j.at("houses")) {
    auto house = envsim::house_from_json(h);
    houses.emplace(house.id, std::move(house));
  }
  return houses;
}

void save_houses(const std::filesystem::path& path, const std::vector<envsim::House>& houses) {
  nlohmann::json j;
  j["houses"] = nlohmann::json::array();
  for (const auto& h : houses) j["houses"].push_back(envsim::to_json(h));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(1) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace sas::corpus
