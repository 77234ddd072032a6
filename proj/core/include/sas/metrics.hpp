#pragma once

// Reference implementations of the caption metrics and the referral analysis.

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sas/corpus.hpp"

namespace sas::metrics {

using corpus::TokenList;

struct EvalPair {
  TokenList candidate;
  std::vector<TokenList> references;
};

inline constexpr double kBleuEpsilon = 1e-9;

/// Corpus-level BLEU-4: counts are pooled over all pairs before the precisions are formed.
double bleu4(const std::vector<EvalPair>& pairs);

/// LCS F-measure with beta = 1.2, max over references, mean over pairs.
double rouge_l(const std::vector<EvalPair>& pairs, double beta = 1.2);

/// CIDEr with document frequencies fitted on `corpus_refs` (one document per reference set).
double cider(const std::vector<EvalPair>& pairs, const std::vector<std::vector<TokenList>>& corpus_refs);
/// Uses the pairs' own reference sets as the document collection.
double cider(const std::vector<EvalPair>& pairs);

/// Suffix stemmer used by METEOR-lite: strips ing/ed/es/s when at least three characters remain.
std::string stem(const std::string& word);

double meteor_lite(const std::vector<EvalPair>& pairs);

/// 1 - distinct/total over the n-grams of `tokens`; 0 when shorter than n.
double repeat_ngram_rate(const TokenList& tokens, std::size_t n = 4);

struct EvalReport {
  double bleu4 = 0.0;
  double rouge_l = 0.0;
  double cider = 0.0;
  double meteor_lite = 0.0;
  std::size_t n_pairs = 0;
};

EvalReport evaluate(const std::vector<EvalPair>& pairs);
nlohmann::json to_json(const EvalReport& r);

struct ReferralLexicons {
  std::set<std::string> objects;
  std::vector<TokenList> actions;  // phrases, matched longest first
  std::set<std::string> stopwords;

  /// Objects and rooms of the simulator, the template action phrases and a small stopword list.
  static ReferralLexicons defaults();
};

struct ReferralCounts {
  std::size_t instructions = 0;
  std::size_t obj_total = 0;
  std::size_t act_total = 0;
  std::size_t nonstop_total = 0;
  std::optional<double> obj_mean;
  std::optional<double> act_mean;
  std::optional<double> nonstop_mean;
};

ReferralCounts referral_counts(const std::vector<TokenList>& instructions, const ReferralLexicons& lex);

/// "total (mean)" with two decimals, e.g. "3379 (4.31)"; "0 (null)" without instructions.
std::string format_count(std::size_t total, const std::optional<double>& mean);
std::string format_referral(const ReferralCounts& c);

}  // namespace sas::metrics
