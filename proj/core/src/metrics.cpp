#include "sas/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <nlohmann/json.hpp>

#include "sas/envsim.hpp"
#include "sas/errors.hpp"

namespace sas::metrics {

namespace {

using NgramCounts = std::map<TokenList, double>;

NgramCounts ngrams(const TokenList& tokens, std::size_t n) {
  NgramCounts out;
  if (tokens.size() < n) return out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    out[TokenList(tokens.begin() + static_cast<long>(i), tokens.begin() + static_cast<long>(i + n))] += 1.0;
  }
  return out;
}

void check_pairs(const std::vector<EvalPair>& pairs, const char* metric) {
  if (pairs.empty()) throw EmptyEval(std::string(metric) + " over an empty candidate set");
  for (const auto& p : pairs) {
    if (p.references.empty()) throw EmptyEval(std::string(metric) + ": pair without references");
  }
}

std::size_t lcs(const TokenList& a, const TokenList& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

double meteor_single(const TokenList& cand, const TokenList& ref) {
  if (cand.empty() || ref.empty()) return 0.0;
  std::vector<int> match(cand.size(), -1);
  std::vector<bool> used(ref.size(), false);
  for (int stage = 0; stage < 2; ++stage) {
    for (std::size_t i = 0; i < cand.size(); ++i) {
      if (match[i] >= 0) continue;
      const std::string ci = stage == 0 ? cand[i] : stem(cand[i]);
      for (std::size_t j = 0; j < ref.size(); ++j) {
        if (used[j]) continue;
        const std::string rj = stage == 0 ? ref[j] : stem(ref[j]);
        if (ci == rj) {
          match[i] = static_cast<int>(j);
          used[j] = true;
          break;
        }
      }
    }
  }
  double m = 0.0;
  double chunks = 0.0;
  int prev = -2;
  for (std::size_t i = 0; i < cand.size(); ++i) {
    if (match[i] < 0) {
      prev = -2;
      continue;
    }
    m += 1.0;
    if (match[i] != prev + 1) chunks += 1.0;
    prev = match[i];
  }
  if (m == 0.0) return 0.0;
  const double p = m / static_cast<double>(cand.size());
  const double r = m / static_cast<double>(ref.size());
  const double f = 10.0 * p * r / (r + 9.0 * p);
  const double penalty = 0.5 * std::pow(chunks / m, 3.0);
  return f * (1.0 - penalty);
}

}  // namespace

double bleu4(const std::vector<EvalPair>& pairs) {
  check_pairs(pairs, "bleu4");
  double clipped[4] = {0, 0, 0, 0};
  double total[4] = {0, 0, 0, 0};
  double cand_len = 0.0;
  double ref_len = 0.0;
  for (const auto& p : pairs) {
    cand_len += static_cast<double>(p.candidate.size());
    std::size_t best = p.references.front().size();
    for (const auto& r : p.references) {
      const auto diff = [&](std::size_t len) {
        return len > p.candidate.size() ? len - p.candidate.size() : p.candidate.size() - len;
      };
      if (diff(r.size()) < diff(best) || (diff(r.size()) == diff(best) && r.size() < best)) best = r.size();
    }
    ref_len += static_cast<double>(best);
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto cand = ngrams(p.candidate, n);
      NgramCounts max_ref;
      for (const auto& r : p.references) {
        for (const auto& [g, c] : ngrams(r, n)) max_ref[g] = std::max(max_ref[g], c);
      }
      for (const auto& [g, c] : cand) {
        auto it = max_ref.find(g);
        clipped[n - 1] += std::min(c, it == max_ref.end() ? 0.0 : it->second);
        total[n - 1] += c;
      }
    }
  }
  if (cand_len == 0.0) return 0.0;
  double log_sum = 0.0;
  for (int n = 0; n < 4; ++n) {
    const double prec = clipped[n] > 0.0 ? clipped[n] / total[n] : kBleuEpsilon;
    log_sum += std::log(prec) / 4.0;
  }
  const double bp = cand_len < ref_len ? std::exp(1.0 - ref_len / cand_len) : 1.0;
  return bp * std::exp(log_sum);
}

double rouge_l(const std::vector<EvalPair>& pairs, double beta) {
  check_pairs(pairs, "rouge_l");
  double acc = 0.0;
  for (const auto& p : pairs) {
    double best = 0.0;
    for (const auto& r : p.references) {
      const double l = static_cast<double>(lcs(p.candidate, r));
      if (l == 0.0) continue;
      const double prec = l / static_cast<double>(p.candidate.size());
      const double rec = l / static_cast<double>(r.size());
      const double b2 = beta * beta;
      best = std::max(best, (1.0 + b2) * prec * rec / (rec + b2 * prec));
    }
    acc += best;
  }
  return acc / static_cast<double>(pairs.size());
}

double cider(const std::vector<EvalPair>& pairs, const std::vector<std::vector<TokenList>>& corpus_refs) {
  check_pairs(pairs, "cider");
  if (corpus_refs.empty()) throw EmptyEval("cider needs a reference corpus");
  const double n_docs = static_cast<double>(corpus_refs.size());
  double score = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    std::map<TokenList, double> df;
    for (const auto& doc : corpus_refs) {
      std::set<TokenList> seen;
      for (const auto& r : doc) {
        for (const auto& [g, c] : ngrams(r, n)) seen.insert(g);
      }
      for (const auto& g : seen) df[g] += 1.0;
    }
    auto idf = [&](const TokenList& g) {
      auto it = df.find(g);
      return std::log(n_docs / std::max(1.0, it == df.end() ? 0.0 : it->second));
    };
    auto cosine = [&](const NgramCounts& a, const NgramCounts& b, bool weighted) {
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (const auto& [g, c] : a) {
        const double w = weighted ? c * idf(g) : c;
        na += w * w;
        auto it = b.find(g);
        if (it != b.end()) dot += w * (weighted ? it->second * idf(g) : it->second);
      }
      for (const auto& [g, c] : b) {
        const double w = weighted ? c * idf(g) : c;
        nb += w * w;
      }
      if (na == 0.0 || nb == 0.0) return -1.0;
      return dot / std::sqrt(na * nb);
    };
    double per_n = 0.0;
    for (const auto& p : pairs) {
      const auto cv = ngrams(p.candidate, n);
      double s = 0.0;
      for (const auto& r : p.references) {
        const auto rv = ngrams(r, n);
        double c = cosine(cv, rv, true);
        // N-grams present in every document carry no idf weight; compare raw counts instead.
        if (c < 0.0) c = std::max(cosine(cv, rv, false), 0.0);
        s += c;
      }
      per_n += s / static_cast<double>(p.references.size());
    }
    score += per_n / static_cast<double>(pairs.size());
  }
  return 10.0 * score / 4.0;
}

double cider(const std::vector<EvalPair>& pairs) {
  std::vector<std::vector<TokenList>> docs;
  for (const auto& p : pairs) docs.push_back(p.references);
  return cider(pairs, docs);
}

std::string stem(const std::string& word) {
  for (const char* suffix : {"ing", "ed", "es", "s"}) {
    const std::string s(suffix);
    if (ends_with(word, s) && word.size() - s.size() >= 3) return word.substr(0, word.size() - s.size());
  }
  return word;
}

double meteor_lite(const std::vector<EvalPair>& pairs) {
  check_pairs(pairs, "meteor_lite");
  double acc = 0.0;
  for (const auto& p : pairs) {
    double best = 0.0;
    for (const auto& r : p.references) best = std::max(best, meteor_single(p.candidate, r));
    acc += best;
  }
  return acc / static_cast<double>(pairs.size());
}

double repeat_ngram_rate(const TokenList& tokens, std::size_t n) {
  if (n == 0 || tokens.size() < n) return 0.0;
  const auto grams = ngrams(tokens, n);
  const double total = static_cast<double>(tokens.size() - n + 1);
  return 1.0 - static_cast<double>(grams.size()) / total;
}

EvalReport evaluate(const std::vector<EvalPair>& pairs) {
  EvalReport r;
  r.bleu4 = bleu4(pairs);
  r.rouge_l = rouge_l(pairs);
  r.cider = cider(pairs);
  r.meteor_lite = meteor_lite(pairs);
  r.n_pairs = pairs.size();
  return r;
}

nlohmann::json to_json(const EvalReport& r) {
  return {{"bleu4", r.bleu4},
          {"rougeL", r.rouge_l},
          {"cider", r.cider},
          {"meteor_lite", r.meteor_lite},
          {"n_pairs", r.n_pairs}};
}

ReferralLexicons ReferralLexicons::defaults() {
  ReferralLexicons lex;
  for (const auto& c : envsim::object_categories()) lex.objects.insert(c);
  for (const auto& r : envsim::room_labels()) lex.objects.insert(r);
  for (const char* w : {"wall", "door", "stairs", "room", "hallway"}) lex.objects.insert(w);
  for (const char* phrase : {"walk past", "walk through", "head toward", "continue past", "turn left",
                             "turn right", "go straight", "enter", "exit", "stop", "wait", "walk",
                             "turn", "go"}) {
    lex.actions.push_back(corpus::tokenize(phrase));
  }
  for (const char* w : {"the", "a", "an", "and", ".", ",", "of", "to", "in", "at", "by", "near",
                        "past", "toward", "through", "then", "on"}) {
    lex.stopwords.insert(w);
  }
  return lex;
}

ReferralCounts referral_counts(const std::vector<TokenList>& instructions, const ReferralLexicons& lex) {
  ReferralCounts c;
  c.instructions = instructions.size();
  std::vector<TokenList> actions = lex.actions;
  std::stable_sort(actions.begin(), actions.end(),
                   [](const TokenList& a, const TokenList& b) { return a.size() > b.size(); });
  for (const auto& toks : instructions) {
    for (const auto& t : toks) {
      if (lex.objects.count(t)) ++c.obj_total;
      if (!lex.stopwords.count(t)) ++c.nonstop_total;
    }
    std::size_t i = 0;
    while (i < toks.size()) {
      std::size_t matched = 0;
      for (const auto& a : actions) {
        if (a.empty() || i + a.size() > toks.size()) continue;
        if (std::equal(a.begin(), a.end(), toks.begin() + static_cast<long>(i))) {
          matched = a.size();
          break;
        }
      }
      if (matched) {
        ++c.act_total;
        i += matched;
      } else {
        ++i;
      }
    }
  }
  if (c.instructions > 0) {
    const double n = static_cast<double>(c.instructions);
    c.obj_mean = static_cast<double>(c.obj_total) / n;
    c.act_mean = static_cast<double>(c.act_total) / n;
    c.nonstop_mean = static_cast<double>(c.nonstop_total) / n;
  }
  return c;
}

std::string format_count(std::size_t total, const std::optional<double>& mean) {
  if (!mean) return std::to_string(total) + " (null)";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%zu (%.2f)", total, *mean);
  return buf;
}

std::string format_referral(const ReferralCounts& c) {
  return "Obj. " + format_count(c.obj_total, c.obj_mean) + " | Act. " +
         format_count(c.act_total, c.act_mean) + " | Non-stop " +
         format_count(c.nonstop_total, c.nonstop_mean);
}

}  // namespace sas::metrics
