#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "guidedgen/core.hpp"
#include "guidedgen/scorer.hpp"

namespace guidedgen {

namespace detail {

template <class T>
std::map<std::vector<T>, std::size_t> ngram_counts(std::span<const T> seq, std::size_t n) {
  std::map<std::vector<T>, std::size_t> counts;
  if (seq.size() < n) return counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) ++counts[std::vector<T>(seq.begin() + i, seq.begin() + i + n)];
  return counts;
}

}  // namespace detail

// Clipped n-gram matches and the candidate's n-gram count. Each n-gram is
// clipped at its largest count in any single reference.
template <class T>
std::pair<std::size_t, std::size_t> modified_precision(std::span<const T> cand,
                                                       std::span<const std::vector<T>> refs, std::size_t n) {
  const auto c = detail::ngram_counts(cand, n);
  std::map<std::vector<T>, std::size_t> max_ref;
  for (const auto& r : refs) {
    for (const auto& [g, k] : detail::ngram_counts(std::span<const T>(r), n)) {
      auto& m = max_ref[g];
      m = std::max(m, k);
    }
  }
  std::size_t matches = 0, total = 0;
  for (const auto& [g, k] : c) {
    total += k;
    auto it = max_ref.find(g);
    if (it != max_ref.end()) matches += std::min(k, it->second);
  }
  return {matches, total};
}

// Reference length closest to `len`; the shorter one wins a tie.
template <class T>
std::size_t closest_ref_length(std::size_t len, std::span<const std::vector<T>> refs) {
  std::size_t best = refs.front().size();
  for (const auto& r : refs) {
    const auto d = [len](std::size_t x) { return x > len ? x - len : len - x; };
    if (d(r.size()) < d(best) || (d(r.size()) == d(best) && r.size() < best)) best = r.size();
  }
  return best;
}

// Corpus BLEU without smoothing: clipped counts and lengths are summed over all
// instances before the precisions and brevity penalty are formed. Instances
// without references are skipped.
template <class T>
double corpus_bleu(const std::vector<std::vector<T>>& cands, const std::vector<std::vector<std::vector<T>>>& refs,
                   std::size_t max_n) {
  std::vector<std::size_t> matches(max_n + 1, 0), totals(max_n + 1, 0);
  std::size_t c_len = 0, r_len = 0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (refs[i].empty()) continue;
    const std::span<const T> c(cands[i]);
    const std::span<const std::vector<T>> r(refs[i]);
    for (std::size_t n = 1; n <= max_n; ++n) {
      const auto [m, t] = modified_precision(c, r, n);
      matches[n] += m;
      totals[n] += t;
    }
    c_len += c.size();
    r_len += closest_ref_length<T>(c.size(), r);
  }
  if (c_len == 0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= max_n; ++n) {
    if (matches[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matches[n]) / static_cast<double>(totals[n]));
  }
  const double bp = c_len > r_len ? 1.0 : std::exp(1.0 - static_cast<double>(r_len) / static_cast<double>(c_len));
  return bp * std::exp(log_sum / static_cast<double>(max_n));
}

// Single-sentence BLEU (a corpus of one). An empty candidate scores 0.
template <class T>
double bleu(const std::vector<T>& cand, const std::vector<std::vector<T>>& refs, std::size_t max_n) {
  return corpus_bleu<T>({cand}, {refs}, max_n);
}

// Sentence BLEU for display: add-one smoothing on orders n >= 2.
template <class T>
double sentence_bleu_smoothed(const std::vector<T>& cand, const std::vector<std::vector<T>>& refs,
                              std::size_t max_n) {
  if (cand.empty() || refs.empty()) return 0.0;
  const std::span<const T> c(cand);
  const std::span<const std::vector<T>> r(refs);
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= max_n; ++n) {
    auto [m, t] = modified_precision(c, r, n);
    if (n >= 2) {
      ++m;
      ++t;
    }
    if (m == 0) return 0.0;
    log_sum += std::log(static_cast<double>(m) / static_cast<double>(t));
  }
  const std::size_t rl = closest_ref_length<T>(cand.size(), r);
  const double bp = cand.size() > rl ? 1.0 : std::exp(1.0 - static_cast<double>(rl) / static_cast<double>(cand.size()));
  return bp * std::exp(log_sum / static_cast<double>(max_n));
}

namespace detail {

inline double f1(std::size_t overlap, std::size_t cand_n, std::size_t ref_n) {
  if (overlap == 0 || cand_n == 0 || ref_n == 0) return 0.0;
  const double p = static_cast<double>(overlap) / static_cast<double>(cand_n);
  const double r = static_cast<double>(overlap) / static_cast<double>(ref_n);
  return 2.0 * p * r / (p + r);
}

template <class T>
std::size_t lcs_length(std::span<const T> a, std::span<const T> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace detail

// Bigram-overlap F1, max over references. Two identical one-token sentences score 1.
template <class T>
double rouge2(const std::vector<T>& cand, const std::vector<std::vector<T>>& refs) {
  double best = 0.0;
  const auto c = detail::ngram_counts(std::span<const T>(cand), 2);
  for (const auto& r : refs) {
    if (!cand.empty() && cand == r) return 1.0;
    const auto rc = detail::ngram_counts(std::span<const T>(r), 2);
    std::size_t overlap = 0;
    for (const auto& [g, k] : c) {
      auto it = rc.find(g);
      if (it != rc.end()) overlap += std::min(k, it->second);
    }
    const std::size_t cn = cand.size() < 2 ? 0 : cand.size() - 1;
    const std::size_t rn = r.size() < 2 ? 0 : r.size() - 1;
    best = std::max(best, detail::f1(overlap, cn, rn));
  }
  return best;
}

// LCS-based F1, max over references.
template <class T>
double rougeL(const std::vector<T>& cand, const std::vector<std::vector<T>>& refs) {
  double best = 0.0;
  for (const auto& r : refs) {
    const std::size_t l = detail::lcs_length(std::span<const T>(cand), std::span<const T>(r));
    best = std::max(best, detail::f1(l, cand.size(), r.size()));
  }
  return best;
}

template <class T>
std::size_t levenshtein(std::span<const T> a, std::span<const T> b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

// Concept lemmas in order of first occurrence in `tokens`.
std::vector<std::string> concept_order(const ConceptSet& concepts, std::span<const std::string> tokens);

// Levenshtein distance between the concept orders of the two sentences.
std::size_t concept_order_distance(std::span<const std::string> reference, std::span<const std::string> generated,
                                   const ConceptSet& concepts);

struct EvalReport {
  double bleu3 = 0.0;
  double bleu4 = 0.0;
  double rouge2 = 0.0;
  double rougeL = 0.0;
  double cov = 0.0;  // percent
  double ppl = 0.0;
  double len = 0.0;
  double order_edit_distance = 0.0;
  std::size_t count = 0;

  // key = value lines, BLEU and ROUGE scaled by 100.
  std::string to_text() const;
  // One JSON object, all fractions in [0, 1] except cov.
  std::string to_json() const;
};

struct EvalItem {
  const ConceptSet* concepts = nullptr;
  std::vector<std::string> output;
  std::vector<std::vector<std::string>> refs;
};

// cov = 100 * mean coverage, ppl = mean perplexity under `scorer`, len = mean
// token count. BLEU is corpus level, ROUGE is averaged over items with
// references, and the order distance is averaged over every (item, reference).
// Outputs are encoded with `vocab` for the perplexity term.
EvalReport corpus_metrics(std::span<const EvalItem> items, const LanguageScorer& scorer, const Vocab& vocab);

}  // namespace guidedgen
