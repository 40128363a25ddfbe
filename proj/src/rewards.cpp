#include "guidedgen/rewards.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "guidedgen/error.hpp"
#include "guidedgen/lemmatize.hpp"

namespace guidedgen {

void PplBounds::validate() const {
  if (!(lower > 0.0) || !(upper > lower)) throw UsageError("perplexity bounds need 0 < L < U");
}

double normalize_ppl(double ppl, const PplBounds& bounds) {
  bounds.validate();
  if (!(ppl > 0.0)) throw DataError("perplexity must be positive");
  if (ppl <= bounds.lower) return 1.0;
  if (ppl >= bounds.upper) return 0.0;
  return (bounds.upper - ppl) / (bounds.upper - bounds.lower);
}

double coverage(const ConceptSet& concepts, std::span<const std::string> tokens) {
  std::vector<std::string> lemmas;
  lemmas.reserve(tokens.size());
  for (const auto& t : tokens) lemmas.push_back(lemmatize(t));
  std::size_t hit = 0;
  for (const auto& c : concepts) {
    const std::string lc = lemmatize(c);
    if (std::find(lemmas.begin(), lemmas.end(), lc) != lemmas.end()) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(concepts.size());
}

double length_score(std::size_t num_concepts, std::size_t output_len) {
  if (num_concepts == 0) throw std::invalid_argument("length_score needs at least one concept");
  if (output_len == 0) throw std::invalid_argument("length_score of a zero-length output");
  return std::min(2.0 * static_cast<double>(num_concepts) / static_cast<double>(output_len), 1.0);
}

ConceptQuery::ConceptQuery(const Vocab& vocab, ConceptSet concepts)
    : vocab_(&vocab), concepts_(std::move(concepts)) {
  if (concepts_.size() > 64) throw DataError("at most 64 concepts are supported");
  std::vector<std::string> concept_lemmas;
  for (const auto& c : concepts_) concept_lemmas.push_back(lemmatize(c));

  masks_.assign(vocab.size(), 0);
  for (std::size_t id = kNumReserved; id < vocab.size(); ++id) {
    const std::string lemma = lemmatize(vocab.token(static_cast<TokenId>(id)));
    for (std::size_t i = 0; i < concept_lemmas.size(); ++i) {
      if (concept_lemmas[i] == lemma) masks_[id] |= std::uint64_t{1} << i;
    }
  }

  for (std::size_t i = 0; i < concepts_.size(); ++i) {
    if (auto id = vocab.find(concepts_[i])) {
      ids_.push_back(*id);
      continue;
    }
    bool found = false;
    for (std::size_t id = kNumReserved; id < vocab.size() && !found; ++id) {
      if (masks_[id] >> i & 1U) {
        ids_.push_back(static_cast<TokenId>(id));
        found = true;
      }
    }
    if (!found) throw DataError("concept '" + concepts_[i] + "' is not in the vocabulary");
  }
}

std::uint64_t ConceptQuery::captured(std::span<const TokenId> tokens) const {
  std::uint64_t m = 0;
  for (TokenId t : tokens) m |= masks_.at(t);
  return m;
}

double ConceptQuery::coverage(std::span<const TokenId> tokens) const {
  return static_cast<double>(std::popcount(captured(tokens))) / static_cast<double>(size());
}

double fragment_score(const RewardWeights& weights, const ConceptQuery& query,
                      std::span<const TokenId> content) {
  double r = 0.0;
  if (weights.w3 != 0.0) r += weights.w3 * query.coverage(content);
  if (weights.w4 != 0.0 && !content.empty()) r += weights.w4 * length_score(query.size(), content.size());
  return r;
}

ScoreBreakdown comprehensive_score(const RewardWeights& weights, const ConceptQuery& query,
                                   const TokenSequence& seq, const ScoringContext& ctx) {
  weights.validate();
  if (!seq.complete) throw std::invalid_argument("comprehensive_score requires a complete sequence");
  ScoreBreakdown s;
  if (weights.w1 > 0.0) {
    if (!ctx.plain) throw UsageError("w1 > 0 requires a plain scorer");
    s.s_ppl = normalize_ppl(scorer_perplexity(*ctx.plain, seq), ctx.bounds);
  }
  if (weights.w2 > 0.0) {
    if (!ctx.finetuned) throw UsageError("w2 > 0 requires a fine-tuned scorer");
    s.s_ppl_f = normalize_ppl(scorer_perplexity(*ctx.finetuned, seq), ctx.bounds);
  }
  const auto content = seq.content();
  if (weights.w3 > 0.0) s.s_cov = query.coverage(content);
  if (weights.w4 > 0.0 && !content.empty()) s.s_len = length_score(query.size(), content.size());
  s.r = weights.w1 * s.s_ppl + weights.w2 * s.s_ppl_f + weights.w3 * s.s_cov + weights.w4 * s.s_len;
  return s;
}

WeightProfiles::WeightProfiles() {
  profiles_ = {
      {"training", {0, 20, 200, 0}},
      {"training_plain", {20, 0, 200, 0}},
      {"guided_beam", {0, 0, 2000, 200}},
      {"rerank", {0, 110, 210, 10}},
      {"rerank_plain", {110, 0, 210, 10}},
      {"baseline_rerank", {0, 110, 110, 110}},
      {"cov", {0, 0, 200, 0}},
      {"ppl_f", {0, 20, 0, 0}},
  };
}

const RewardWeights& WeightProfiles::get(const std::string& name) const {
  auto it = profiles_.find(name);
  if (it == profiles_.end()) throw UsageError("unknown weight profile '" + name + "'");
  return it->second;
}

void WeightProfiles::set(const std::string& name, const RewardWeights& w) {
  w.validate();
  profiles_[name] = w;
}

RewardWeights parse_weights(const std::string& text) {
  std::string s = text;
  std::replace(s.begin(), s.end(), ',', ' ');
  std::istringstream in(s);
  RewardWeights w;
  std::string extra;
  if (!(in >> w.w1 >> w.w2 >> w.w3 >> w.w4) || (in >> extra)) {
    throw UsageError("weights must be four numbers 'w1,w2,w3,w4', got '" + text + "'");
  }
  w.validate();
  return w;
}

std::string format_weights(const RewardWeights& w) {
  std::ostringstream out;
  out << w.w1 << ',' << w.w2 << ',' << w.w3 << ',' << w.w4;
  return out.str();
}

void WeightProfiles::load_overrides(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open weight profile file " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (eq == std::string::npos) {
      throw UsageError(path + ":" + std::to_string(line_no) + ": expected 'name = w1,w2,w3,w4'");
    }
    std::string name = line.substr(0, eq);
    name.erase(0, name.find_first_not_of(" \t"));
    name.erase(name.find_last_not_of(" \t") + 1);
    set(name, parse_weights(line.substr(eq + 1)));
  }
}

std::size_t warn_uncovered_refs(const std::vector<DatasetRecord>& records, std::ostream& log) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (const auto& ref : records[i].refs) {
      if (coverage(records[i].concepts, ref) == 0.0) {
        log << "warning: record " << (i + 1) << ": reference '" << join_tokens(ref)
            << "' covers no concept\n";
        ++n;
      }
    }
  }
  return n;
}

}  // namespace guidedgen
