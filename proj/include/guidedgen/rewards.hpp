#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "guidedgen/core.hpp"
#include "guidedgen/scorer.hpp"

namespace guidedgen {

struct PplBounds {
  double lower = 10.0;
  double upper = 110.0;

  void validate() const;
};

// 1 at or below the lower bound, 0 at or above the upper bound, linear between.
double normalize_ppl(double ppl, const PplBounds& bounds);

// Fraction of concepts whose lemma equals the lemma of at least one token.
double coverage(const ConceptSet& concepts, std::span<const std::string> tokens);

// min(2 * num_concepts / output_len, 1). output_len excludes EOS and must be >= 1.
double length_score(std::size_t num_concepts, std::size_t output_len);

// A concept set resolved against a vocabulary: generator-facing concept ids and
// a per-token bitmask of the concepts each vocabulary entry captures.
class ConceptQuery {
 public:
  // Each concept resolves to its own vocabulary entry if present, otherwise to the
  // lowest id whose lemma matches. Throws DataError if neither exists.
  ConceptQuery(const Vocab& vocab, ConceptSet concepts);

  const ConceptSet& concepts() const { return concepts_; }
  std::span<const TokenId> ids() const { return ids_; }
  std::size_t size() const { return concepts_.size(); }
  const Vocab& vocab() const { return *vocab_; }

  std::uint64_t captured(std::span<const TokenId> tokens) const;
  std::uint64_t token_mask(TokenId id) const { return masks_.at(id); }
  // Same value as coverage() on the decoded tokens.
  double coverage(std::span<const TokenId> tokens) const;

 private:
  const Vocab* vocab_;
  ConceptSet concepts_;
  std::vector<TokenId> ids_;
  std::vector<std::uint64_t> masks_;
};

struct ScoreBreakdown {
  double s_ppl = 0.0;
  double s_ppl_f = 0.0;
  double s_cov = 0.0;
  double s_len = 0.0;
  double r = 0.0;
};

struct ScoringContext {
  const LanguageScorer* plain = nullptr;
  const LanguageScorer* finetuned = nullptr;
  PplBounds bounds;
};

// R = w1*S_ppl + w2*S_ppl_f + w3*S_cov + w4*S_len on a complete sequence.
// Zero-weight components are not evaluated and stay 0 in the breakdown.
// An empty sentence (EOS only) gets S_len = 0.
ScoreBreakdown comprehensive_score(const RewardWeights& weights, const ConceptQuery& query,
                                   const TokenSequence& seq, const ScoringContext& ctx);

// Score of an unfinished fragment: coverage and length terms only.
double fragment_score(const RewardWeights& weights, const ConceptQuery& query,
                      std::span<const TokenId> content);

// Named weight profiles. Built-ins:
//   training (0,20,200,0)     training_plain (20,0,200,0)
//   guided_beam (0,0,2000,200)
//   rerank (0,110,210,10)     rerank_plain (110,0,210,10)
//   baseline_rerank (0,110,110,110)
//   cov (0,0,200,0)           ppl_f (0,20,0,0)
class WeightProfiles {
 public:
  WeightProfiles();

  const RewardWeights& get(const std::string& name) const;
  void set(const std::string& name, const RewardWeights& w);
  bool contains(const std::string& name) const { return profiles_.contains(name); }
  const std::map<std::string, RewardWeights>& all() const { return profiles_; }

  // Overrides from a flat `name = w1,w2,w3,w4` file; `#` starts a comment.
  void load_overrides(const std::string& path);

 private:
  std::map<std::string, RewardWeights> profiles_;
};

RewardWeights parse_weights(const std::string& text);
std::string format_weights(const RewardWeights& w);

// Warns on `log` for every reference that captures none of its concepts.
// Returns the number of such references.
std::size_t warn_uncovered_refs(const std::vector<DatasetRecord>& records, std::ostream& log);

}  // namespace guidedgen
