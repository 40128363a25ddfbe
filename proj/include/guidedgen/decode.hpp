#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "guidedgen/core.hpp"
#include "guidedgen/generator.hpp"
#include "guidedgen/rewards.hpp"
#include "guidedgen/scorer.hpp"

namespace guidedgen {

enum class RerankPool { likelihood, guided, both };

RerankPool parse_rerank_pool(const std::string& name);
std::string to_string(RerankPool pool);

struct DecodeConfig {
  std::size_t beam_k = 5;
  double alpha = 0.3;
  std::size_t max_steps = 20;
  bool interpolation_on = false;
  bool guided_beam_on = false;
  bool rerank_on = false;
  RewardWeights fragment_weights{0, 0, 2000, 200};
  RewardWeights rerank_weights{0, 110, 210, 10};
  RerankPool rerank_pool = RerankPool::both;

  void validate() const;
};

// alpha * p_gm + (1 - alpha) * p_lm
std::vector<double> interpolate_dist(std::span<const double> p_gm, std::span<const double> p_lm,
                                     double alpha);

// The distribution decoding actually draws from: the generator alone, or the
// generator interpolated with an unconditional scorer.
class DecodingModel {
 public:
  DecodingModel(const TrainableGenerator& gen, std::span<const TokenId> concepts,
                const LanguageScorer* lm = nullptr, double alpha = 1.0);

  std::size_t vocab_size() const { return gen_->vocab_size(); }
  void next_dist(std::span<const TokenId> prefix, std::span<double> out) const;

 private:
  const TrainableGenerator* gen_;
  std::span<const TokenId> concepts_;
  const LanguageScorer* lm_;
  double alpha_;
};

// Highest log_prob first; equal log_probs fall back to lexicographic token ids.
bool likelihood_order(const TokenSequence& a, const TokenSequence& b);

// The `k` most probable tokens, ties broken by lower id.
std::vector<TokenId> top_k_tokens(std::span<const double> dist, std::size_t k);

// Completed hypotheses stay in the beam unexpanded. Hypotheses still open after
// `max_steps` tokens are closed with EOS before the final selection, so its probability counts.
std::vector<TokenSequence> beam_search(const DecodingModel& model, std::size_t k, std::size_t max_steps);
std::vector<TokenSequence> beam_search(const TrainableGenerator& gen, const ConceptQuery& query,
                                       const DecodeConfig& cfg, const LanguageScorer* interp_lm = nullptr);

struct GuidedBeamResult {
  std::vector<TokenSequence> likelihood_beam;  // B, by log_prob
  std::vector<TokenSequence> guided_beam;      // B_g, by fragment score
};

struct GuidedStep {
  std::size_t step = 0;
  std::vector<TokenSequence> likelihood_pool;  // expansions of B
  std::vector<TokenSequence> pool;             // expansions of B and B_g, deduplicated
  std::vector<TokenSequence> likelihood_beam;
  std::vector<TokenSequence> guided_beam;
};
using GuidedStepObserver = std::function<void(const GuidedStep&)>;

// Two beams in parallel. B keeps the top-k of its own expansions by likelihood;
// B_g keeps the top-k of all expansions by fragment score (coverage and length
// only), ties going to higher log_prob and then lower token ids.
GuidedBeamResult guided_beam_search(const DecodingModel& model, const ConceptQuery& query,
                                    std::size_t k, std::size_t max_steps,
                                    const RewardWeights& fragment_weights,
                                    const GuidedStepObserver& observer = {});
GuidedBeamResult guided_beam_search(const TrainableGenerator& gen, const ConceptQuery& query,
                                    const DecodeConfig& cfg, const RewardWeights& fragment_weights,
                                    const LanguageScorer* interp_lm = nullptr);

struct RerankResult {
  std::size_t index = 0;
  ScoreBreakdown score;
};

// Argmax of the comprehensive score; ties go to higher log_prob, then lower token ids.
RerankResult rerank(std::span<const TokenSequence> candidates, const ConceptQuery& query,
                    const RewardWeights& weights, const ScoringContext& ctx);

struct DecodeScorers {
  const LanguageScorer* interp_lm = nullptr;  // used when interpolation is on
  ScoringContext scoring;                     // used for re-ranking
};

struct GenerateResult {
  TokenSequence output;
  std::vector<TokenSequence> pool;
};

// Interpolation (optional) -> plain or guided beam -> re-ranking (optional).
// Without re-ranking the most likely member of B is returned.
GenerateResult generate(const TrainableGenerator& gen, const ConceptQuery& query, const DecodeConfig& cfg,
                        const DecodeScorers& scorers);

// Named decode bundles for the model variants:
//   plain       beam search
//   beam-r      beam + re-ranking
//   beam-m      beam + interpolation
//   beam-m-r    beam + interpolation + re-ranking
//   gbeam-r     guided beam + re-ranking
//   gd          guided beam + interpolation + re-ranking (aliases gbeam-m-r, rlb-gd)
DecodeConfig decode_preset(const std::string& name);
std::vector<std::string> decode_preset_names();

}  // namespace guidedgen
