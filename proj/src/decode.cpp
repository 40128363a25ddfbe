#include "guidedgen/decode.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "guidedgen/error.hpp"

namespace guidedgen {

RerankPool parse_rerank_pool(const std::string& name) {
  if (name == "b" || name == "likelihood") return RerankPool::likelihood;
  if (name == "bg" || name == "guided") return RerankPool::guided;
  if (name == "union" || name == "both") return RerankPool::both;
  throw UsageError("unknown rerank pool '" + name + "' (expected b, bg or union)");
}

std::string to_string(RerankPool pool) {
  switch (pool) {
    case RerankPool::likelihood: return "b";
    case RerankPool::guided: return "bg";
    case RerankPool::both: return "union";
  }
  return "union";
}

void DecodeConfig::validate() const {
  if (beam_k < 1) throw UsageError("beam width must be >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw UsageError("alpha must lie in [0, 1]");
  if (max_steps < 1) throw UsageError("max_steps must be >= 1");
  if (guided_beam_on) fragment_weights.validate();
  if (rerank_on) rerank_weights.validate();
}

std::vector<double> interpolate_dist(std::span<const double> p_gm, std::span<const double> p_lm,
                                     double alpha) {
  if (p_gm.size() != p_lm.size()) throw std::invalid_argument("distribution length mismatch");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
  std::vector<double> out(p_gm.size());
  if (alpha == 1.0) {
    std::copy(p_gm.begin(), p_gm.end(), out.begin());
  } else if (alpha == 0.0) {
    std::copy(p_lm.begin(), p_lm.end(), out.begin());
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = alpha * p_gm[i] + (1.0 - alpha) * p_lm[i];
  }
  return out;
}

DecodingModel::DecodingModel(const TrainableGenerator& gen, std::span<const TokenId> concepts,
                             const LanguageScorer* lm, double alpha)
    : gen_(&gen), concepts_(concepts), lm_(lm), alpha_(alpha) {
  if (lm_ && lm_->vocab_size() != gen.vocab_size()) {
    throw std::invalid_argument("interpolation scorer vocabulary differs from generator");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
}

void DecodingModel::next_dist(std::span<const TokenId> prefix, std::span<double> out) const {
  gen_->next_dist(concepts_, prefix, out);
  if (!lm_ || alpha_ == 1.0) return;
  std::vector<double> p_gm(out.begin(), out.end());
  std::vector<double> p_lm(out.size());
  lm_->next_dist(prefix, p_lm);
  auto mixed = interpolate_dist(p_gm, p_lm, alpha_);
  std::copy(mixed.begin(), mixed.end(), out.begin());
}

bool likelihood_order(const TokenSequence& a, const TokenSequence& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  return a.token_ids < b.token_ids;
}

std::vector<TokenId> top_k_tokens(std::span<const double> dist, std::size_t k) {
  std::vector<TokenId> ids(dist.size());
  std::iota(ids.begin(), ids.end(), TokenId{0});
  k = std::min(k, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(),
                    [&](TokenId a, TokenId b) {
                      if (dist[a] != dist[b]) return dist[a] > dist[b];
                      return a < b;
                    });
  ids.resize(k);
  return ids;
}

namespace {

// Children of one fragment: itself if complete, otherwise its top-k one-token extensions.
void expand(const DecodingModel& model, const TokenSequence& frag, std::size_t k,
            std::vector<double>& dist, std::vector<TokenSequence>& out) {
  if (frag.complete) {
    out.push_back(frag);
    return;
  }
  model.next_dist(frag.token_ids, dist);
  for (TokenId tok : top_k_tokens(dist, k)) {
    TokenSequence child = frag;
    child.token_ids.push_back(tok);
    child.complete = tok == kEos;
    child.log_prob += std::log(dist[tok]);
    out.push_back(std::move(child));
  }
}

void close_open(const DecodingModel& model, std::vector<TokenSequence>& beam, std::vector<double>& dist) {
  for (auto& seq : beam) {
    if (seq.complete) continue;
    model.next_dist(seq.token_ids, dist);
    seq.log_prob += std::log(dist[kEos]);
    seq.token_ids.push_back(kEos);
    seq.complete = true;
  }
}

bool all_complete(const std::vector<TokenSequence>& beam) {
  return std::all_of(beam.begin(), beam.end(), [](const TokenSequence& s) { return s.complete; });
}

void dedup(std::vector<TokenSequence>& seqs) {
  std::set<std::vector<TokenId>> seen;
  std::erase_if(seqs, [&](const TokenSequence& s) { return !seen.insert(s.token_ids).second; });
}

std::vector<TokenSequence> top_by_likelihood(std::vector<TokenSequence> pool, std::size_t k) {
  std::sort(pool.begin(), pool.end(), likelihood_order);
  if (pool.size() > k) pool.resize(k);
  return pool;
}

struct Scored {
  double score;
  TokenSequence seq;
};

std::vector<TokenSequence> top_by_fragment(const std::vector<TokenSequence>& pool, std::size_t k,
                                           const ConceptQuery& query, const RewardWeights& w) {
  std::vector<Scored> scored;
  scored.reserve(pool.size());
  for (const auto& s : pool) scored.push_back({fragment_score(w, query, s.content()), s});
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return likelihood_order(a.seq, b.seq);
  });
  if (scored.size() > k) scored.resize(k);
  std::vector<TokenSequence> out;
  out.reserve(scored.size());
  for (auto& s : scored) out.push_back(std::move(s.seq));
  return out;
}

}  // namespace

std::vector<TokenSequence> beam_search(const DecodingModel& model, std::size_t k, std::size_t max_steps) {
  if (k < 1) throw UsageError("beam width must be >= 1");
  if (max_steps < 1) throw UsageError("max_steps must be >= 1");
  std::vector<double> dist(model.vocab_size());
  std::vector<TokenSequence> beam{TokenSequence{}};
  for (std::size_t step = 1; step <= max_steps; ++step) {
    std::vector<TokenSequence> pool;
    pool.reserve(beam.size() * k);
    for (const auto& frag : beam) expand(model, frag, k, dist, pool);
    // On the last step open fragments are closed first so they compete with their EOS probability.
    if (step == max_steps) close_open(model, pool, dist);
    beam = top_by_likelihood(std::move(pool), k);
    if (all_complete(beam)) break;
  }
  close_open(model, beam, dist);
  std::sort(beam.begin(), beam.end(), likelihood_order);
  return beam;
}

std::vector<TokenSequence> beam_search(const TrainableGenerator& gen, const ConceptQuery& query,
                                       const DecodeConfig& cfg, const LanguageScorer* interp_lm) {
  cfg.validate();
  const DecodingModel model(gen, query.ids(), cfg.interpolation_on ? interp_lm : nullptr,
                            cfg.interpolation_on ? cfg.alpha : 1.0);
  if (cfg.interpolation_on && !interp_lm) throw UsageError("interpolation requires a language scorer");
  return beam_search(model, cfg.beam_k, cfg.max_steps);
}

GuidedBeamResult guided_beam_search(const DecodingModel& model, const ConceptQuery& query,
                                    std::size_t k, std::size_t max_steps,
                                    const RewardWeights& fragment_weights,
                                    const GuidedStepObserver& observer) {
  if (fragment_weights.uses_perplexity()) {
    throw UsageError("perplexity cannot measure fragments: fragment weights need w1 = w2 = 0");
  }
  fragment_weights.validate();
  if (k < 1) throw UsageError("beam width must be >= 1");
  if (max_steps < 1) throw UsageError("max_steps must be >= 1");

  std::vector<double> dist(model.vocab_size());
  GuidedBeamResult res;

  // First word: both beams start from the k most likely first tokens.
  {
    std::vector<TokenSequence> pool;
    expand(model, TokenSequence{}, k, dist, pool);
    if (max_steps == 1) close_open(model, pool, dist);
    res.likelihood_beam = top_by_likelihood(pool, k);
    res.guided_beam = top_by_fragment(res.likelihood_beam, k, query, fragment_weights);
    if (observer) observer({1, pool, pool, res.likelihood_beam, res.guided_beam});
  }

  for (std::size_t step = 2; step <= max_steps; ++step) {
    if (all_complete(res.likelihood_beam) && all_complete(res.guided_beam)) break;

    std::vector<TokenSequence> likelihood_pool;
    for (const auto& frag : res.likelihood_beam) expand(model, frag, k, dist, likelihood_pool);

    // B_g members already expanded as part of B are not expanded twice.
    std::set<std::vector<TokenId>> in_b;
    for (const auto& frag : res.likelihood_beam) in_b.insert(frag.token_ids);
    std::vector<TokenSequence> pool = likelihood_pool;
    for (const auto& frag : res.guided_beam) {
      if (!in_b.contains(frag.token_ids)) expand(model, frag, k, dist, pool);
    }
    dedup(pool);
    if (step == max_steps) {
      close_open(model, likelihood_pool, dist);
      close_open(model, pool, dist);
    }

    res.likelihood_beam = top_by_likelihood(likelihood_pool, k);
    res.guided_beam = top_by_fragment(pool, k, query, fragment_weights);
    if (observer) observer({step, std::move(likelihood_pool), std::move(pool), res.likelihood_beam, res.guided_beam});
  }

  close_open(model, res.likelihood_beam, dist);
  std::sort(res.likelihood_beam.begin(), res.likelihood_beam.end(), likelihood_order);
  // Closing appends EOS only; content and therefore fragment scores are unchanged,
  // but equal-score ties are re-resolved on the final log_probs.
  close_open(model, res.guided_beam, dist);
  res.guided_beam = top_by_fragment(res.guided_beam, k, query, fragment_weights);
  return res;
}

GuidedBeamResult guided_beam_search(const TrainableGenerator& gen, const ConceptQuery& query,
                                    const DecodeConfig& cfg, const RewardWeights& fragment_weights,
                                    const LanguageScorer* interp_lm) {
  DecodeConfig c = cfg;
  c.guided_beam_on = false;
  c.validate();
  if (cfg.interpolation_on && !interp_lm) throw UsageError("interpolation requires a language scorer");
  const DecodingModel model(gen, query.ids(), cfg.interpolation_on ? interp_lm : nullptr,
                            cfg.interpolation_on ? cfg.alpha : 1.0);
  return guided_beam_search(model, query, cfg.beam_k, cfg.max_steps, fragment_weights);
}

RerankResult rerank(std::span<const TokenSequence> candidates, const ConceptQuery& query,
                    const RewardWeights& weights, const ScoringContext& ctx) {
  if (candidates.empty()) throw std::invalid_argument("rerank needs at least one candidate");
  RerankResult best;
  best.score = comprehensive_score(weights, query, candidates[0], ctx);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const ScoreBreakdown s = comprehensive_score(weights, query, candidates[i], ctx);
    const TokenSequence& cur = candidates[best.index];
    bool better = s.r > best.score.r;
    if (s.r == best.score.r) better = likelihood_order(candidates[i], cur);
    if (better) {
      best.index = i;
      best.score = s;
    }
  }
  return best;
}

GenerateResult generate(const TrainableGenerator& gen, const ConceptQuery& query, const DecodeConfig& cfg,
                        const DecodeScorers& scorers) {
  cfg.validate();
  if (cfg.interpolation_on && !scorers.interp_lm) {
    throw UsageError("interpolation requires a language scorer");
  }
  const DecodingModel model(gen, query.ids(), cfg.interpolation_on ? scorers.interp_lm : nullptr,
                            cfg.interpolation_on ? cfg.alpha : 1.0);
  GenerateResult res;
  std::vector<TokenSequence> b;
  if (cfg.guided_beam_on) {
    auto beams = guided_beam_search(model, query, cfg.beam_k, cfg.max_steps, cfg.fragment_weights);
    b = beams.likelihood_beam;
    switch (cfg.rerank_pool) {
      case RerankPool::likelihood: res.pool = beams.likelihood_beam; break;
      case RerankPool::guided: res.pool = beams.guided_beam; break;
      case RerankPool::both:
        res.pool = beams.likelihood_beam;
        res.pool.insert(res.pool.end(), beams.guided_beam.begin(), beams.guided_beam.end());
        dedup(res.pool);
        break;
    }
  } else {
    b = beam_search(model, cfg.beam_k, cfg.max_steps);
    res.pool = b;
  }
  if (cfg.rerank_on) {
    res.output = res.pool[rerank(res.pool, query, cfg.rerank_weights, scorers.scoring).index];
  } else {
    res.output = b.front();
  }
  return res;
}

DecodeConfig decode_preset(const std::string& name) {
  DecodeConfig cfg;
  if (name == "plain" || name == "unilm") {
  } else if (name == "beam-r") {
    cfg.rerank_on = true;
  } else if (name == "beam-m") {
    cfg.interpolation_on = true;
  } else if (name == "beam-m-r") {
    cfg.interpolation_on = true;
    cfg.rerank_on = true;
  } else if (name == "gbeam-r") {
    cfg.guided_beam_on = true;
    cfg.rerank_on = true;
  } else if (name == "gd" || name == "gbeam-m-r" || name == "rlb-gd") {
    cfg.interpolation_on = true;
    cfg.guided_beam_on = true;
    cfg.rerank_on = true;
  } else {
    throw UsageError("unknown decode preset '" + name + "'");
  }
  return cfg;
}

std::vector<std::string> decode_preset_names() {
  return {"plain", "beam-r", "beam-m", "beam-m-r", "gbeam-r", "gd"};
}

}  // namespace guidedgen
