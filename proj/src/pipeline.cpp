#include "guidedgen/pipeline.hpp"

#include "guidedgen/error.hpp"

namespace guidedgen {

Vocab training_vocab(const std::vector<DatasetRecord>& train, const std::vector<const std::vector<DatasetRecord>*>& extra,
                     const Grammar* grammar) {
  std::vector<std::vector<std::string>> corpus;
  for (const auto& rec : train) {
    for (const auto& ref : rec.refs) corpus.push_back(ref);
    corpus.push_back(rec.concepts.words());
  }
  for (const auto* set : extra) {
    if (!set) continue;
    for (const auto& rec : *set) corpus.push_back(rec.concepts.words());
  }
  if (grammar) corpus.push_back(grammar->surface_words());
  return build_vocab(corpus);
}

std::vector<TokenSequence> reference_sequences(const Vocab& vocab, const std::vector<DatasetRecord>& records) {
  std::vector<TokenSequence> out;
  for (const auto& rec : records)
    for (const auto& ref : rec.refs) out.push_back(TokenSequence::closed(vocab.encode(ref)));
  return out;
}

ScorerPair train_scorers(const Vocab& vocab, const std::vector<DatasetRecord>& train, const Grammar* grammar,
                         const TrigramParams& params) {
  const auto all = reference_sequences(vocab, train);
  if (all.empty()) throw DataError("no reference sentences to train the scorers");
  auto plain = TrigramScorer::train(all, vocab.size(), params);
  if (!grammar) return {plain, plain};
  const auto sensible = sensible_subcorpus(*grammar, train, vocab);
  return {std::move(plain), TrigramScorer::train(sensible, vocab.size(), params)};
}

ScoreBreakdown full_breakdown(const RewardWeights& weights, const ConceptQuery& query, const TokenSequence& seq,
                              const ScoringContext& ctx) {
  ScoreBreakdown s;
  if (ctx.plain) s.s_ppl = normalize_ppl(scorer_perplexity(*ctx.plain, seq), ctx.bounds);
  if (ctx.finetuned) s.s_ppl_f = normalize_ppl(scorer_perplexity(*ctx.finetuned, seq), ctx.bounds);
  const auto content = seq.content();
  s.s_cov = query.coverage(content);
  s.s_len = content.empty() ? 0.0 : length_score(query.size(), content.size());
  s.r = weights.w1 * s.s_ppl + weights.w2 * s.s_ppl_f + weights.w3 * s.s_cov + weights.w4 * s.s_len;
  return s;
}

std::vector<TokenSequence> decode_all(const TrainableGenerator& gen, std::span<const EncodedRecord> data,
                                      const DecodeConfig& cfg, const DecodeScorers& scorers) {
  std::vector<TokenSequence> out;
  out.reserve(data.size());
  for (const auto& rec : data) out.push_back(generate(gen, rec.query, cfg, scorers).output);
  return out;
}

EvalReport evaluate_outputs(const std::vector<DatasetRecord>& records,
                            const std::vector<std::vector<std::string>>& outputs, const LanguageScorer& scorer,
                            const Vocab& vocab) {
  if (outputs.empty()) throw DataError("no outputs to evaluate");
  if (outputs.size() != records.size()) {
    throw DataError("output count " + std::to_string(outputs.size()) + " does not match record count " +
                    std::to_string(records.size()));
  }
  std::vector<EvalItem> items;
  items.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) items.push_back({&records[i].concepts, outputs[i], records[i].refs});
  return corpus_metrics(items, scorer, vocab);
}

}  // namespace guidedgen
