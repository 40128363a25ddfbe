#pragma once

// Glue shared by the command-line tool and the experiment harness.

#include <string>
#include <vector>

#include "guidedgen/core.hpp"
#include "guidedgen/decode.hpp"
#include "guidedgen/eval.hpp"
#include "guidedgen/generator.hpp"
#include "guidedgen/rewards.hpp"
#include "guidedgen/rl.hpp"
#include "guidedgen/scorer.hpp"
#include "guidedgen/synth.hpp"

namespace guidedgen {

// Reference tokens of `train`, the concept words of `train` and `extra`, and
// the grammar's surface words when a grammar is given.
Vocab training_vocab(const std::vector<DatasetRecord>& train, const std::vector<const std::vector<DatasetRecord>*>& extra,
                     const Grammar* grammar);

std::vector<TokenSequence> reference_sequences(const Vocab& vocab, const std::vector<DatasetRecord>& records);

struct ScorerPair {
  TrigramScorer plain;
  TrigramScorer finetuned;
};

// The plain scorer sees every training reference; the fine-tuned one only the
// sensible sub-corpus. Without a grammar both see the full corpus.
ScorerPair train_scorers(const Vocab& vocab, const std::vector<DatasetRecord>& train, const Grammar* grammar,
                         const TrigramParams& params = {});

// Every component computed regardless of weight; r uses `weights`.
ScoreBreakdown full_breakdown(const RewardWeights& weights, const ConceptQuery& query, const TokenSequence& seq,
                              const ScoringContext& ctx);

std::vector<TokenSequence> decode_all(const TrainableGenerator& gen, std::span<const EncodedRecord> data,
                                      const DecodeConfig& cfg, const DecodeScorers& scorers);

EvalReport evaluate_outputs(const std::vector<DatasetRecord>& records,
                            const std::vector<std::vector<std::string>>& outputs, const LanguageScorer& scorer,
                            const Vocab& vocab);

}  // namespace guidedgen
