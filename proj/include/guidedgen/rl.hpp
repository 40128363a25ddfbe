#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "guidedgen/core.hpp"
#include "guidedgen/decode.hpp"
#include "guidedgen/generator.hpp"
#include "guidedgen/rewards.hpp"

namespace guidedgen {

enum class Sampler { random, beam };
Sampler parse_sampler(const std::string& name);
std::string to_string(Sampler s);

struct TrainConfig {
  int epochs = 10;
  std::size_t batch_size = 16;
  double lr_mle = 0.05;
  double lr_rl = 1e-3;
  std::size_t samples_per_input = 5;
  Sampler sampler = Sampler::beam;
  RewardWeights reward_weights{0, 20, 200, 0};
  std::uint64_t seed = 1;
  // Global L2 norm limit on each update; 0 disables clipping.
  double clip_norm = 5.0;
  // Early stopping on dev loss (MLE only); 0 disables.
  int patience = 3;
  // Probability that a beam sample is replaced by a random sample.
  double epsilon = 0.0;
  std::size_t beam_k = 5;
  std::size_t max_steps = 20;

  void validate() const;
};

struct EpochMetrics {
  std::string phase;  // "mle" or "rl"
  int epoch = 0;      // 1-based within the phase
  double train_value = 0.0;  // mean NLL per sentence (mle) or mean reward (rl)
  bool has_dev = false;
  double dev_loss = 0.0;
  double dev_coverage = 0.0;
  double dev_ppl = 0.0;
  double dev_bleu4 = 0.0;
};

struct TrainReport {
  std::vector<EpochMetrics> epochs;
  int best_epoch = 0;
};

// A record resolved against the vocabulary.
struct EncodedRecord {
  ConceptQuery query;
  std::vector<TokenSequence> refs;  // complete, EOS-terminated
};

// Throws DataError on out-of-vocabulary reference tokens or unresolvable concepts.
std::vector<EncodedRecord> encode_records(const Vocab& vocab, const std::vector<DatasetRecord>& records);

// Mean NLL per reference sentence.
double mean_nll(const TrainableGenerator& gen, std::span<const EncodedRecord> data);

struct DevEvaluator {
  std::span<const EncodedRecord> data;
  DecodeConfig decode;              // defaults to plain beam search
  const LanguageScorer* ppl_scorer = nullptr;
};

using EpochCallback = std::function<void(const EpochMetrics&, const TrainableGenerator&)>;

// SGD on -log P(Y|X) averaged over each minibatch of (concepts, reference) pairs.
// With dev data and patience > 0, stops after `patience` epochs without dev-loss
// improvement and restores the best parameters.
TrainReport train_mle(TrainableGenerator& gen, std::span<const EncodedRecord> data, const TrainConfig& cfg,
                      const DevEvaluator* dev = nullptr, const EpochCallback& on_epoch = {});

// Ancestral samples from the generator; open samples are closed with EOS after max_steps.
std::vector<TokenSequence> sample_random(const TrainableGenerator& gen, std::span<const TokenId> concepts,
                                         std::size_t count, std::size_t max_steps, std::mt19937_64& rng);

// The top `count` results of beam search with width max(k, count).
std::vector<TokenSequence> sample_beam(const TrainableGenerator& gen, std::span<const TokenId> concepts,
                                       std::size_t count, std::size_t k, std::size_t max_steps);

struct ReinforceStats {
  double baseline = 0.0;
  std::vector<double> advantages;
  double grad_norm = 0.0;  // before clipping
};

// sum_i (R_i - mean R) * grad log P(sample_i | X). The baseline is computed from
// differences to the first reward, so equal rewards give exactly zero.
ParamVector policy_gradient(const TrainableGenerator& gen, std::span<const TokenId> concepts,
                            std::span<const TokenSequence> samples, std::span<const double> rewards,
                            ReinforceStats* stats = nullptr);

// theta += lr * clip(policy_gradient). Needs at least two samples.
ReinforceStats reinforce_step(TrainableGenerator& gen, std::span<const TokenId> concepts,
                              std::span<const TokenSequence> samples, std::span<const double> rewards,
                              double lr, double clip_norm = 0.0);

// Per input: draw samples (cfg.sampler), score them with cfg.reward_weights,
// apply one reinforce step. References are not used.
TrainReport train_rl(TrainableGenerator& gen, std::span<const EncodedRecord> data, const TrainConfig& cfg,
                     const ScoringContext& scoring, const DevEvaluator* dev = nullptr,
                     const EpochCallback& on_epoch = {});

struct DevMetrics {
  double coverage = 0.0;  // fraction
  double ppl = 0.0;
  double bleu4 = 0.0;
};
DevMetrics evaluate_dev(const TrainableGenerator& gen, const DevEvaluator& dev, const DecodeScorers& scorers);

}  // namespace guidedgen
