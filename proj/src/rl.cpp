#include "guidedgen/rl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "guidedgen/error.hpp"
#include "guidedgen/eval.hpp"

namespace guidedgen {

Sampler parse_sampler(const std::string& name) {
  if (name == "random") return Sampler::random;
  if (name == "beam") return Sampler::beam;
  throw UsageError("unknown sampler '" + name + "' (expected random or beam)");
}

std::string to_string(Sampler s) { return s == Sampler::random ? "random" : "beam"; }

void TrainConfig::validate() const {
  if (epochs < 0) throw UsageError("epochs must be >= 0");
  if (batch_size < 1) throw UsageError("batch_size must be >= 1");
  if (lr_mle < 0 || lr_rl < 0) throw UsageError("learning rates must be >= 0");
  if (samples_per_input < 2) throw UsageError("samples_per_input must be >= 2 for the baseline");
  if (clip_norm < 0) throw UsageError("clip norm must be >= 0");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw UsageError("epsilon must lie in [0, 1]");
  if (beam_k < 1 || max_steps < 1) throw UsageError("beam_k and max_steps must be >= 1");
}

std::vector<EncodedRecord> encode_records(const Vocab& vocab, const std::vector<DatasetRecord>& records) {
  std::vector<EncodedRecord> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    try {
      EncodedRecord rec{ConceptQuery(vocab, records[i].concepts), {}};
      for (const auto& ref : records[i].refs) rec.refs.push_back(TokenSequence::closed(vocab.encode(ref)));
      out.push_back(std::move(rec));
    } catch (const DataError& e) {
      throw DataError("record " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

double mean_nll(const TrainableGenerator& gen, std::span<const EncodedRecord> data) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& rec : data) {
    for (const auto& ref : rec.refs) {
      total -= gen.seq_log_prob(rec.query.ids(), ref);
      ++n;
    }
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

namespace {

void check_finite(const TrainableGenerator& gen, const char* phase) {
  if (!gen.all_finite()) throw NumericError(std::string("non-finite parameters during ") + phase + " training");
}

void fill_dev(EpochMetrics& m, const TrainableGenerator& gen, const DevEvaluator* dev) {
  if (!dev || dev->data.empty()) return;
  m.has_dev = true;
  m.dev_loss = mean_nll(gen, dev->data);
  DecodeScorers scorers;
  const DevMetrics d = evaluate_dev(gen, *dev, scorers);
  m.dev_coverage = d.coverage;
  m.dev_ppl = d.ppl;
  m.dev_bleu4 = d.bleu4;
}

}  // namespace

DevMetrics evaluate_dev(const TrainableGenerator& gen, const DevEvaluator& dev, const DecodeScorers& scorers) {
  DevMetrics m;
  if (dev.data.empty()) return m;
  std::vector<std::vector<TokenId>> outputs;
  std::vector<std::vector<std::vector<TokenId>>> refs;
  double cov = 0.0, ppl = 0.0;
  for (const auto& rec : dev.data) {
    const TokenSequence out = generate(gen, rec.query, dev.decode, scorers).output;
    cov += rec.query.coverage(out.content());
    if (dev.ppl_scorer) ppl += scorer_perplexity(*dev.ppl_scorer, out);
    outputs.emplace_back(out.content().begin(), out.content().end());
    std::vector<std::vector<TokenId>> r;
    for (const auto& ref : rec.refs) r.emplace_back(ref.content().begin(), ref.content().end());
    refs.push_back(std::move(r));
  }
  const double n = static_cast<double>(dev.data.size());
  m.coverage = cov / n;
  m.ppl = dev.ppl_scorer ? ppl / n : 0.0;
  bool any_refs = std::any_of(refs.begin(), refs.end(), [](const auto& r) { return !r.empty(); });
  m.bleu4 = any_refs ? corpus_bleu(outputs, refs, 4) : 0.0;
  return m;
}

TrainReport train_mle(TrainableGenerator& gen, std::span<const EncodedRecord> data, const TrainConfig& cfg,
                      const DevEvaluator* dev, const EpochCallback& on_epoch) {
  cfg.validate();
  struct Pair {
    std::size_t record;
    std::size_t ref;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].refs.empty()) throw DataError("record " + std::to_string(i + 1) + " has no references for MLE");
    for (std::size_t j = 0; j < data[i].refs.size(); ++j) pairs.push_back({i, j});
  }
  if (pairs.empty()) throw DataError("no training pairs");

  std::mt19937_64 rng(cfg.seed);
  TrainReport report;
  const bool early_stop = dev && !dev->data.empty() && cfg.patience > 0;
  double best_dev = INFINITY;
  std::vector<double> best_params;
  int since_best = 0;
  ParamVector grad = gen.zero_grad();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(pairs.begin(), pairs.end(), rng);
    double loss = 0.0;
    for (std::size_t start = 0; start < pairs.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(start + cfg.batch_size, pairs.size());
      const double inv = 1.0 / static_cast<double>(end - start);
      grad.set_zero();
      for (std::size_t p = start; p < end; ++p) {
        const auto& rec = data[pairs[p].record];
        loss -= gen.accumulate_grad(rec.query.ids(), rec.refs[pairs[p].ref], inv, grad);
      }
      grad.clip(cfg.clip_norm);
      gen.apply(grad, cfg.lr_mle);
    }
    check_finite(gen, "mle");

    EpochMetrics m;
    m.phase = "mle";
    m.epoch = epoch;
    m.train_value = loss / static_cast<double>(pairs.size());
    fill_dev(m, gen, dev);
    report.epochs.push_back(m);
    if (on_epoch) on_epoch(m, gen);

    if (early_stop) {
      if (m.dev_loss < best_dev) {
        best_dev = m.dev_loss;
        best_params.assign(gen.params().begin(), gen.params().end());
        report.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        break;
      }
    } else {
      report.best_epoch = epoch;
    }
  }
  if (early_stop && !best_params.empty()) std::copy(best_params.begin(), best_params.end(), gen.params().begin());
  return report;
}

std::vector<TokenSequence> sample_random(const TrainableGenerator& gen, std::span<const TokenId> concepts,
                                         std::size_t count, std::size_t max_steps, std::mt19937_64& rng) {
  if (max_steps < 1) throw UsageError("max_steps must be >= 1");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> dist(gen.vocab_size());
  std::vector<TokenSequence> out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    TokenSequence seq;
    for (std::size_t step = 0; step < max_steps && !seq.complete; ++step) {
      gen.next_dist(concepts, seq.token_ids, dist);
      const double u = unit(rng);
      double acc = 0.0;
      TokenId tok = static_cast<TokenId>(dist.size() - 1);
      for (std::size_t i = 0; i < dist.size(); ++i) {
        acc += dist[i];
        if (u < acc) {
          tok = static_cast<TokenId>(i);
          break;
        }
      }
      seq.token_ids.push_back(tok);
      seq.log_prob += std::log(dist[tok]);
      seq.complete = tok == kEos;
    }
    if (!seq.complete) {
      gen.next_dist(concepts, seq.token_ids, dist);
      seq.token_ids.push_back(kEos);
      seq.log_prob += std::log(dist[kEos]);
      seq.complete = true;
    }
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<TokenSequence> sample_beam(const TrainableGenerator& gen, std::span<const TokenId> concepts,
                                       std::size_t count, std::size_t k, std::size_t max_steps) {
  const DecodingModel model(gen, concepts);
  auto beam = beam_search(model, std::max(k, count), max_steps);
  if (beam.size() > count) beam.resize(count);
  return beam;
}

ParamVector policy_gradient(const TrainableGenerator& gen, std::span<const TokenId> concepts,
                            std::span<const TokenSequence> samples, std::span<const double> rewards,
                            ReinforceStats* stats) {
  if (samples.size() != rewards.size()) throw std::invalid_argument("one reward per sample required");
  if (samples.size() < 2) throw std::invalid_argument("baseline undefined: need at least two samples");
  const std::size_t n = samples.size();
  std::vector<double> diff(n);
  double mean_diff = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    diff[i] = rewards[i] - rewards[0];
    mean_diff += diff[i];
  }
  mean_diff /= static_cast<double>(n);

  ParamVector grad = gen.zero_grad();
  std::vector<double> adv(n);
  for (std::size_t i = 0; i < n; ++i) {
    adv[i] = diff[i] - mean_diff;
    if (adv[i] != 0.0) gen.accumulate_grad(concepts, samples[i], adv[i], grad);
  }
  if (stats) {
    stats->baseline = rewards[0] + mean_diff;
    stats->advantages = std::move(adv);
    stats->grad_norm = grad.norm();
  }
  return grad;
}

ReinforceStats reinforce_step(TrainableGenerator& gen, std::span<const TokenId> concepts,
                              std::span<const TokenSequence> samples, std::span<const double> rewards,
                              double lr, double clip_norm) {
  ReinforceStats stats;
  ParamVector grad = policy_gradient(gen, concepts, samples, rewards, &stats);
  grad.clip(clip_norm);
  gen.apply(grad, lr);
  return stats;
}

TrainReport train_rl(TrainableGenerator& gen, std::span<const EncodedRecord> data, const TrainConfig& cfg,
                     const ScoringContext& scoring, const DevEvaluator* dev, const EpochCallback& on_epoch) {
  cfg.validate();
  cfg.reward_weights.validate();
  if (data.empty()) throw DataError("no inputs for reinforcement learning");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  TrainReport report;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double reward_sum = 0.0;
    std::size_t reward_n = 0;
    for (std::size_t idx : order) {
      const auto& rec = data[idx];
      const auto concepts = rec.query.ids();
      std::vector<TokenSequence> samples;
      if (cfg.sampler == Sampler::random) {
        samples = sample_random(gen, concepts, cfg.samples_per_input, cfg.max_steps, rng);
      } else {
        samples = sample_beam(gen, concepts, cfg.samples_per_input, cfg.beam_k, cfg.max_steps);
        if (cfg.epsilon > 0.0) {
          for (auto& s : samples) {
            if (unit(rng) < cfg.epsilon) s = sample_random(gen, concepts, 1, cfg.max_steps, rng).front();
          }
        }
      }
      if (samples.size() < 2) continue;
      std::vector<double> rewards;
      rewards.reserve(samples.size());
      for (const auto& s : samples) {
        rewards.push_back(comprehensive_score(cfg.reward_weights, rec.query, s, scoring).r);
      }
      for (double r : rewards) reward_sum += r;
      reward_n += rewards.size();
      reinforce_step(gen, concepts, samples, rewards, cfg.lr_rl, cfg.clip_norm);
    }
    check_finite(gen, "rl");

    EpochMetrics m;
    m.phase = "rl";
    m.epoch = epoch;
    m.train_value = reward_n ? reward_sum / static_cast<double>(reward_n) : 0.0;
    fill_dev(m, gen, dev);
    report.epochs.push_back(m);
    report.best_epoch = epoch;
    if (on_epoch) on_epoch(m, gen);
  }
  return report;
}

}  // namespace guidedgen
