#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "guidedgen/error.hpp"
#include "guidedgen/pipeline.hpp"
#include "guidedgen/rl.hpp"
#include "guidedgen/synth.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace guidedgen;
using testutil::seq;

namespace {

struct Corpus {
  Grammar grammar = default_grammar();
  Splits splits;
  Vocab vocab;
  std::vector<EncodedRecord> train, dev;

  Corpus(std::size_t n_train, std::size_t n_dev, std::uint64_t seed)
      : splits(generate_splits(grammar, n_train, n_dev, 1, seed)),
        vocab(training_vocab(splits.train, {&splits.dev, &splits.test}, &grammar)),
        train(encode_records(vocab, splits.train)),
        dev(encode_records(vocab, splits.dev)) {}

  GeneratorConfig gen_config() const {
    GeneratorConfig c;
    c.vocab_size = vocab.size();
    return c;
  }
};

TrainConfig quiet_config() {
  TrainConfig c;
  c.patience = 0;
  return c;
}

}  // namespace

TEST_CASE("train config validation and sampler names") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.samples_per_input = 1;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = TrainConfig{};
  c.epsilon = 1.5;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = TrainConfig{};
  c.lr_mle = -1;
  CHECK_THROWS_AS(c.validate(), UsageError);
  CHECK(parse_sampler("beam") == Sampler::beam);
  CHECK(parse_sampler("random") == Sampler::random);
  CHECK(to_string(Sampler::random) == "random");
  CHECK_THROWS_AS(parse_sampler("greedy"), UsageError);
}

TEST_CASE("records without references are rejected for MLE") {
  const Vocab v({"a", "b"});
  const std::vector<DatasetRecord> recs = {{ConceptSet({"a"}), {}}};
  const auto enc = encode_records(v, recs);
  TrainableGenerator gen(testutil::tiny_config(v.size()), 1);
  CHECK_THROWS_AS(train_mle(gen, enc, quiet_config()), DataError);
  const std::vector<DatasetRecord> oov = {{ConceptSet({"a"}), {{"a", "zebra"}}}};
  CHECK_THROWS_WITH_AS(encode_records(v, oov), doctest::Contains("record 1"), DataError);
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  const Corpus c(40, 10, 3);
  TrainableGenerator gen(c.gen_config(), 2);
  const auto before = gen;
  TrainConfig cfg = quiet_config();
  cfg.epochs = 2;
  cfg.lr_mle = 0.0;
  const auto report = train_mle(gen, c.train, cfg);
  CHECK(gen == before);
  CHECK(report.epochs.size() == 2);

  const auto scorers = train_scorers(c.vocab, c.splits.train, &c.grammar);
  ScoringContext ctx;
  ctx.finetuned = &scorers.finetuned;
  cfg.lr_rl = 0.0;
  cfg.epochs = 1;
  cfg.max_steps = 8;
  const auto rl = train_rl(gen, c.train, cfg, ctx);
  CHECK(gen == before);
  REQUIRE(rl.epochs.size() == 1);
  CHECK(rl.epochs[0].phase == "rl");
}

TEST_CASE("MLE overfits a single example") {
  const Vocab v({"a", "b", "c", "d"});
  const std::vector<DatasetRecord> recs = {{ConceptSet({"c"}), {{"a", "c", "b"}}}};
  const auto enc = encode_records(v, recs);
  TrainableGenerator gen(testutil::tiny_config(v.size(), 4, 8, 2), 1);
  TrainConfig cfg = quiet_config();
  cfg.epochs = 1;
  cfg.batch_size = 1;
  cfg.lr_mle = 0.1;
  const auto& target = enc[0].refs[0];
  double prev = gen.seq_log_prob(enc[0].query.ids(), target);
  for (int step = 0; step < 500; ++step) {
    cfg.seed = static_cast<std::uint64_t>(step);
    train_mle(gen, enc, cfg);
    const double now = gen.seq_log_prob(enc[0].query.ids(), target);
    CHECK(now >= prev - 1e-12);
    prev = now;
  }
  TokenSequence prefix;
  for (TokenId tok : target.token_ids) {
    const auto d = gen.cond_dist(enc[0].query.ids(), prefix);
    for (TokenId other = 0; other < d.size(); ++other)
      if (other != tok) CHECK(d[tok] > d[other]);
    prefix.token_ids.push_back(tok);
  }
}

TEST_CASE("one MLE epoch lowers the loss and training is deterministic") {
  const Corpus c(80, 20, 4);
  TrainableGenerator a(c.gen_config(), 5), b(c.gen_config(), 5);
  const double init = mean_nll(a, c.train);
  TrainConfig cfg = quiet_config();
  cfg.epochs = 1;
  train_mle(a, c.train, cfg);
  train_mle(b, c.train, cfg);
  CHECK(mean_nll(a, c.train) < init);
  CHECK(a == b);
}

TEST_CASE("early stopping restores the best dev epoch") {
  const Corpus c(60, 20, 6);
  TrainableGenerator gen(c.gen_config(), 1);
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.lr_mle = 0.5;
  cfg.patience = 2;
  DevEvaluator dev{c.dev, decode_preset("plain"), nullptr};
  dev.decode.max_steps = 12;
  std::vector<std::vector<double>> snapshots;
  const auto report = train_mle(gen, c.train, cfg, &dev, [&](const EpochMetrics& m, const TrainableGenerator& g) {
    CHECK(m.has_dev);
    snapshots.emplace_back(g.params().begin(), g.params().end());
  });
  REQUIRE(report.best_epoch >= 1);
  double best = INFINITY;
  int arg = 0;
  for (const auto& m : report.epochs)
    if (m.dev_loss < best) best = m.dev_loss, arg = m.epoch;
  CHECK(report.best_epoch == arg);
  CHECK(std::equal(gen.params().begin(), gen.params().end(), snapshots[static_cast<std::size_t>(arg - 1)].begin()));
}

TEST_CASE("random sampler bookkeeping") {
  const auto gen = testutil::random_generator(testutil::tiny_config(8, 3, 4, 2), 3, 1.5);
  const std::vector<TokenId> concepts = {3, 4};
  std::mt19937_64 r1(9), r2(9);
  const auto a = sample_random(gen, concepts, 50, 6, r1);
  const auto b = sample_random(gen, concepts, 50, 6, r2);
  REQUIRE(a.size() == 50);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].token_ids == b[i].token_ids);
    CHECK(a[i].complete);
    CHECK_NOTHROW(a[i].check());
    CHECK(a[i].content_length() <= 6);
    CHECK(a[i].log_prob == gen.seq_log_prob(concepts, a[i]));
  }
}

TEST_CASE("degenerate generator yields identical samples") {
  auto gen = TrainableGenerator(testutil::tiny_config(6), 1);
  const ParamLayout lay(gen.config());
  gen.params()[lay.out_b + 4] = 40.0;  // always the same token ...
  const std::vector<TokenId> concepts = {3};
  std::mt19937_64 rng(1);
  // ... until max_steps closes the sequence.
  const auto s = sample_random(gen, concepts, 20, 3, rng);
  for (const auto& x : s) CHECK(x.token_ids == std::vector<TokenId>{4, 4, 4, kEos});
}

TEST_CASE("uniform generator: first-step token frequencies") {
  const std::size_t v = 10, n = 20000;
  const TrainableGenerator gen(testutil::tiny_config(v), 1);
  const std::vector<TokenId> concepts = {3};
  std::mt19937_64 rng(12);
  std::vector<double> counts(v, 0.0);
  for (const auto& s : sample_random(gen, concepts, n, 1, rng)) counts[s.token_ids[0]] += 1;
  const double expect = static_cast<double>(n) / static_cast<double>(v);
  const double sigma = std::sqrt(static_cast<double>(n) * (1.0 / v) * (1.0 - 1.0 / v));
  double chi2 = 0.0;
  for (double c : counts) {
    CHECK(std::abs(c - expect) <= 3 * sigma);
    chi2 += (c - expect) * (c - expect) / expect;
  }
  CHECK(chi2 < 27.88);  // 99.9% quantile, 9 degrees of freedom
}

TEST_CASE("beam sampler") {
  const auto gen = testutil::random_generator(testutil::tiny_config(6, 3, 4, 2), 2, 1.5);
  const std::vector<TokenId> concepts = {3};
  const auto five = sample_beam(gen, concepts, 5, 5, 4);
  CHECK(oracle::same_sequences(five, beam_search(DecodingModel(gen, concepts), 5, 4)));
  const auto one = sample_beam(gen, concepts, 1, 5, 4);
  REQUIRE(one.size() == 1);
  CHECK(one[0].token_ids == five[0].token_ids);
  CHECK(oracle::ids_of(five).size() == five.size());

  // Enumerable toy: with width covering the whole tree the samples are the true top-S.
  const std::size_t k = oracle::unpruned_width(5, 3);
  const auto small = testutil::random_generator(testutil::tiny_config(5, 2, 3, 2), 8, 1.5);
  const auto all = oracle::exhaustive(small, concepts, 3);
  const auto top = sample_beam(small, concepts, 4, k, 3);
  for (std::size_t i = 0; i < 4; ++i) CHECK(top[i].token_ids == all[i].token_ids);
}

TEST_CASE("policy gradient algebra") {
  const auto gen = testutil::random_generator(testutil::tiny_config(7, 3, 4, 2), 4);
  const std::vector<TokenId> concepts = {3, 5};
  const std::vector<TokenSequence> samples = {seq({4, 5}), seq({6}), seq({3, 3, 4})};

  SUBCASE("equal rewards give an exactly zero update") {
    const std::vector<double> r = {0.7, 0.7, 0.7};
    auto g = gen;
    const auto before = g;
    const auto stats = reinforce_step(g, concepts, samples, r, 10.0);
    CHECK(g == before);
    for (double a : stats.advantages) CHECK(a == 0.0);
  }
  SUBCASE("shifting every reward leaves the update bit-identical") {
    // Quarter-integer rewards and integer shifts, so every shifted reward is exact.
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> quarters(-400, 400), shift(-1000000, 1000000);
    for (int t = 0; t < 50; ++t) {
      std::vector<double> r(3), shifted(3);
      const double c = shift(rng);
      for (int i = 0; i < 3; ++i) {
        r[i] = quarters(rng) * 0.25;
        shifted[i] = r[i] + c;
      }
      CHECK(policy_gradient(gen, concepts, samples, r) == policy_gradient(gen, concepts, samples, shifted));
    }
  }
  SUBCASE("two samples with rewards (1, 0)") {
    const std::vector<TokenSequence> two = {samples[0], samples[1]};
    const std::vector<double> r = {1.0, 0.0};
    ReinforceStats stats;
    const auto g = policy_gradient(gen, concepts, two, r, &stats);
    CHECK(stats.baseline == 0.5);
    const auto g1 = gen.grad_log_prob(concepts, two[0]);
    const auto g2 = gen.grad_log_prob(concepts, two[1]);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == doctest::Approx(0.5 * (g1[i] - g2[i])).epsilon(1e-12));
    auto stepped = gen;
    reinforce_step(stepped, concepts, two, r, 0.01);
    for (std::size_t i = 0; i < g.size(); ++i)
      CHECK(stepped.params()[i] - gen.params()[i] == doctest::Approx(0.01 * g[i]).epsilon(1e-9).scale(1e-12));
  }
  SUBCASE("a small step raises the log-probability of the rewarded sample") {
    const std::vector<double> r = {2.0, 0.0, 0.5};
    auto g = gen;
    reinforce_step(g, concepts, samples, r, 1e-4);
    CHECK(g.seq_log_prob(concepts, samples[0]) > gen.seq_log_prob(concepts, samples[0]));
  }
  SUBCASE("fewer than two samples") {
    const std::vector<TokenSequence> one = {samples[0]};
    const std::vector<double> r = {1.0};
    CHECK_THROWS_WITH_AS(policy_gradient(gen, concepts, one, r), doctest::Contains("baseline undefined"),
                         std::invalid_argument);
    const std::vector<double> wrong = {1.0, 2.0};
    CHECK_THROWS_AS(policy_gradient(gen, concepts, samples, wrong), std::invalid_argument);
  }
  SUBCASE("clipping bounds the update norm") {
    const std::vector<double> r = {100.0, -100.0, 0.0};
    auto g = gen;
    const auto stats = reinforce_step(g, concepts, samples, r, 1.0, 0.5);
    CHECK(stats.grad_norm > 0.5);
    double moved = 0.0;
    for (std::size_t i = 0; i < g.num_params(); ++i) moved += std::pow(g.params()[i] - gen.params()[i], 2);
    CHECK(std::sqrt(moved) == doctest::Approx(0.5).epsilon(1e-9));
  }
}

TEST_CASE("Monte-Carlo policy gradient matches the analytic expected-reward gradient") {
  // Two-sequence policy pi_i = P(s_i) / (P(s_1) + P(s_2)). grad log pi_i differs from
  // grad log P(s_i) by a term shared by both samples, which the zero-sum advantages cancel,
  // so E[policy_gradient] = (S - 1) * grad J with J = sum_i pi_i R_i.
  const auto gen = testutil::random_generator(testutil::tiny_config(6, 2, 3, 1), 21, 0.5);
  const std::vector<TokenId> concepts = {3};
  const std::vector<TokenSequence> support = {seq({4}), seq({5, 4})};
  const std::vector<double> reward = {1.0, 3.0};
  const std::size_t S = 4, draws = 10000;

  std::vector<double> lp = {gen.seq_log_prob(concepts, support[0]), gen.seq_log_prob(concepts, support[1])};
  const double m = std::max(lp[0], lp[1]);
  const double z = std::exp(lp[0] - m) + std::exp(lp[1] - m);
  const std::vector<double> pi = {std::exp(lp[0] - m) / z, std::exp(lp[1] - m) / z};
  const std::vector<ParamVector> g = {gen.grad_log_prob(concepts, support[0]), gen.grad_log_prob(concepts, support[1])};
  const std::size_t n = gen.num_params();
  std::vector<double> analytic(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double shared = pi[0] * g[0][j] + pi[1] * g[1][j];
    analytic[j] = pi[0] * reward[0] * (g[0][j] - shared) + pi[1] * reward[1] * (g[1][j] - shared);
  }

  // Projections onto the analytic direction and a few random directions.
  std::mt19937_64 rng(77);
  std::normal_distribution<double> normal;
  std::vector<std::vector<double>> dirs;
  {
    double nrm = 0;
    for (double a : analytic) nrm += a * a;
    nrm = std::sqrt(nrm);
    REQUIRE(nrm > 1e-6);
    std::vector<double> d(n);
    for (std::size_t j = 0; j < n; ++j) d[j] = analytic[j] / nrm;
    dirs.push_back(d);
  }
  for (int k = 0; k < 4; ++k) {
    std::vector<double> d(n);
    double nrm = 0;
    for (auto& x : d) {
      x = normal(rng);
      nrm += x * x;
    }
    for (auto& x : d) x /= std::sqrt(nrm);
    dirs.push_back(d);
  }

  std::vector<double> sum(dirs.size(), 0.0), sumsq(dirs.size(), 0.0);
  std::bernoulli_distribution second(pi[1]);
  for (std::size_t t = 0; t < draws; ++t) {
    std::vector<TokenSequence> samples;
    std::vector<double> rewards;
    for (std::size_t s = 0; s < S; ++s) {
      const int pick = second(rng) ? 1 : 0;
      samples.push_back(support[static_cast<std::size_t>(pick)]);
      rewards.push_back(reward[static_cast<std::size_t>(pick)]);
    }
    const auto est = policy_gradient(gen, concepts, samples, rewards);
    for (std::size_t d = 0; d < dirs.size(); ++d) {
      double p = 0;
      for (std::size_t j = 0; j < n; ++j) p += dirs[d][j] * est[j];
      p /= static_cast<double>(S - 1);
      sum[d] += p;
      sumsq[d] += p * p;
    }
  }
  for (std::size_t d = 0; d < dirs.size(); ++d) {
    const double mean = sum[d] / draws;
    const double var = sumsq[d] / draws - mean * mean;
    const double se = std::sqrt(var / draws);
    double target = 0;
    for (std::size_t j = 0; j < n; ++j) target += dirs[d][j] * analytic[j];
    CHECK(std::abs(mean - target) <= 3 * se + 1e-12);
  }
}

TEST_CASE("RL training is deterministic and keeps distributions normalized") {
  const Corpus c(40, 10, 8);
  TrainableGenerator base(c.gen_config(), 3);
  TrainConfig cfg = quiet_config();
  cfg.epochs = 2;
  cfg.lr_mle = 0.5;
  train_mle(base, c.train, cfg);
  const auto scorers = train_scorers(c.vocab, c.splits.train, &c.grammar);
  ScoringContext ctx;
  ctx.finetuned = &scorers.finetuned;
  cfg.epochs = 1;
  cfg.lr_rl = 1e-2;
  cfg.max_steps = 12;
  for (Sampler s : {Sampler::beam, Sampler::random}) {
    cfg.sampler = s;
    cfg.epsilon = s == Sampler::beam ? 0.2 : 0.0;
    auto a = base, b = base;
    train_rl(a, c.train, cfg, ctx);
    train_rl(b, c.train, cfg, ctx);
    CHECK(a == b);
    CHECK(a.all_finite());
    const auto d = a.cond_dist(c.train[0].query.ids(), TokenSequence{});
    double total = 0;
    for (double p : d) total += p;
    CHECK(std::abs(total - 1.0) <= 1e-9);
  }
  // Inputs-only: references are not needed.
  auto inputs = c.train;
  for (auto& r : inputs) r.refs.clear();
  auto g = base;
  CHECK_NOTHROW(train_rl(g, inputs, cfg, ctx));
  CHECK_THROWS_AS(train_rl(g, std::span<const EncodedRecord>{}, cfg, ctx), DataError);
}

TEST_CASE("beam sampling reaches at least the reward of random sampling") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const Corpus c(150, 40, seed);
    TrainableGenerator base(c.gen_config(), seed);
    TrainConfig cfg = quiet_config();
    cfg.epochs = 10;
    cfg.lr_mle = 0.5;
    cfg.seed = seed;
    train_mle(base, c.train, cfg);
    const auto scorers = train_scorers(c.vocab, c.splits.train, &c.grammar);
    ScoringContext ctx;
    ctx.finetuned = &scorers.finetuned;
    cfg.epochs = 1;
    cfg.lr_rl = 1e-2;

    auto dev_reward = [&](const TrainableGenerator& g) {
      double total = 0;
      DecodeConfig plain = decode_preset("plain");
      for (const auto& rec : c.dev) {
        const auto out = generate(g, rec.query, plain, DecodeScorers{}).output;
        total += comprehensive_score(cfg.reward_weights, rec.query, out, ctx).r;
      }
      return total / static_cast<double>(c.dev.size());
    };
    auto beam = base, random = base;
    cfg.sampler = Sampler::beam;
    train_rl(beam, c.train, cfg, ctx);
    cfg.sampler = Sampler::random;
    train_rl(random, c.train, cfg, ctx);
    const double rb = dev_reward(beam), rr = dev_reward(random);
    MESSAGE("seed " << seed << ": beam " << rb << " random " << rr << " mle " << dev_reward(base));
    CHECK(rb >= rr);
  }
}
