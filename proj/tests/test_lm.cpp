#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "guidedgen/error.hpp"
#include "guidedgen/generator.hpp"
#include "guidedgen/pipeline.hpp"
#include "guidedgen/scorer.hpp"
#include "guidedgen/synth.hpp"
#include "test_util.hpp"

using namespace guidedgen;
using testutil::seq;

namespace {

// Puts all mass on a fixed continuation; used only for the perplexity-one case.
class ScriptedScorer final : public LanguageScorer {
 public:
  ScriptedScorer(std::size_t v, std::vector<TokenId> script) : v_(v), script_(std::move(script)) {}
  std::size_t vocab_size() const override { return v_; }
  void next_dist(std::span<const TokenId> prefix, std::span<double> out) const override {
    std::fill(out.begin(), out.end(), 0.0);
    out[script_.at(prefix.size())] = 1.0;
  }

 private:
  std::size_t v_;
  std::vector<TokenId> script_;
};

double sum(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

struct SynthFixture {
  std::vector<DatasetRecord> train = generate_corpus(default_grammar(), 200, 5);
  Vocab vocab = training_vocab(train, {}, nullptr);
  std::vector<TokenSequence> corpus = reference_sequences(vocab, train);
};

}  // namespace

TEST_CASE("uniform scorer perplexity equals vocabulary size") {
  const UniformScorer u(10);
  CHECK(scorer_perplexity(u, seq({3, 4, 5})) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(scorer_perplexity(u, seq({})) == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("probability-one scorer has perplexity one") {
  const ScriptedScorer s(6, {3, 4, kEos});
  CHECK(scorer_perplexity(s, seq({3, 4})) == 1.0);
}

TEST_CASE("perplexity errors") {
  const UniformScorer u(10);
  CHECK_THROWS_AS(scorer_perplexity(u, TokenSequence{}), DataError);
  CHECK_THROWS_AS(scorer_perplexity(u, seq({3}, false)), DataError);
}

TEST_CASE("trigram parameters are validated") {
  CHECK_THROWS_AS((TrigramParams{0.5, 0.3, 0.3, 0.1}.validate()), UsageError);
  CHECK_THROWS_AS((TrigramParams{0.1, 0.3, 0.6, 0.0}.validate()), UsageError);
  CHECK_THROWS_AS((TrigramParams{-0.1, 0.5, 0.6, 0.1}.validate()), UsageError);
  CHECK_NOTHROW((TrigramParams{0.1, 0.3, 0.6 + 1e-10, 0.1}.validate()));
  const std::vector<TokenSequence> c = {seq({3})};
  CHECK_THROWS_AS(TrigramScorer::train(c, 5, TrigramParams{0.5, 0.5, 0.5, 0.1}), UsageError);
  CHECK_THROWS_AS(TrigramScorer::train({}, 5), DataError);
}

TEST_CASE("trigram: a single sentence dominates its own continuation") {
  // vocab: bos eos pad a b c
  const std::vector<TokenSequence> corpus = {seq({3, 4})};
  const auto lm = TrigramScorer::train(corpus, 6);
  const std::vector<TokenId> prefix = {3};
  const auto d = lm.next_dist(prefix);
  for (TokenId c = 0; c < 6; ++c)
    if (c != 4) CHECK(d[4] > d[c]);
  CHECK(lm.token_prob(prefix, 4) == d[4]);
}

TEST_CASE("trigram: huge add-k with unigram weight only approaches uniform") {
  const std::vector<TokenSequence> corpus = {seq({3, 4, 5}), seq({3, 3, 9})};
  const auto lm = TrigramScorer::train(corpus, 10, TrigramParams{1.0, 0.0, 0.0, 1e6});
  const std::vector<TokenId> prefix = {3, 4};
  const auto d = lm.next_dist(prefix);
  const double mx = *std::max_element(d.begin(), d.end());
  const double mn = *std::min_element(d.begin(), d.end());
  CHECK(mx / mn < 1.01);
}

TEST_CASE("trigram distributions are positive and normalized over random prefixes") {
  SynthFixture f;
  const auto lm = TrigramScorer::train(f.corpus, f.vocab.size());
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<TokenId> prefix(rng() % 6);
    for (auto& t : prefix) t = static_cast<TokenId>(rng() % f.vocab.size());
    const auto d = lm.next_dist(prefix);
    CHECK(std::abs(sum(d) - 1.0) <= 1e-9);
    CHECK(*std::min_element(d.begin(), d.end()) > 0.0);
  }
}

TEST_CASE("trigram training is deterministic and persists bit-exactly") {
  SynthFixture f;
  const auto a = TrigramScorer::train(f.corpus, f.vocab.size());
  const auto b = TrigramScorer::train(f.corpus, f.vocab.size());
  CHECK(a == b);
  const auto dir = testutil::temp_dir("trigram");
  const auto path = (dir / "lm.txt").string();
  a.save(path, f.vocab.hash());
  const auto back = TrigramScorer::load(path, f.vocab.hash());
  CHECK(back == a);
  for (const auto& s : f.corpus) CHECK(scorer_perplexity(back, s) == scorer_perplexity(a, s));
  CHECK_THROWS_AS(TrigramScorer::load(path, f.vocab.hash() ^ 1), DataError);
}

TEST_CASE("trigram prefers an in-corpus sentence over its shuffle") {
  SynthFixture f;
  const auto lm = TrigramScorer::train(f.corpus, f.vocab.size());
  std::mt19937_64 rng(8);
  int checked = 0;
  for (std::size_t i = 0; i < f.corpus.size(); i += 25) {
    auto content = std::vector<TokenId>(f.corpus[i].content().begin(), f.corpus[i].content().end());
    auto shuffled = content;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    if (shuffled == content) continue;
    CHECK(scorer_perplexity(lm, f.corpus[i]) < scorer_perplexity(lm, TokenSequence::closed(shuffled)));
    ++checked;
  }
  CHECK(checked > 10);
}

TEST_CASE("perplexity is invariant under relabeling of vocabulary ids") {
  const std::size_t v = 9;
  std::vector<TokenSequence> corpus = {seq({3, 4, 5}), seq({5, 6, 7, 8}), seq({3, 3, 8}), seq({4, 6})};
  std::vector<TokenId> perm(v);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(4);
  std::shuffle(perm.begin() + kNumReserved, perm.end(), rng);
  auto relabel = [&](const TokenSequence& s) {
    TokenSequence r = s;
    for (auto& t : r.token_ids) t = perm[t];
    return r;
  };
  std::vector<TokenSequence> permuted;
  for (const auto& s : corpus) permuted.push_back(relabel(s));
  const auto a = TrigramScorer::train(corpus, v);
  const auto b = TrigramScorer::train(permuted, v);
  const std::vector<TokenSequence> probes = {seq({3, 4, 5}), seq({8, 7}), seq({6, 6, 6, 3}), seq({})};
  for (const auto& p : probes) {
    CHECK(scorer_perplexity(a, p) == doctest::Approx(scorer_perplexity(b, relabel(p))).epsilon(1e-12));
  }
}

TEST_CASE("fresh generator is uniform") {
  const TrainableGenerator gen(testutil::tiny_config(12), 1);
  const std::vector<TokenId> concepts = {4, 5};
  const auto d = gen.cond_dist(concepts, TokenSequence{});
  for (double p : d) CHECK(p == doctest::Approx(1.0 / 12).epsilon(1e-15));
  CHECK(gen.seq_log_prob(concepts, seq({})) == doctest::Approx(std::log(1.0 / 12)).epsilon(1e-14));
}

TEST_CASE("generator distributions: normalized, deterministic, compositional") {
  const auto gen = testutil::random_generator(testutil::tiny_config(10, 4, 5, 3), 2);
  const std::vector<TokenId> concepts = {3, 7};
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    TokenSequence prefix;
    prefix.token_ids.resize(rng() % 6);
    for (auto& t : prefix.token_ids) t = static_cast<TokenId>(3 + rng() % 7);
    const auto d1 = gen.cond_dist(concepts, prefix);
    const auto d2 = gen.cond_dist(concepts, prefix);
    CHECK(d1 == d2);
    CHECK(std::abs(sum(d1) - 1.0) <= 1e-9);
    CHECK(*std::min_element(d1.begin(), d1.end()) > 0.0);
  }
  const auto s = seq({4, 9});
  double manual = 0.0;
  for (std::size_t t = 0; t < s.token_ids.size(); ++t) {
    TokenSequence prefix;
    prefix.token_ids.assign(s.token_ids.begin(), s.token_ids.begin() + static_cast<std::ptrdiff_t>(t));
    manual += std::log(gen.cond_dist(concepts, prefix)[s.token_ids[t]]);
  }
  CHECK(gen.seq_log_prob(concepts, s) == manual);
  CHECK(gen.seq_log_prob(concepts, s) <= 0.0);
}

TEST_CASE("generator errors on complete prefixes and incomplete sequences") {
  const TrainableGenerator gen(testutil::tiny_config(8), 1);
  const std::vector<TokenId> concepts = {3};
  CHECK_THROWS_WITH_AS(gen.cond_dist(concepts, seq({4})), "cannot extend complete sequence", std::invalid_argument);
  CHECK_THROWS_AS(gen.seq_log_prob(concepts, seq({4}, false)), std::invalid_argument);
  CHECK_THROWS_AS(gen.grad_log_prob(concepts, seq({4}, false)), std::invalid_argument);
}

TEST_CASE("gradient matches central differences on a small generator") {
  auto gen = testutil::random_generator(testutil::tiny_config(8, 3, 4, 2), 6, 0.5);
  const std::vector<TokenId> concepts = {3, 5};
  const auto s = seq({4, 6, 3});
  const auto g = gen.grad_log_prob(concepts, s);
  const double h = 1e-5;
  for (std::size_t i = 0; i < gen.num_params(); ++i) {
    const double keep = gen.params()[i];
    gen.params()[i] = keep + h;
    const double up = gen.seq_log_prob(concepts, s);
    gen.params()[i] = keep - h;
    const double down = gen.seq_log_prob(concepts, s);
    gen.params()[i] = keep;
    const double fd = (up - down) / (2 * h);
    CHECK(std::abs(fd - g[i]) <= 1e-4 * std::max({std::abs(fd), std::abs(g[i]), 1e-5}));
  }
}

TEST_CASE("unused embedding rows get exactly zero gradient") {
  const auto cfg = testutil::tiny_config(10, 3, 4, 2);
  const auto gen = testutil::random_generator(cfg, 9);
  const std::vector<TokenId> concepts = {3, 4};
  const auto g = gen.grad_log_prob(concepts, seq({5, 6}));
  const ParamLayout lay(cfg);
  for (TokenId unused : {7u, 8u, 9u}) {
    for (std::size_t j = 0; j < cfg.embed_dim; ++j) {
      CHECK(g[lay.token_emb + unused * cfg.embed_dim + j] == 0.0);
      CHECK(g[lay.concept_emb + unused * cfg.embed_dim + j] == 0.0);
    }
  }
}

TEST_CASE("minibatch gradient is the sum of per-sequence gradients") {
  const auto gen = testutil::random_generator(testutil::tiny_config(10, 3, 4, 2), 10);
  const std::vector<TokenId> concepts = {3, 8};
  const auto a = seq({4, 5}), b = seq({9});
  auto batch = gen.zero_grad();
  gen.accumulate_grad(concepts, a, 1.0, batch);
  gen.accumulate_grad(concepts, b, 1.0, batch);
  auto separate = gen.grad_log_prob(concepts, a);
  separate += gen.grad_log_prob(concepts, b);
  for (std::size_t i = 0; i < batch.size(); ++i) CHECK(batch[i] == doctest::Approx(separate[i]).epsilon(1e-12));
}

TEST_CASE("generator checkpoints round-trip bit-exactly") {
  const auto gen = testutil::random_generator(testutil::tiny_config(10, 3, 4, 2), 11);
  const auto dir = testutil::temp_dir("generator");
  const auto path = (dir / "g.ckpt").string();
  gen.save(path, 1234);
  const auto back = TrainableGenerator::load(path, 1234);
  CHECK(back == gen);
  CHECK_THROWS_AS(TrainableGenerator::load(path, 99), DataError);
}

TEST_CASE("parameter vector clipping") {
  ParamVector v(2);
  v[0] = 3.0;
  v[1] = 4.0;
  CHECK(v.clip(10.0) == 5.0);
  CHECK(v[0] == 3.0);
  CHECK(v.clip(1.0) == 5.0);
  CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-15));
  ParamVector w(2);
  w[0] = 30.0;
  CHECK(w.clip(0.0) == 30.0);
  CHECK(w[0] == 30.0);
}
