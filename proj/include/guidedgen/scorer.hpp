#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "guidedgen/core.hpp"

namespace guidedgen {

// Unconditional next-token model used for fluency scoring and interpolation.
// Prefixes are content tokens without the leading BOS.
class LanguageScorer {
 public:
  virtual ~LanguageScorer() = default;

  virtual std::size_t vocab_size() const = 0;
  // Writes a strictly positive distribution summing to 1 into `out`.
  virtual void next_dist(std::span<const TokenId> prefix, std::span<double> out) const = 0;
  virtual double token_prob(std::span<const TokenId> prefix, TokenId token) const;

  std::vector<double> next_dist(std::span<const TokenId> prefix) const;
};

// exp(-(1/N) sum_t log P(y_t | y_<t)) with N counting the EOS step.
double scorer_perplexity(const LanguageScorer& scorer, const TokenSequence& seq);

class UniformScorer final : public LanguageScorer {
 public:
  explicit UniformScorer(std::size_t vocab_size) : vocab_size_(vocab_size) {}
  using LanguageScorer::next_dist;
  std::size_t vocab_size() const override { return vocab_size_; }
  void next_dist(std::span<const TokenId> prefix, std::span<double> out) const override;
  double token_prob(std::span<const TokenId>, TokenId) const override {
    return 1.0 / static_cast<double>(vocab_size_);
  }

 private:
  std::size_t vocab_size_;
};

struct TrigramParams {
  // Unigram, bigram and trigram interpolation weights.
  double lambda1 = 0.1;
  double lambda2 = 0.3;
  double lambda3 = 0.6;
  double k = 0.1;

  void validate() const;
  friend bool operator==(const TrigramParams&, const TrigramParams&) = default;
};

// Interpolated add-k trigram model. Each order's estimate is normalized over
// the full vocabulary, so the mixture is a proper, strictly positive distribution.
class TrigramScorer final : public LanguageScorer {
 public:
  static TrigramScorer train(std::span<const TokenSequence> corpus, std::size_t vocab_size,
                             TrigramParams params = {});
  using LanguageScorer::next_dist;

  std::size_t vocab_size() const override { return vocab_size_; }
  void next_dist(std::span<const TokenId> prefix, std::span<double> out) const override;
  double token_prob(std::span<const TokenId> prefix, TokenId token) const override;

  const TrigramParams& params() const { return params_; }

  void save(const std::string& path, std::uint64_t vocab_hash) const;
  static TrigramScorer load(const std::string& path, std::uint64_t expected_vocab_hash);

  friend bool operator==(const TrigramScorer& a, const TrigramScorer& b);

 private:
  TrigramScorer() = default;

  struct Context {
    TokenId u = kBos;  // two back
    TokenId v = kBos;  // one back
  };
  static Context context_of(std::span<const TokenId> prefix);
  double prob(const Context& ctx, std::uint32_t hist2, std::uint32_t hist3, TokenId w) const;

  static std::uint64_t key2(TokenId v, TokenId w) { return (std::uint64_t{v} << 32) | w; }
  static std::uint64_t key3(TokenId u, TokenId v, TokenId w) {
    return (std::uint64_t{u} << 42) | (std::uint64_t{v} << 21) | w;
  }

  std::size_t vocab_size_ = 0;
  TrigramParams params_;
  std::uint64_t total_ = 0;
  std::vector<std::uint32_t> unigram_;
  std::vector<std::uint32_t> bigram_history_;
  std::unordered_map<std::uint64_t, std::uint32_t> bigram_;
  std::unordered_map<std::uint64_t, std::uint32_t> trigram_history_;
  std::unordered_map<std::uint64_t, std::uint32_t> trigram_;
};

}  // namespace guidedgen
