#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace guidedgen {

using TokenId = std::uint32_t;

inline constexpr TokenId kBos = 0;
inline constexpr TokenId kEos = 1;
inline constexpr TokenId kPad = 2;
inline constexpr std::size_t kNumReserved = 3;

inline constexpr std::string_view kBosToken = "<bos>";
inline constexpr std::string_view kEosToken = "<eos>";
inline constexpr std::string_view kPadToken = "<pad>";

// Lowercases and splits on ASCII whitespace.
std::vector<std::string> tokenize(std::string_view text);
std::string join_tokens(std::span<const std::string> tokens);

// Closed word vocabulary. Ids 0..2 are BOS, EOS and PAD; content tokens follow.
class Vocab {
 public:
  // `content` must be unique and must not contain reserved spellings.
  explicit Vocab(std::vector<std::string> content);

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(TokenId id) const;
  std::optional<TokenId> find(std::string_view token) const;
  bool contains(std::string_view token) const { return find(token).has_value(); }

  // Throws DataError naming the first out-of-vocabulary token.
  std::vector<TokenId> encode(std::span<const std::string> tokens) const;
  // Reserved ids are skipped.
  std::vector<std::string> decode(std::span<const TokenId> ids) const;

  const std::vector<std::string>& tokens() const { return tokens_; }
  // FNV-1a over the token list; model files reference their vocab by this.
  std::uint64_t hash() const;

  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// Frequency-descending, then lexicographic. Tokens below `min_count` are dropped.
Vocab build_vocab(const std::vector<std::vector<std::string>>& corpus, int min_count = 1);

// A non-empty set of concept words. Insertion order is kept for serialization;
// semantics are those of a set.
class ConceptSet {
 public:
  explicit ConceptSet(std::vector<std::string> concepts);

  std::size_t size() const { return concepts_.size(); }
  const std::vector<std::string>& words() const { return concepts_; }
  const std::string& operator[](std::size_t i) const { return concepts_[i]; }
  auto begin() const { return concepts_.begin(); }
  auto end() const { return concepts_.end(); }

  // Order-independent identity, used for split disjointness.
  std::string key() const;

 private:
  std::vector<std::string> concepts_;
};

struct TokenSequence {
  std::vector<TokenId> token_ids;
  bool complete = false;
  double log_prob = 0.0;

  // Tokens that count toward sentence length: everything except EOS.
  std::size_t content_length() const;
  std::span<const TokenId> content() const {
    return {token_ids.data(), content_length()};
  }
  // Throws std::logic_error if the completeness or log_prob invariants are broken.
  void check() const;

  static TokenSequence closed(std::vector<TokenId> content, double log_prob = 0.0);
};

// Weights for the comprehensive score: plain-scorer perplexity, fine-tuned
// scorer perplexity, coverage and length.
struct RewardWeights {
  double w1 = 0.0;
  double w2 = 0.0;
  double w3 = 0.0;
  double w4 = 0.0;

  // Throws UsageError: negative weight, all zero, or w1 and w2 both set.
  void validate() const;
  bool uses_perplexity() const { return w1 > 0.0 || w2 > 0.0; }

  friend bool operator==(const RewardWeights&, const RewardWeights&) = default;
};

struct DatasetRecord {
  ConceptSet concepts;
  std::vector<std::vector<std::string>> refs;
};

}  // namespace guidedgen
