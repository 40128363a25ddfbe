#include "guidedgen/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include "guidedgen/error.hpp"
#include "guidedgen/textio.hpp"

namespace guidedgen {

double LanguageScorer::token_prob(std::span<const TokenId> prefix, TokenId token) const {
  return next_dist(prefix).at(token);
}

std::vector<double> LanguageScorer::next_dist(std::span<const TokenId> prefix) const {
  std::vector<double> out(vocab_size());
  next_dist(prefix, out);
  return out;
}

double scorer_perplexity(const LanguageScorer& scorer, const TokenSequence& seq) {
  if (seq.token_ids.empty()) throw DataError("perplexity of an empty sequence");
  if (!seq.complete) throw DataError("perplexity requires a complete sequence");
  const std::span<const TokenId> ids(seq.token_ids);
  double nll = 0.0;
  for (std::size_t t = 0; t < ids.size(); ++t) {
    nll -= std::log(scorer.token_prob(ids.first(t), ids[t]));
  }
  return std::exp(nll / static_cast<double>(ids.size()));
}

void UniformScorer::next_dist(std::span<const TokenId>, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(vocab_size_));
}

void TrigramParams::validate() const {
  if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0) throw UsageError("trigram lambdas must be >= 0");
  if (std::abs(lambda1 + lambda2 + lambda3 - 1.0) > 1e-9) {
    throw UsageError("trigram lambdas must sum to 1");
  }
  if (!(k > 0.0)) throw UsageError("trigram add-k constant must be > 0");
}

TrigramScorer TrigramScorer::train(std::span<const TokenSequence> corpus, std::size_t vocab_size,
                                   TrigramParams params) {
  params.validate();
  if (corpus.empty()) throw DataError("empty corpus");
  if (vocab_size >= (std::size_t{1} << 21)) throw UsageError("vocabulary too large for trigram keys");
  TrigramScorer lm;
  lm.vocab_size_ = vocab_size;
  lm.params_ = params;
  lm.unigram_.assign(vocab_size, 0);
  lm.bigram_history_.assign(vocab_size, 0);
  for (const auto& seq : corpus) {
    TokenId u = kBos, v = kBos;
    for (TokenId w : seq.token_ids) {
      if (w >= vocab_size) throw DataError("token id out of range in trigram corpus");
      ++lm.total_;
      ++lm.unigram_[w];
      ++lm.bigram_history_[v];
      ++lm.bigram_[key2(v, w)];
      ++lm.trigram_history_[key2(u, v)];
      ++lm.trigram_[key3(u, v, w)];
      u = v;
      v = w;
    }
  }
  return lm;
}

TrigramScorer::Context TrigramScorer::context_of(std::span<const TokenId> prefix) {
  Context ctx;
  const std::size_t n = prefix.size();
  if (n >= 1) ctx.v = prefix[n - 1];
  if (n >= 2) ctx.u = prefix[n - 2];
  return ctx;
}

double TrigramScorer::prob(const Context& ctx, std::uint32_t hist2, std::uint32_t hist3,
                           TokenId w) const {
  const double k = params_.k;
  const double kv = k * static_cast<double>(vocab_size_);
  auto lookup = [](const auto& map, std::uint64_t key) -> double {
    auto it = map.find(key);
    return it == map.end() ? 0.0 : static_cast<double>(it->second);
  };
  const double p1 = (unigram_[w] + k) / (static_cast<double>(total_) + kv);
  const double p2 = (lookup(bigram_, key2(ctx.v, w)) + k) / (hist2 + kv);
  const double p3 = (lookup(trigram_, key3(ctx.u, ctx.v, w)) + k) / (hist3 + kv);
  return params_.lambda1 * p1 + params_.lambda2 * p2 + params_.lambda3 * p3;
}

void TrigramScorer::next_dist(std::span<const TokenId> prefix, std::span<double> out) const {
  if (out.size() != vocab_size_) throw std::invalid_argument("distribution size mismatch");
  const Context ctx = context_of(prefix);
  const std::uint32_t hist2 = bigram_history_[ctx.v];
  auto it = trigram_history_.find(key2(ctx.u, ctx.v));
  const std::uint32_t hist3 = it == trigram_history_.end() ? 0 : it->second;
  for (std::size_t w = 0; w < vocab_size_; ++w) {
    out[w] = prob(ctx, hist2, hist3, static_cast<TokenId>(w));
  }
}

double TrigramScorer::token_prob(std::span<const TokenId> prefix, TokenId token) const {
  if (token >= vocab_size_) throw std::out_of_range("token id out of range");
  const Context ctx = context_of(prefix);
  auto it = trigram_history_.find(key2(ctx.u, ctx.v));
  return prob(ctx, bigram_history_[ctx.v], it == trigram_history_.end() ? 0 : it->second, token);
}

bool operator==(const TrigramScorer& a, const TrigramScorer& b) {
  return a.vocab_size_ == b.vocab_size_ && a.params_ == b.params_ && a.total_ == b.total_ &&
         a.unigram_ == b.unigram_ && a.bigram_history_ == b.bigram_history_ &&
         a.bigram_ == b.bigram_ && a.trigram_history_ == b.trigram_history_ &&
         a.trigram_ == b.trigram_;
}

namespace {

template <typename Map>
void write_sorted(std::ostream& out, const char* tag, const Map& map) {
  const std::map<std::uint64_t, std::uint32_t> sorted(map.begin(), map.end());
  out << tag << ' ' << sorted.size() << '\n';
  for (auto [key, count] : sorted) out << key << ' ' << count << '\n';
}

template <typename Map>
void read_map(std::istream& in, const char* tag, Map& map) {
  std::size_t n = textio::expect_count(in, tag);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t key = 0;
    std::uint32_t count = 0;
    if (!(in >> key >> count)) throw DataError(std::string("truncated section ") + tag);
    map.emplace(key, count);
  }
}

}  // namespace

void TrigramScorer::save(const std::string& path, std::uint64_t vocab_hash) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write scorer " + path);
  out << "guidedgen-trigram 1\n";
  out << "vocab_size " << vocab_size_ << '\n';
  out << "vocab_hash " << vocab_hash << '\n';
  out << "lambda " << textio::hex(params_.lambda1) << ' ' << textio::hex(params_.lambda2) << ' '
      << textio::hex(params_.lambda3) << '\n';
  out << "k " << textio::hex(params_.k) << '\n';
  out << "total " << total_ << '\n';
  out << "unigram " << vocab_size_ << '\n';
  for (std::size_t i = 0; i < vocab_size_; ++i) out << unigram_[i] << ' ' << bigram_history_[i] << '\n';
  write_sorted(out, "bigram", bigram_);
  write_sorted(out, "trigram_history", trigram_history_);
  write_sorted(out, "trigram", trigram_);
  if (!out) throw DataError("failed writing scorer " + path);
}

TrigramScorer TrigramScorer::load(const std::string& path, std::uint64_t expected_vocab_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open scorer " + path);
  textio::expect_header(in, "guidedgen-trigram", 1);
  TrigramScorer lm;
  lm.vocab_size_ = textio::expect_count(in, "vocab_size");
  if (textio::expect_u64(in, "vocab_hash") != expected_vocab_hash) {
    throw DataError("scorer " + path + " was trained with a different vocabulary");
  }
  textio::expect_tag(in, "lambda");
  lm.params_.lambda1 = textio::read_hex(in);
  lm.params_.lambda2 = textio::read_hex(in);
  lm.params_.lambda3 = textio::read_hex(in);
  textio::expect_tag(in, "k");
  lm.params_.k = textio::read_hex(in);
  lm.total_ = textio::expect_u64(in, "total");
  if (textio::expect_count(in, "unigram") != lm.vocab_size_) throw DataError("unigram size mismatch");
  lm.unigram_.resize(lm.vocab_size_);
  lm.bigram_history_.resize(lm.vocab_size_);
  for (std::size_t i = 0; i < lm.vocab_size_; ++i) {
    if (!(in >> lm.unigram_[i] >> lm.bigram_history_[i])) throw DataError("truncated unigram section");
  }
  read_map(in, "bigram", lm.bigram_);
  read_map(in, "trigram_history", lm.trigram_history_);
  read_map(in, "trigram", lm.trigram_);
  lm.params_.validate();
  return lm;
}

}  // namespace guidedgen
