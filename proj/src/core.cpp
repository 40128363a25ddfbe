#include "guidedgen/core.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include "guidedgen/error.hpp"

namespace guidedgen {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

namespace {

bool is_reserved(std::string_view t) {
  return t == kBosToken || t == kEosToken || t == kPadToken;
}

}  // namespace

Vocab::Vocab(std::vector<std::string> content) {
  tokens_.reserve(content.size() + kNumReserved);
  tokens_.emplace_back(kBosToken);
  tokens_.emplace_back(kEosToken);
  tokens_.emplace_back(kPadToken);
  for (auto& t : content) {
    if (t.empty()) throw DataError("empty token in vocabulary");
    if (is_reserved(t)) throw DataError("reserved token '" + t + "' in corpus");
    tokens_.push_back(std::move(t));
  }
  if (tokens_.size() <= kNumReserved) throw DataError("vocabulary has no content tokens");
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw DataError("duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
}

const std::string& Vocab::token(TokenId id) const {
  if (id >= tokens_.size()) throw std::out_of_range("token id out of range");
  return tokens_[id];
}

std::optional<TokenId> Vocab::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<TokenId> Vocab::encode(std::span<const std::string> tokens) const {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    auto id = find(t);
    if (!id) throw DataError("out-of-vocabulary token '" + t + "'");
    ids.push_back(*id);
  }
  return ids;
}

std::vector<std::string> Vocab::decode(std::span<const TokenId> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (TokenId id : ids) {
    if (id < kNumReserved) continue;
    out.push_back(token(id));
  }
  return out;
}

std::uint64_t Vocab::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& t : tokens_) {
    for (char c : t) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ULL;
    }
    h ^= 0x0A;
    h *= 1099511628211ULL;
  }
  return h;
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocab file " + path);
  for (std::size_t i = kNumReserved; i < tokens_.size(); ++i) out << tokens_[i] << '\n';
  if (!out) throw DataError("failed writing vocab file " + path);
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open vocab file " + path);
  std::vector<std::string> content;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) content.push_back(line);
  }
  return Vocab(std::move(content));
}

Vocab build_vocab(const std::vector<std::vector<std::string>>& corpus, int min_count) {
  if (corpus.empty()) throw DataError("empty corpus");
  if (min_count < 1) throw UsageError("min_count must be >= 1");
  std::map<std::string, long> counts;
  for (const auto& sentence : corpus) {
    for (const auto& t : sentence) ++counts[t];
  }
  std::vector<std::pair<std::string, long>> kept;
  for (auto& [tok, n] : counts) {
    if (n >= min_count) kept.emplace_back(tok, n);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> content;
  content.reserve(kept.size());
  for (auto& [tok, n] : kept) content.push_back(tok);
  return Vocab(std::move(content));
}

ConceptSet::ConceptSet(std::vector<std::string> concepts) : concepts_(std::move(concepts)) {
  if (concepts_.empty()) throw DataError("empty concept set");
  std::set<std::string> seen;
  for (const auto& c : concepts_) {
    if (c.empty()) throw DataError("empty concept");
    if (!seen.insert(c).second) throw DataError("duplicate concept '" + c + "'");
  }
}

std::string ConceptSet::key() const {
  std::vector<std::string> sorted = concepts_;
  std::sort(sorted.begin(), sorted.end());
  return join_tokens(sorted);
}

std::size_t TokenSequence::content_length() const {
  if (!token_ids.empty() && token_ids.back() == kEos) return token_ids.size() - 1;
  return token_ids.size();
}

void TokenSequence::check() const {
  if (log_prob > 0.0) throw std::logic_error("log_prob must be <= 0");
  const std::size_t n = token_ids.size();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (token_ids[i] == kEos) throw std::logic_error("EOS before end of sequence");
  }
  const bool ends_eos = n > 0 && token_ids.back() == kEos;
  if (complete != ends_eos) throw std::logic_error("completeness flag disagrees with EOS");
}

TokenSequence TokenSequence::closed(std::vector<TokenId> content, double log_prob) {
  content.push_back(kEos);
  return TokenSequence{std::move(content), true, log_prob};
}

void RewardWeights::validate() const {
  if (w1 < 0 || w2 < 0 || w3 < 0 || w4 < 0) throw UsageError("reward weights must be non-negative");
  if (w1 > 0 && w2 > 0) throw UsageError("w1/w2 exclusivity: w1 and w2 cannot both be non-zero");
  if (w1 == 0 && w2 == 0 && w3 == 0 && w4 == 0) throw UsageError("all reward weights are zero");
}

}  // namespace guidedgen
