#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "guidedgen/core.hpp"

namespace guidedgen {

struct GeneratorConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 16;
  std::size_t hidden_dim = 64;
  // Number of previous tokens fed to the hidden layer; BOS pads the left edge.
  std::size_t window = 4;

  std::size_t input_dim() const { return embed_dim * (1 + window); }
  void validate() const;
  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

// Offsets of each parameter block inside the flat parameter vector, in
// declaration order: concept embedding, token embedding, hidden weight,
// hidden bias, output weight, output bias.
struct ParamLayout {
  explicit ParamLayout(const GeneratorConfig& cfg);

  std::size_t concept_emb = 0;
  std::size_t token_emb = 0;
  std::size_t hidden_w = 0;
  std::size_t hidden_b = 0;
  std::size_t out_w = 0;
  std::size_t out_b = 0;
  std::size_t total = 0;
};

// Dense vector shaped like the generator parameters; used for gradients and updates.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t n) : values_(n, 0.0) {}

  std::size_t size() const { return values_.size(); }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  ParamVector& operator+=(const ParamVector& other);
  void add_scaled(const ParamVector& other, double scale);
  void scale(double s);
  void set_zero();
  double norm() const;
  bool all_finite() const;
  // Rescales to `max_norm` if the L2 norm exceeds it. Returns the norm before clipping.
  double clip(double max_norm);

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<double> values_;
};

// Conditional next-token model P(y_t | y_<t, X): mean-pooled concept embedding
// concatenated with the embeddings of the last `window` tokens, one tanh hidden
// layer, softmax over the vocabulary. Gradients are derived by hand.
class TrainableGenerator {
 public:
  // Output projection starts at zero (uniform distribution); embeddings and
  // hidden weights are drawn uniformly from [-0.1, 0.1]; biases start at zero.
  TrainableGenerator(const GeneratorConfig& cfg, std::uint64_t seed);

  const GeneratorConfig& config() const { return cfg_; }
  const ParamLayout& layout() const { return layout_; }
  std::size_t vocab_size() const { return cfg_.vocab_size; }
  std::size_t num_params() const { return params_.size(); }

  std::span<const double> params() const { return params_; }
  std::span<double> params() { return params_; }
  std::span<double> concept_embedding(TokenId id);
  std::span<double> token_embedding(TokenId id);

  // Next-token distribution after `prefix` (content tokens, no BOS).
  void next_dist(std::span<const TokenId> concepts, std::span<const TokenId> prefix,
                 std::span<double> out) const;
  // Throws std::invalid_argument on a complete prefix.
  std::vector<double> cond_dist(std::span<const TokenId> concepts, const TokenSequence& prefix) const;

  // Sum of log P(y_t | y_<t, X) over every token including EOS. Requires a complete sequence.
  double seq_log_prob(std::span<const TokenId> concepts, const TokenSequence& seq) const;
  // Adds scale * d(seq_log_prob)/d(theta) into `grad`; returns seq_log_prob.
  double accumulate_grad(std::span<const TokenId> concepts, const TokenSequence& seq, double scale,
                         ParamVector& grad) const;
  ParamVector grad_log_prob(std::span<const TokenId> concepts, const TokenSequence& seq) const;
  ParamVector zero_grad() const { return ParamVector(params_.size()); }

  // theta += scale * delta
  void apply(const ParamVector& delta, double scale);
  bool all_finite() const;

  void save(const std::string& path, std::uint64_t vocab_hash) const;
  static TrainableGenerator load(const std::string& path, std::uint64_t expected_vocab_hash);

  friend bool operator==(const TrainableGenerator& a, const TrainableGenerator& b) {
    return a.cfg_ == b.cfg_ && a.params_ == b.params_;
  }

 private:
  TrainableGenerator(const GeneratorConfig& cfg, std::vector<double> params);

  struct Activations {
    std::vector<double> input;
    std::vector<double> hidden;
    std::vector<double> probs;
    std::vector<TokenId> context;
  };

  void concept_mean(std::span<const TokenId> concepts, std::span<double> out) const;
  void forward(std::span<const double> mean, std::span<const TokenId> prefix, Activations& act) const;
  void check_tokens(std::span<const TokenId> ids) const;

  GeneratorConfig cfg_;
  ParamLayout layout_;
  std::vector<double> params_;
};

}  // namespace guidedgen
