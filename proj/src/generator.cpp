#include "guidedgen/generator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "guidedgen/error.hpp"
#include "guidedgen/textio.hpp"

namespace guidedgen {

void GeneratorConfig::validate() const {
  if (vocab_size < kNumReserved + 1) throw UsageError("generator vocabulary too small");
  if (embed_dim == 0 || hidden_dim == 0) throw UsageError("generator dimensions must be positive");
  if (window == 0) throw UsageError("generator context window must be >= 1");
}

ParamLayout::ParamLayout(const GeneratorConfig& cfg) {
  const std::size_t v = cfg.vocab_size, e = cfg.embed_dim, h = cfg.hidden_dim;
  concept_emb = 0;
  token_emb = concept_emb + v * e;
  hidden_w = token_emb + v * e;
  hidden_b = hidden_w + h * cfg.input_dim();
  out_w = hidden_b + h;
  out_b = out_w + v * h;
  total = out_b + v;
}

ParamVector& ParamVector::operator+=(const ParamVector& other) {
  add_scaled(other, 1.0);
  return *this;
}

void ParamVector::add_scaled(const ParamVector& other, double scale) {
  if (other.size() != size()) throw std::invalid_argument("parameter vector size mismatch");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += scale * other.values_[i];
}

void ParamVector::scale(double s) {
  for (double& v : values_) v *= s;
}

void ParamVector::set_zero() { std::fill(values_.begin(), values_.end(), 0.0); }

double ParamVector::norm() const {
  double sq = 0.0;
  for (double v : values_) sq += v * v;
  return std::sqrt(sq);
}

bool ParamVector::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double ParamVector::clip(double max_norm) {
  const double n = norm();
  if (max_norm > 0.0 && n > max_norm) scale(max_norm / n);
  return n;
}

TrainableGenerator::TrainableGenerator(const GeneratorConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), layout_(cfg) {
  cfg_.validate();
  params_.assign(layout_.total, 0.0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> init(-0.1, 0.1);
  for (std::size_t i = layout_.concept_emb; i < layout_.hidden_b; ++i) params_[i] = init(rng);
}

TrainableGenerator::TrainableGenerator(const GeneratorConfig& cfg, std::vector<double> params)
    : cfg_(cfg), layout_(cfg), params_(std::move(params)) {
  cfg_.validate();
  if (params_.size() != layout_.total) throw DataError("parameter count does not match config");
}

std::span<double> TrainableGenerator::concept_embedding(TokenId id) {
  return std::span<double>(params_).subspan(layout_.concept_emb + id * cfg_.embed_dim, cfg_.embed_dim);
}

std::span<double> TrainableGenerator::token_embedding(TokenId id) {
  return std::span<double>(params_).subspan(layout_.token_emb + id * cfg_.embed_dim, cfg_.embed_dim);
}

void TrainableGenerator::check_tokens(std::span<const TokenId> ids) const {
  for (TokenId id : ids) {
    if (id >= cfg_.vocab_size) throw std::out_of_range("token id out of range");
  }
}

void TrainableGenerator::concept_mean(std::span<const TokenId> concepts, std::span<double> out) const {
  if (concepts.empty()) throw std::invalid_argument("empty concept set");
  check_tokens(concepts);
  const std::size_t e = cfg_.embed_dim;
  std::fill(out.begin(), out.end(), 0.0);
  for (TokenId c : concepts) {
    const double* row = &params_[layout_.concept_emb + c * e];
    for (std::size_t j = 0; j < e; ++j) out[j] += row[j];
  }
  const double inv = 1.0 / static_cast<double>(concepts.size());
  for (std::size_t j = 0; j < e; ++j) out[j] *= inv;
}

void TrainableGenerator::forward(std::span<const double> mean, std::span<const TokenId> prefix,
                                 Activations& act) const {
  const std::size_t e = cfg_.embed_dim, h = cfg_.hidden_dim, v = cfg_.vocab_size;
  const std::size_t in_dim = cfg_.input_dim();
  act.input.resize(in_dim);
  act.hidden.resize(h);
  act.probs.resize(v);
  act.context.resize(cfg_.window);

  std::copy(mean.begin(), mean.end(), act.input.begin());
  // Slot 0 holds the most recent token.
  for (std::size_t i = 0; i < cfg_.window; ++i) {
    const TokenId tok = i < prefix.size() ? prefix[prefix.size() - 1 - i] : kBos;
    act.context[i] = tok;
    const double* row = &params_[layout_.token_emb + tok * e];
    std::copy(row, row + e, act.input.begin() + static_cast<std::ptrdiff_t>(e * (1 + i)));
  }

  for (std::size_t j = 0; j < h; ++j) {
    const double* w = &params_[layout_.hidden_w + j * in_dim];
    double s = params_[layout_.hidden_b + j];
    for (std::size_t k = 0; k < in_dim; ++k) s += w[k] * act.input[k];
    act.hidden[j] = std::tanh(s);
  }

  double max_logit = -INFINITY;
  for (std::size_t t = 0; t < v; ++t) {
    const double* w = &params_[layout_.out_w + t * h];
    double s = params_[layout_.out_b + t];
    for (std::size_t j = 0; j < h; ++j) s += w[j] * act.hidden[j];
    act.probs[t] = s;
    max_logit = std::max(max_logit, s);
  }
  double z = 0.0;
  for (double& p : act.probs) {
    p = std::exp(p - max_logit);
    z += p;
  }
  for (double& p : act.probs) p /= z;
}

void TrainableGenerator::next_dist(std::span<const TokenId> concepts, std::span<const TokenId> prefix,
                                   std::span<double> out) const {
  if (out.size() != cfg_.vocab_size) throw std::invalid_argument("distribution size mismatch");
  check_tokens(prefix);
  std::vector<double> mean(cfg_.embed_dim);
  concept_mean(concepts, mean);
  Activations act;
  forward(mean, prefix, act);
  std::copy(act.probs.begin(), act.probs.end(), out.begin());
}

std::vector<double> TrainableGenerator::cond_dist(std::span<const TokenId> concepts,
                                                  const TokenSequence& prefix) const {
  if (prefix.complete) throw std::invalid_argument("cannot extend complete sequence");
  std::vector<double> out(cfg_.vocab_size);
  next_dist(concepts, prefix.token_ids, out);
  return out;
}

double TrainableGenerator::seq_log_prob(std::span<const TokenId> concepts,
                                        const TokenSequence& seq) const {
  if (!seq.complete) throw std::invalid_argument("seq_log_prob requires a complete sequence");
  check_tokens(seq.token_ids);
  std::vector<double> mean(cfg_.embed_dim);
  concept_mean(concepts, mean);
  Activations act;
  const std::span<const TokenId> ids(seq.token_ids);
  double lp = 0.0;
  for (std::size_t t = 0; t < ids.size(); ++t) {
    forward(mean, ids.first(t), act);
    lp += std::log(act.probs[ids[t]]);
  }
  return lp;
}

double TrainableGenerator::accumulate_grad(std::span<const TokenId> concepts, const TokenSequence& seq,
                                           double scale, ParamVector& grad) const {
  if (!seq.complete) throw std::invalid_argument("gradient requires a complete sequence");
  if (grad.size() != params_.size()) throw std::invalid_argument("gradient size mismatch");
  check_tokens(seq.token_ids);
  const std::size_t e = cfg_.embed_dim, h = cfg_.hidden_dim, v = cfg_.vocab_size;
  const std::size_t in_dim = cfg_.input_dim();

  std::vector<double> mean(e);
  concept_mean(concepts, mean);
  Activations act;
  std::vector<double> dlogit(v), dpre(h), dinput(in_dim);
  std::span<double> g = grad.values();
  const std::span<const TokenId> ids(seq.token_ids);
  double lp = 0.0;

  for (std::size_t t = 0; t < ids.size(); ++t) {
    forward(mean, ids.first(t), act);
    const TokenId target = ids[t];
    lp += std::log(act.probs[target]);

    // d log p[target] / d logit = onehot - p
    for (std::size_t k = 0; k < v; ++k) dlogit[k] = -scale * act.probs[k];
    dlogit[target] += scale;

    std::fill(dpre.begin(), dpre.end(), 0.0);
    for (std::size_t k = 0; k < v; ++k) {
      const double d = dlogit[k];
      double* gw = &g[layout_.out_w + k * h];
      const double* w = &params_[layout_.out_w + k * h];
      for (std::size_t j = 0; j < h; ++j) {
        gw[j] += d * act.hidden[j];
        dpre[j] += d * w[j];
      }
      g[layout_.out_b + k] += d;
    }
    for (std::size_t j = 0; j < h; ++j) dpre[j] *= 1.0 - act.hidden[j] * act.hidden[j];

    std::fill(dinput.begin(), dinput.end(), 0.0);
    for (std::size_t j = 0; j < h; ++j) {
      const double d = dpre[j];
      if (d == 0.0) continue;
      double* gw = &g[layout_.hidden_w + j * in_dim];
      const double* w = &params_[layout_.hidden_w + j * in_dim];
      for (std::size_t k = 0; k < in_dim; ++k) {
        gw[k] += d * act.input[k];
        dinput[k] += d * w[k];
      }
      g[layout_.hidden_b + j] += d;
    }

    const double inv_m = 1.0 / static_cast<double>(concepts.size());
    for (TokenId c : concepts) {
      double* gc = &g[layout_.concept_emb + c * e];
      for (std::size_t j = 0; j < e; ++j) gc[j] += dinput[j] * inv_m;
    }
    for (std::size_t i = 0; i < cfg_.window; ++i) {
      double* gt = &g[layout_.token_emb + act.context[i] * e];
      const double* d = &dinput[e * (1 + i)];
      for (std::size_t j = 0; j < e; ++j) gt[j] += d[j];
    }
  }
  return lp;
}

ParamVector TrainableGenerator::grad_log_prob(std::span<const TokenId> concepts,
                                              const TokenSequence& seq) const {
  ParamVector grad = zero_grad();
  accumulate_grad(concepts, seq, 1.0, grad);
  return grad;
}

void TrainableGenerator::apply(const ParamVector& delta, double scale) {
  if (delta.size() != params_.size()) throw std::invalid_argument("update size mismatch");
  for (std::size_t i = 0; i < params_.size(); ++i) params_[i] += scale * delta[i];
}

bool TrainableGenerator::all_finite() const {
  return std::all_of(params_.begin(), params_.end(), [](double v) { return std::isfinite(v); });
}

void TrainableGenerator::save(const std::string& path, std::uint64_t vocab_hash) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path);
  out << "guidedgen-generator 1\n";
  out << "vocab_size " << cfg_.vocab_size << '\n';
  out << "vocab_hash " << vocab_hash << '\n';
  out << "embed_dim " << cfg_.embed_dim << '\n';
  out << "hidden_dim " << cfg_.hidden_dim << '\n';
  out << "window " << cfg_.window << '\n';
  out << "params " << params_.size() << '\n';
  for (double p : params_) out << textio::hex(p) << '\n';
  if (!out) throw DataError("failed writing checkpoint " + path);
}

TrainableGenerator TrainableGenerator::load(const std::string& path, std::uint64_t expected_vocab_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  textio::expect_header(in, "guidedgen-generator", 1);
  GeneratorConfig cfg;
  cfg.vocab_size = textio::expect_count(in, "vocab_size");
  if (textio::expect_u64(in, "vocab_hash") != expected_vocab_hash) {
    throw DataError("checkpoint " + path + " was trained with a different vocabulary");
  }
  cfg.embed_dim = textio::expect_count(in, "embed_dim");
  cfg.hidden_dim = textio::expect_count(in, "hidden_dim");
  cfg.window = textio::expect_count(in, "window");
  const std::size_t n = textio::expect_count(in, "params");
  std::vector<double> params(n);
  for (double& p : params) p = textio::read_hex(in);
  return TrainableGenerator(cfg, std::move(params));
}

}  // namespace guidedgen
