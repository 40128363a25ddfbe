#include "guidedgen/eval.hpp"

#include <cstdio>
#include <stdexcept>

#include <json.hpp>

#include "guidedgen/error.hpp"
#include "guidedgen/lemmatize.hpp"
#include "guidedgen/rewards.hpp"

namespace guidedgen {

std::vector<std::string> concept_order(const ConceptSet& concepts, std::span<const std::string> tokens) {
  std::vector<std::string> lemmas;
  for (const auto& c : concepts) lemmas.push_back(lemmatize(c));
  std::vector<bool> seen(lemmas.size(), false);
  std::vector<std::string> order;
  for (const auto& t : tokens) {
    const std::string l = lemmatize(t);
    for (std::size_t i = 0; i < lemmas.size(); ++i) {
      if (!seen[i] && lemmas[i] == l) {
        seen[i] = true;
        order.push_back(l);
      }
    }
  }
  return order;
}

std::size_t concept_order_distance(std::span<const std::string> reference, std::span<const std::string> generated,
                                   const ConceptSet& concepts) {
  const auto a = concept_order(concepts, reference);
  const auto b = concept_order(concepts, generated);
  return levenshtein(std::span<const std::string>(a), std::span<const std::string>(b));
}

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string EvalReport::to_text() const {
  std::string s;
  s += "count = " + std::to_string(count) + "\n";
  s += "bleu3 = " + fixed(100.0 * bleu3, 2) + "\n";
  s += "bleu4 = " + fixed(100.0 * bleu4, 2) + "\n";
  s += "rouge2 = " + fixed(100.0 * rouge2, 2) + "\n";
  s += "rougeL = " + fixed(100.0 * rougeL, 2) + "\n";
  s += "cov = " + fixed(cov, 2) + "\n";
  s += "ppl = " + fixed(ppl, 2) + "\n";
  s += "len = " + fixed(len, 2) + "\n";
  s += "order_edit_distance = " + fixed(order_edit_distance, 4) + "\n";
  return s;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["count"] = count;
  j["bleu3"] = bleu3;
  j["bleu4"] = bleu4;
  j["rouge2"] = rouge2;
  j["rougeL"] = rougeL;
  j["cov"] = cov;
  j["ppl"] = ppl;
  j["len"] = len;
  j["order_edit_distance"] = order_edit_distance;
  return j.dump();
}

EvalReport corpus_metrics(std::span<const EvalItem> items, const LanguageScorer& scorer, const Vocab& vocab) {
  if (items.empty()) throw DataError("no outputs to evaluate");
  EvalReport rep;
  rep.count = items.size();
  std::vector<std::vector<std::string>> cands;
  std::vector<std::vector<std::vector<std::string>>> refs;
  double cov = 0.0, ppl = 0.0, len = 0.0, r2 = 0.0, rl = 0.0, order = 0.0;
  std::size_t with_refs = 0, order_n = 0;
  for (const auto& it : items) {
    if (!it.concepts) throw std::invalid_argument("evaluation item without concepts");
    cov += coverage(*it.concepts, it.output);
    ppl += scorer_perplexity(scorer, TokenSequence::closed(vocab.encode(it.output)));
    len += static_cast<double>(it.output.size());
    cands.push_back(it.output);
    refs.push_back(it.refs);
    if (!it.refs.empty()) {
      ++with_refs;
      r2 += rouge2(it.output, it.refs);
      rl += rougeL(it.output, it.refs);
      for (const auto& r : it.refs) {
        order += static_cast<double>(concept_order_distance(r, it.output, *it.concepts));
        ++order_n;
      }
    }
  }
  const double n = static_cast<double>(items.size());
  rep.cov = 100.0 * (cov / n);
  rep.ppl = ppl / n;
  rep.len = len / n;
  if (with_refs) {
    rep.bleu3 = corpus_bleu(cands, refs, 3);
    rep.bleu4 = corpus_bleu(cands, refs, 4);
    rep.rouge2 = r2 / static_cast<double>(with_refs);
    rep.rougeL = rl / static_cast<double>(with_refs);
    rep.order_edit_distance = order / static_cast<double>(order_n);
  }
  return rep;
}

}  // namespace guidedgen
