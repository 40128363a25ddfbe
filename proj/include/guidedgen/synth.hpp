#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "guidedgen/core.hpp"

namespace guidedgen {

struct VerbEntry {
  std::string base;  // concept word
  std::string s_form;
  std::string ing_form;
  std::vector<std::string> agents;
  std::vector<std::string> objects;
  std::vector<std::string> recipients;  // optional "to DET R" phrase
  std::vector<std::string> places;      // optional "in DET P" phrase
};

// Templates are whitespace-separated patterns. Slots: DET ADJ AGENT VERB_S
// VERB_ING OBJECT RECIPIENT PLACE. Other upper-case words are rejected as
// unknown slots; lower-case words are literals.
struct Grammar {
  std::vector<std::string> determiners;
  std::vector<std::string> adjectives;
  std::vector<VerbEntry> verbs;
  std::vector<std::string> templates;
  // (verb base, subject) pairs that read as commonsense.
  std::set<std::pair<std::string, std::string>> sensible_orders;
  // Per reference, chance that agent and recipient trade places.
  double swap_rate = 0.3;

  // Throws DataError if a slot is unknown, an inflection does not lemmatize to
  // its verb, or a concept word is not its own lemma.
  void validate() const;

  std::string to_json() const;
  static Grammar from_json(const std::string& text);
  void save(const std::string& path) const;
  static Grammar load(const std::string& path);

  // Every surface word a template can produce, sorted.
  std::vector<std::string> surface_words() const;

  // (verb base, subject) of a realized sentence: the verb is the first verb
  // form, the subject the nearest person noun before it.
  std::optional<std::pair<std::string, std::string>> verb_subject(const std::vector<std::string>& tokens) const;
  bool is_sensible(const std::vector<std::string>& tokens) const;
};

// About 200 surface words and 12 templates. Each verb's agents form its sensible
// subjects; its recipients are people for whom the verb is not sensible.
Grammar default_grammar();

struct Scene {
  std::size_t verb = 0;
  std::string agent;
  std::string object;
  std::optional<std::string> recipient;
  std::optional<std::string> place;

  ConceptSet concepts(const Grammar& g) const;
};

// Templates whose optional slots match exactly the roles present in `scene`.
std::vector<std::size_t> compatible_templates(const Grammar& g, const Scene& scene);

// Fills a template. With `swapped`, the recipient becomes the subject.
std::vector<std::string> realize(const Grammar& g, const Scene& scene, std::size_t template_index,
                                 std::mt19937_64& rng, bool swapped = false);

struct CorpusShape {
  std::size_t min_concepts = 3;
  std::size_t max_concepts = 5;
  std::size_t min_refs = 2;
  std::size_t max_refs = 5;

  void validate() const;
};

std::vector<DatasetRecord> generate_corpus(const Grammar& g, std::size_t n_records, std::uint64_t seed,
                                           const CorpusShape& shape = {});

struct Splits {
  std::vector<DatasetRecord> train;
  std::vector<DatasetRecord> dev;
  std::vector<DatasetRecord> test;
};

// No concept set appears in more than one split. Repeats within a split are allowed.
Splits generate_splits(const Grammar& g, std::size_t n_train, std::size_t n_dev, std::size_t n_test,
                       std::uint64_t seed, const CorpusShape& shape = {});

// References whose (verb, subject) pair is sensible. Throws DataError if none.
std::vector<std::vector<std::string>> sensible_sentences(const Grammar& g, const std::vector<DatasetRecord>& corpus);
std::vector<TokenSequence> sensible_subcorpus(const Grammar& g, const std::vector<DatasetRecord>& corpus,
                                              const Vocab& vocab);

struct SwapPair {
  ConceptSet concepts;
  std::vector<std::string> sensible;
  std::vector<std::string> swapped;
};

// Sentence pairs that differ only by the agent/recipient swap, drawn from
// scenes whose concept key is not in `exclude_keys`.
std::vector<SwapPair> swap_pairs(const Grammar& g, std::size_t count, std::uint64_t seed,
                                 const std::set<std::string>& exclude_keys = {});

}  // namespace guidedgen
