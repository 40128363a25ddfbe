#include "guidedgen/synth.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "guidedgen/error.hpp"
#include "guidedgen/lemmatize.hpp"

namespace guidedgen {

namespace {

using json = nlohmann::ordered_json;

// Plain modulo and shift arithmetic keep the corpus identical across standard libraries.
std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }
bool chance(std::mt19937_64& rng, double p) { return static_cast<double>(rng() >> 11) * 0x1.0p-53 < p; }

template <class T>
const T& pick_from(std::mt19937_64& rng, const std::vector<T>& v) {
  return v[pick(rng, v.size())];
}

const std::set<std::string> kSlots = {"DET", "ADJ", "AGENT", "VERB_S", "VERB_ING", "OBJECT", "RECIPIENT", "PLACE"};

std::vector<std::string> split_words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

bool has_slot(const std::string& tmpl, const std::string& slot) {
  const auto words = split_words(tmpl);
  return std::find(words.begin(), words.end(), slot) != words.end();
}

void grammar_error(const std::string& what) { throw DataError("grammar invalid: " + what); }

}  // namespace

void Grammar::validate() const {
  if (determiners.empty()) grammar_error("no determiners");
  if (verbs.empty()) grammar_error("no verbs");
  if (templates.empty()) grammar_error("no templates");
  if (!(swap_rate >= 0.0 && swap_rate <= 1.0)) grammar_error("swap_rate outside [0, 1]");

  auto check_word = [](const std::string& w) {
    const auto t = tokenize(w);
    if (t.size() != 1 || t[0] != w) grammar_error("'" + w + "' is not a single lowercase word");
  };

  std::set<std::string> concept_words;
  for (const auto& v : verbs) {
    if (v.agents.empty() || v.objects.empty()) grammar_error("verb '" + v.base + "' needs agents and objects");
    for (const auto* w : {&v.base, &v.s_form, &v.ing_form}) check_word(*w);
    if (lemmatize(v.base) != v.base) grammar_error("verb '" + v.base + "' is not its own lemma");
    if (lemmatize(v.s_form) != v.base) grammar_error("'" + v.s_form + "' does not lemmatize to '" + v.base + "'");
    if (lemmatize(v.ing_form) != v.base) grammar_error("'" + v.ing_form + "' does not lemmatize to '" + v.base + "'");
    concept_words.insert(v.base);
    for (const auto* list : {&v.agents, &v.objects, &v.recipients, &v.places}) {
      for (const auto& w : *list) {
        check_word(w);
        if (lemmatize(w) != w) grammar_error("'" + w + "' is not its own lemma");
        concept_words.insert(w);
      }
    }
  }

  for (const auto& t : templates) {
    std::map<std::string, int> n;
    for (const auto& w : split_words(t)) {
      if (std::all_of(w.begin(), w.end(), [](char c) { return (c >= 'A' && c <= 'Z') || c == '_'; })) {
        if (!kSlots.contains(w)) grammar_error("unknown slot '" + w + "' in template '" + t + "'");
        ++n[w];
      } else {
        check_word(w);
        if (concept_words.contains(lemmatize(w))) grammar_error("literal '" + w + "' matches a concept lemma");
      }
    }
    if (n["AGENT"] != 1 || n["OBJECT"] != 1 || n["VERB_S"] + n["VERB_ING"] != 1 || n["RECIPIENT"] > 1 ||
        n["PLACE"] > 1) {
      grammar_error("template '" + t + "' needs one AGENT, one verb, one OBJECT");
    }
    if (n["ADJ"] > 0 && adjectives.empty()) grammar_error("template uses ADJ but there are no adjectives");
  }
  for (const auto* list : {&determiners, &adjectives}) {
    for (const auto& w : *list) {
      check_word(w);
      if (concept_words.contains(lemmatize(w))) grammar_error("'" + w + "' matches a concept lemma");
    }
  }
}

std::string Grammar::to_json() const {
  json j;
  j["determiners"] = determiners;
  j["adjectives"] = adjectives;
  j["templates"] = templates;
  j["swap_rate"] = swap_rate;
  j["verbs"] = json::array();
  for (const auto& v : verbs) {
    j["verbs"].push_back({{"base", v.base},
                          {"s", v.s_form},
                          {"ing", v.ing_form},
                          {"agents", v.agents},
                          {"objects", v.objects},
                          {"recipients", v.recipients},
                          {"places", v.places}});
  }
  j["sensible_orders"] = json::array();
  for (const auto& [verb, subj] : sensible_orders) j["sensible_orders"].push_back({verb, subj});
  return j.dump(2) + "\n";
}

Grammar Grammar::from_json(const std::string& text) {
  Grammar g;
  try {
    const json j = json::parse(text);
    g.determiners = j.at("determiners").get<std::vector<std::string>>();
    g.adjectives = j.value("adjectives", std::vector<std::string>{});
    g.templates = j.at("templates").get<std::vector<std::string>>();
    g.swap_rate = j.value("swap_rate", 0.3);
    for (const auto& v : j.at("verbs")) {
      VerbEntry e;
      e.base = v.at("base").get<std::string>();
      e.s_form = v.at("s").get<std::string>();
      e.ing_form = v.at("ing").get<std::string>();
      e.agents = v.at("agents").get<std::vector<std::string>>();
      e.objects = v.at("objects").get<std::vector<std::string>>();
      e.recipients = v.value("recipients", std::vector<std::string>{});
      e.places = v.value("places", std::vector<std::string>{});
      g.verbs.push_back(std::move(e));
    }
    if (j.contains("sensible_orders")) {
      for (const auto& p : j.at("sensible_orders")) {
        g.sensible_orders.emplace(p.at(0).get<std::string>(), p.at(1).get<std::string>());
      }
    } else {
      for (const auto& v : g.verbs)
        for (const auto& a : v.agents) g.sensible_orders.emplace(v.base, a);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("grammar file: ") + e.what());
  }
  g.validate();
  return g;
}

void Grammar::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << to_json();
}

Grammar Grammar::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open grammar " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::vector<std::string> Grammar::surface_words() const {
  std::set<std::string> words(determiners.begin(), determiners.end());
  words.insert(adjectives.begin(), adjectives.end());
  for (const auto& v : verbs) {
    words.insert({v.s_form, v.ing_form});
    for (const auto* list : {&v.agents, &v.objects, &v.recipients, &v.places}) words.insert(list->begin(), list->end());
  }
  for (const auto& t : templates)
    for (const auto& w : split_words(t))
      if (!kSlots.contains(w)) words.insert(w);
  return {words.begin(), words.end()};
}

std::optional<std::pair<std::string, std::string>> Grammar::verb_subject(
    const std::vector<std::string>& tokens) const {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    for (const auto& v : verbs) {
      if (tokens[i] != v.s_form && tokens[i] != v.ing_form) continue;
      for (std::size_t j = i; j-- > 0;) {
        const auto& t = tokens[j];
        if (std::find(v.agents.begin(), v.agents.end(), t) != v.agents.end() ||
            std::find(v.recipients.begin(), v.recipients.end(), t) != v.recipients.end()) {
          return std::make_pair(v.base, t);
        }
      }
      return std::nullopt;
    }
  }
  return std::nullopt;
}

bool Grammar::is_sensible(const std::vector<std::string>& tokens) const {
  const auto vs = verb_subject(tokens);
  return vs && sensible_orders.contains(*vs);
}

Grammar default_grammar() {
  Grammar g;
  g.determiners = {"a", "the"};
  g.adjectives = {"young", "old", "tall", "happy", "busy", "friendly", "quiet", "strong", "clever", "local"};
  g.templates = {
      "DET AGENT VERB_S DET OBJECT",
      "DET ADJ AGENT VERB_S DET OBJECT",
      "DET AGENT is VERB_ING DET OBJECT",
      "DET AGENT VERB_S DET ADJ OBJECT",
      "DET AGENT VERB_S DET OBJECT in DET PLACE",
      "in DET PLACE DET AGENT VERB_S DET OBJECT",
      "DET AGENT is VERB_ING DET OBJECT in DET PLACE",
      "DET AGENT VERB_S DET OBJECT to DET RECIPIENT",
      "DET ADJ AGENT is VERB_ING DET OBJECT to DET RECIPIENT",
      "DET AGENT VERB_S DET OBJECT to DET RECIPIENT in DET PLACE",
      "in DET PLACE DET AGENT VERB_S DET OBJECT to DET RECIPIENT",
      "DET ADJ AGENT is VERB_ING DET OBJECT to DET RECIPIENT in DET PLACE",
  };
  g.verbs = {
      {"throw", "throws", "throwing", {"pitcher", "quarterback", "coach"}, {"ball", "frisbee", "stone", "bottle"},
       {"batter", "referee", "fan"}, {"field", "stadium", "park"}},
      {"serve", "serves", "serving", {"waiter", "chef", "bartender"}, {"soup", "coffee", "meal", "dessert"},
       {"customer", "guest", "tourist"}, {"restaurant", "cafe", "hotel"}},
      {"teach", "teaches", "teaching", {"teacher", "professor", "tutor"}, {"lesson", "song", "rule", "trick"},
       {"student", "child", "pupil"}, {"school", "classroom", "library"}},
      {"hand", "hands", "handing", {"nurse", "doctor", "pharmacist"}, {"pill", "bandage", "towel", "note"},
       {"patient", "visitor", "baby"}, {"hospital", "clinic", "ward"}},
      {"sell", "sells", "selling", {"farmer", "vendor", "merchant"}, {"apple", "bread", "cheese", "melon"},
       {"customer", "tourist", "neighbor"}, {"market", "shop", "village"}},
      {"deliver", "delivers", "delivering", {"mailman", "courier", "driver"}, {"letter", "package", "parcel", "card"},
       {"neighbor", "clerk", "manager"}, {"office", "city", "street"}},
      {"read", "reads", "reading", {"parent", "librarian", "grandmother"}, {"book", "story", "poem", "newspaper"},
       {"child", "baby", "student"}, {"bedroom", "library", "garden"}},
      {"pass", "passes", "passing", {"player", "captain", "striker"}, {"ball", "puck", "baton", "towel"},
       {"goalkeeper", "referee", "fan"}, {"field", "stadium", "arena"}},
      {"bake", "bakes", "baking", {"baker", "chef", "grandmother"}, {"bread", "cake", "pie", "cookie"},
       {}, {"kitchen", "bakery", "house"}},
      {"fix", "fixes", "fixing", {"mechanic", "plumber", "engineer"}, {"car", "engine", "pipe", "sink"},
       {}, {"garage", "house", "factory"}},
      {"play", "plays", "playing", {"musician", "pianist", "guitarist"}, {"piano", "guitar", "violin", "drum"},
       {}, {"stage", "studio", "club"}},
      {"paint", "paints", "painting", {"artist", "painter", "decorator"}, {"picture", "wall", "fence", "portrait"},
       {}, {"studio", "house", "garden"}},
      {"plant", "plants", "planting", {"gardener", "farmer", "volunteer"}, {"tree", "flower", "seed", "bush"},
       {}, {"garden", "field", "yard"}},
      {"catch", "catches", "catching", {"fisherman", "angler", "boy"}, {"fish", "trout", "salmon", "crab"},
       {}, {"lake", "river", "harbor"}},
      {"drive", "drives", "driving", {"driver", "chauffeur", "trucker"}, {"bus", "truck", "van", "taxi"},
       {}, {"city", "street", "highway"}},
      {"wash", "washes", "washing", {"janitor", "cleaner", "maid"}, {"floor", "window", "dish", "car"},
       {}, {"kitchen", "hotel", "office"}},
  };
  for (const auto& v : g.verbs)
    for (const auto& a : v.agents) g.sensible_orders.emplace(v.base, a);
  return g;
}

ConceptSet Scene::concepts(const Grammar& g) const {
  std::vector<std::string> c = {agent, g.verbs.at(verb).base, object};
  if (recipient) c.push_back(*recipient);
  if (place) c.push_back(*place);
  return ConceptSet(std::move(c));
}

std::vector<std::size_t> compatible_templates(const Grammar& g, const Scene& scene) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < g.templates.size(); ++i) {
    if (has_slot(g.templates[i], "RECIPIENT") == scene.recipient.has_value() &&
        has_slot(g.templates[i], "PLACE") == scene.place.has_value()) {
      out.push_back(i);
    }
  }
  return out;
}

std::vector<std::string> realize(const Grammar& g, const Scene& scene, std::size_t template_index,
                                 std::mt19937_64& rng, bool swapped) {
  const VerbEntry& v = g.verbs.at(scene.verb);
  if (swapped && !scene.recipient) throw std::invalid_argument("swap needs a recipient");
  const std::string& subject = swapped ? *scene.recipient : scene.agent;
  const std::string& recipient = swapped ? scene.agent : scene.recipient.value_or("");
  std::vector<std::string> out;
  for (const auto& w : split_words(g.templates.at(template_index))) {
    if (w == "DET") out.push_back(pick_from(rng, g.determiners));
    else if (w == "ADJ") out.push_back(pick_from(rng, g.adjectives));
    else if (w == "AGENT") out.push_back(subject);
    else if (w == "VERB_S") out.push_back(v.s_form);
    else if (w == "VERB_ING") out.push_back(v.ing_form);
    else if (w == "OBJECT") out.push_back(scene.object);
    else if (w == "RECIPIENT") out.push_back(recipient);
    else if (w == "PLACE") out.push_back(scene.place.value());
    else out.push_back(w);
  }
  return out;
}

void CorpusShape::validate() const {
  if (min_concepts < 3 || max_concepts > 5 || min_concepts > max_concepts)
    throw UsageError("concepts per record must satisfy 3 <= min <= max <= 5");
  if (min_refs < 1 || min_refs > max_refs) throw UsageError("references per record must satisfy 1 <= min <= max");
}

namespace {

std::optional<Scene> draw_scene(const Grammar& g, const CorpusShape& shape, std::mt19937_64& rng) {
  const std::size_t size = shape.min_concepts + pick(rng, shape.max_concepts - shape.min_concepts + 1);
  std::vector<std::size_t> verbs;
  for (std::size_t i = 0; i < g.verbs.size(); ++i) {
    const auto& v = g.verbs[i];
    const std::size_t optional_roles = (v.recipients.empty() ? 0 : 1) + (v.places.empty() ? 0 : 1);
    if (3 + optional_roles >= size) verbs.push_back(i);
  }
  if (verbs.empty()) return std::nullopt;
  Scene s;
  s.verb = pick_from(rng, verbs);
  const auto& v = g.verbs[s.verb];
  s.agent = pick_from(rng, v.agents);
  s.object = pick_from(rng, v.objects);
  bool want_r = false, want_p = false;
  if (size == 5) {
    want_r = want_p = true;
  } else if (size == 4) {
    if (v.recipients.empty()) want_p = true;
    else if (v.places.empty()) want_r = true;
    else (chance(rng, 0.5) ? want_r : want_p) = true;
  }
  if (want_r) s.recipient = pick_from(rng, v.recipients);
  if (want_p) s.place = pick_from(rng, v.places);
  return s;
}

bool distinct_concepts(const Grammar& g, const Scene& s) {
  std::vector<std::string> c = {s.agent, g.verbs[s.verb].base, s.object};
  if (s.recipient) c.push_back(*s.recipient);
  if (s.place) c.push_back(*s.place);
  std::sort(c.begin(), c.end());
  return std::adjacent_find(c.begin(), c.end()) == c.end();
}

DatasetRecord build_record(const Grammar& g, const Scene& scene, const std::vector<std::size_t>& tmpls,
                           const CorpusShape& shape, std::mt19937_64& rng) {
  std::vector<std::string> words = scene.concepts(g).words();
  for (std::size_t i = words.size(); i > 1; --i) std::swap(words[i - 1], words[pick(rng, i)]);
  DatasetRecord rec{ConceptSet(std::move(words)), {}};
  const std::size_t n_refs = shape.min_refs + pick(rng, shape.max_refs - shape.min_refs + 1);
  for (std::size_t r = 0; r < n_refs; ++r) {
    std::vector<std::string> ref;
    for (int attempt = 0; attempt < 10; ++attempt) {
      const std::size_t t = pick_from(rng, tmpls);
      const bool swapped = scene.recipient && chance(rng, g.swap_rate);
      ref = realize(g, scene, t, rng, swapped);
      if (std::find(rec.refs.begin(), rec.refs.end(), ref) == rec.refs.end()) break;
    }
    rec.refs.push_back(std::move(ref));
  }
  return rec;
}

constexpr int kMaxFailures = 1000;

}  // namespace

Splits generate_splits(const Grammar& g, std::size_t n_train, std::size_t n_dev, std::size_t n_test,
                       std::uint64_t seed, const CorpusShape& shape) {
  if (n_train < 1) throw UsageError("n_records must be ≥ 1");
  g.validate();
  shape.validate();
  std::mt19937_64 rng(seed);
  std::map<std::string, int> owner;
  Splits out;
  std::vector<DatasetRecord>* parts[3] = {&out.train, &out.dev, &out.test};
  const std::size_t counts[3] = {n_train, n_dev, n_test};
  for (int split = 0; split < 3; ++split) {
    for (std::size_t i = 0; i < counts[split]; ++i) {
      int failures = 0;
      for (;;) {
        auto scene = draw_scene(g, shape, rng);
        std::vector<std::size_t> tmpls;
        bool ok = scene && distinct_concepts(g, *scene);
        if (ok) {
          tmpls = compatible_templates(g, *scene);
          auto it = owner.find(scene->concepts(g).key());
          ok = !tmpls.empty() && (it == owner.end() || it->second == split);
        }
        if (ok) {
          owner.emplace(scene->concepts(g).key(), split);
          parts[split]->push_back(build_record(g, *scene, tmpls, shape, rng));
          break;
        }
        if (++failures >= kMaxFailures) {
          throw DataError("grammar could not realize a new concept combination after 1000 attempts");
        }
      }
    }
  }
  return out;
}

std::vector<DatasetRecord> generate_corpus(const Grammar& g, std::size_t n_records, std::uint64_t seed,
                                           const CorpusShape& shape) {
  return generate_splits(g, n_records, 0, 0, seed, shape).train;
}

std::vector<std::vector<std::string>> sensible_sentences(const Grammar& g, const std::vector<DatasetRecord>& corpus) {
  std::vector<std::vector<std::string>> out;
  for (const auto& rec : corpus)
    for (const auto& ref : rec.refs)
      if (g.is_sensible(ref)) out.push_back(ref);
  if (out.empty()) throw DataError("sensible sub-corpus empty");
  return out;
}

std::vector<TokenSequence> sensible_subcorpus(const Grammar& g, const std::vector<DatasetRecord>& corpus,
                                              const Vocab& vocab) {
  std::vector<TokenSequence> out;
  for (const auto& s : sensible_sentences(g, corpus)) out.push_back(TokenSequence::closed(vocab.encode(s)));
  return out;
}

std::vector<SwapPair> swap_pairs(const Grammar& g, std::size_t count, std::uint64_t seed,
                                 const std::set<std::string>& exclude_keys) {
  g.validate();
  std::vector<std::size_t> verbs;
  for (std::size_t i = 0; i < g.verbs.size(); ++i)
    if (!g.verbs[i].recipients.empty()) verbs.push_back(i);
  if (verbs.empty()) throw DataError("grammar has no verb with recipients");
  std::mt19937_64 rng(seed);
  std::vector<SwapPair> out;
  int failures = 0;
  while (out.size() < count) {
    Scene s;
    s.verb = pick_from(rng, verbs);
    const auto& v = g.verbs[s.verb];
    s.agent = pick_from(rng, v.agents);
    s.object = pick_from(rng, v.objects);
    s.recipient = pick_from(rng, v.recipients);
    if (!v.places.empty() && chance(rng, 0.5)) s.place = pick_from(rng, v.places);
    const auto tmpls = compatible_templates(g, s);
    if (!distinct_concepts(g, s) || tmpls.empty() || exclude_keys.contains(s.concepts(g).key())) {
      if (++failures >= kMaxFailures) throw DataError("could not draw held-out swap pairs after 1000 attempts");
      continue;
    }
    failures = 0;
    const std::size_t t = pick_from(rng, tmpls);
    std::mt19937_64 twin = rng;
    SwapPair p{s.concepts(g), realize(g, s, t, rng, false), realize(g, s, t, twin, true)};
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace guidedgen
