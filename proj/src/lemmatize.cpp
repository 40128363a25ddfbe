#include "guidedgen/lemmatize.hpp"

#include <string>
#include <unordered_map>
#include <unordered_set>

namespace guidedgen {

namespace {

const std::unordered_map<std::string_view, std::string_view>& irregular_forms() {
  static const std::unordered_map<std::string_view, std::string_view> table = {
      {"am", "be"},         {"is", "be"},         {"are", "be"},       {"was", "be"},
      {"were", "be"},       {"been", "be"},       {"being", "be"},     {"has", "have"},
      {"had", "have"},      {"does", "do"},       {"did", "do"},       {"done", "do"},
      {"ran", "run"},       {"sat", "sit"},       {"stood", "stand"},  {"threw", "throw"},
      {"thrown", "throw"},  {"caught", "catch"},  {"took", "take"},    {"taken", "take"},
      {"went", "go"},       {"gone", "go"},       {"goes", "go"},      {"saw", "see"},
      {"seen", "see"},      {"made", "make"},     {"ate", "eat"},      {"eaten", "eat"},
      {"rode", "ride"},     {"ridden", "ride"},   {"wrote", "write"},  {"written", "write"},
      {"held", "hold"},     {"led", "lead"},      {"fed", "feed"},     {"bought", "buy"},
      {"brought", "bring"}, {"kept", "keep"},     {"left", "leave"},   {"felt", "feel"},
      {"met", "meet"},      {"told", "tell"},     {"thought", "think"}, {"sang", "sing"},
      {"sung", "sing"},     {"swam", "swim"},     {"drove", "drive"},  {"driven", "drive"},
      {"gave", "give"},     {"given", "give"},    {"got", "get"},      {"began", "begin"},
      {"hit", "hit"},       {"cut", "cut"},       {"put", "put"},      {"children", "child"},
      {"men", "man"},       {"women", "woman"},   {"people", "person"}, {"feet", "foot"},
      {"teeth", "tooth"},   {"mice", "mouse"},    {"geese", "goose"},  {"knives", "knife"},
      {"leaves", "leaf"},   {"wolves", "wolf"},   {"lives", "life"},   {"wives", "wife"},
  };
  return table;
}

// Words the suffix rules would otherwise damage.
const std::unordered_set<std::string_view>& known_lemmas() {
  static const std::unordered_set<std::string_view> words = {
      "bed",    "red",     "need",   "seed",    "speed",  "feed",    "shed",    "sled",
      "bread",  "head",    "thread", "hundred", "bring",  "king",    "ring",    "sing",
      "spring", "string",  "swing",  "thing",   "wing",   "sting",   "morning", "evening",
      "ceiling", "wedding", "bus",    "gas",     "yes",    "this",    "his",     "was",
      "news",   "lens",    "series", "species", "always", "perhaps", "across",  "towards",
      "during", "nothing", "something", "anything", "everything",
      "glass",  "grass",   "dress",  "class",   "boss",   "chess",   "lunch",   "bench",
  };
  return words;
}

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

bool has_vowel(std::string_view s) {
  for (char c : s) {
    if (is_vowel(c) || c == 'y') return true;
  }
  return false;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

int vowel_groups(std::string_view s) {
  int groups = 0;
  bool in_group = false;
  for (char c : s) {
    const bool v = is_vowel(c);
    if (v && !in_group) ++groups;
    in_group = v;
  }
  return groups;
}

// Rebuild the base form after stripping -ing or -ed.
std::string restore_stem(std::string stem) {
  const std::size_t n = stem.size();
  if (n >= 3 && stem[n - 1] == stem[n - 2] && !is_vowel(stem[n - 1])) {
    const char c = stem[n - 1];
    // "passing", "rolling", "buzzing", "stuffing" keep the double letter.
    if (c != 's' && c != 'l' && c != 'z' && c != 'f') stem.pop_back();
    return stem;
  }
  if (n >= 2) {
    const char last = stem[n - 1];
    const char prev = stem[n - 2];
    // "dancing", "charging", "solving": consonant + c/g/v takes an e.
    if ((last == 'c' || last == 'v' || (last == 'g' && prev != 'n')) && !is_vowel(prev)) {
      return stem + 'e';
    }
    if (last == 'v' || (last == 'c' && is_vowel(prev) && prev != 'i')) return stem + 'e';
  }
  // Single-syllable consonant-vowel-consonant stems: "smil" -> "smile".
  if (n >= 3) {
    const char c3 = stem[n - 1], v = stem[n - 2], c1 = stem[n - 3];
    if (!is_vowel(c3) && c3 != 'w' && c3 != 'x' && c3 != 'y' && is_vowel(v) && !is_vowel(c1) &&
        vowel_groups(stem) == 1) {
      return stem + 'e';
    }
  }
  return stem;
}

std::string lemmatize_once(std::string_view w) {
  if (auto it = irregular_forms().find(w); it != irregular_forms().end()) {
    return std::string(it->second);
  }
  if (known_lemmas().contains(w)) return std::string(w);
  const std::size_t n = w.size();

  if (ends_with(w, "ies") && n > 4) return std::string(w.substr(0, n - 3)) + 'y';
  if ((ends_with(w, "sses") || ends_with(w, "shes") || ends_with(w, "ches") || ends_with(w, "xes") ||
       ends_with(w, "zzes")) &&
      n > 4) {
    return std::string(w.substr(0, n - 2));
  }
  if (ends_with(w, "s") && !ends_with(w, "ss") && !ends_with(w, "us") && !ends_with(w, "is") &&
      n > 3) {
    return std::string(w.substr(0, n - 1));
  }
  if (ends_with(w, "ing") && n >= 5) {
    std::string_view stem = w.substr(0, n - 3);
    if (has_vowel(stem) && stem.size() >= 2) return restore_stem(std::string(stem));
  }
  if (ends_with(w, "ed") && !ends_with(w, "eed") && n > 4) {
    std::string_view stem = w.substr(0, n - 2);
    if (has_vowel(stem) && stem.size() >= 3) {
      if (ends_with(w, "ied")) return std::string(w.substr(0, n - 3)) + 'y';
      return restore_stem(std::string(stem));
    }
  }
  return std::string(w);
}

}  // namespace

std::string lemmatize(std::string_view word) {
  std::string cur(word);
  // Every rule shortens the word or maps it to a fixed point, so this terminates.
  for (int i = 0; i < 16; ++i) {
    std::string next = lemmatize_once(cur);
    if (next == cur) break;
    cur = std::move(next);
  }
  return cur;
}

}  // namespace guidedgen
