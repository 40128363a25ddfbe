#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <set>

#include "guidedgen/core.hpp"
#include "guidedgen/dataset.hpp"
#include "guidedgen/error.hpp"
#include "guidedgen/synth.hpp"
#include "test_util.hpp"

using namespace guidedgen;

TEST_CASE("tokenize lowercases and splits on whitespace") {
  CHECK(tokenize("  The Kid\tloves\n dance ") == std::vector<std::string>{"the", "kid", "loves", "dance"});
  CHECK(tokenize("").empty());
  const std::vector<std::string> t = {"a", "b"};
  CHECK(join_tokens(t) == "a b");
}

TEST_CASE("build_vocab orders by frequency then lexicographically") {
  const std::vector<std::vector<std::string>> corpus = {{"a", "b"}, {"a"}};
  const Vocab v = build_vocab(corpus, 1);
  REQUIRE(v.size() == 5);
  CHECK(v.token(kBos) == "<bos>");
  CHECK(v.token(kEos) == "<eos>");
  CHECK(v.token(kPad) == "<pad>");
  CHECK(*v.find("a") == 3);
  CHECK(*v.find("b") == 4);

  const Vocab v2 = build_vocab(corpus, 2);
  CHECK(v2.size() == 4);
  CHECK(v2.contains("a"));
  CHECK_FALSE(v2.contains("b"));

  const Vocab ties = build_vocab({{"z", "y", "x"}}, 1);
  CHECK(ties.tokens() == std::vector<std::string>{"<bos>", "<eos>", "<pad>", "x", "y", "z"});
}

TEST_CASE("build_vocab errors") {
  CHECK_THROWS_WITH_AS(build_vocab({}, 1), "empty corpus", DataError);
  CHECK_THROWS_AS(build_vocab({{"a"}}, 2), DataError);  // nothing survives the threshold
  CHECK_THROWS_AS(build_vocab({{"<eos>"}}, 1), DataError);
}

TEST_CASE("vocab round-trips over a 1000-sentence synthetic corpus") {
  const auto records = generate_corpus(default_grammar(), 400, 3);
  std::vector<std::vector<std::string>> corpus;
  for (const auto& r : records)
    for (const auto& ref : r.refs)
      if (corpus.size() < 1000) corpus.push_back(ref);
  REQUIRE(corpus.size() == 1000);
  const Vocab v = build_vocab(corpus, 1);
  std::set<TokenId> ids;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto id = v.find(v.token(static_cast<TokenId>(i)));
    REQUIRE(id);
    CHECK(*id == i);
    ids.insert(*id);
  }
  CHECK(ids.size() == v.size());
  for (const auto& s : corpus) CHECK(v.decode(v.encode(s)) == s);
}

TEST_CASE("vocab encode, decode and persistence") {
  const Vocab v({"kid", "room", "dance"});
  const std::vector<std::string> s = {"dance", "kid"};
  const auto ids = v.encode(s);
  CHECK(ids == std::vector<TokenId>{5, 3});
  const std::vector<TokenId> with_reserved = {kBos, 5, kEos, kPad};
  CHECK(v.decode(with_reserved) == std::vector<std::string>{"dance"});
  const std::vector<std::string> oov = {"kid", "cat"};
  CHECK_THROWS_WITH_AS(v.encode(oov), "out-of-vocabulary token 'cat'", DataError);
  CHECK_THROWS_AS(Vocab({"a", "a"}), DataError);
  CHECK_THROWS_AS(Vocab({}), DataError);
  CHECK_THROWS_AS(Vocab({"<pad>"}), DataError);

  const auto dir = testutil::temp_dir("vocab");
  v.save((dir / "v.txt").string());
  const Vocab back = Vocab::load((dir / "v.txt").string());
  CHECK(back == v);
  CHECK(back.hash() == v.hash());
  CHECK(Vocab({"kid", "dance", "room"}).hash() != v.hash());
}

TEST_CASE("ConceptSet has set semantics") {
  const ConceptSet a({"kid", "room", "dance"});
  const ConceptSet b({"dance", "kid", "room"});
  CHECK(a.key() == b.key());
  CHECK(a.size() == 3);
  CHECK_THROWS_WITH_AS(ConceptSet({}), "empty concept set", DataError);
  CHECK_THROWS_AS(ConceptSet({"kid", "kid"}), DataError);
}

TEST_CASE("TokenSequence invariants") {
  auto s = testutil::seq({3, 4});
  s.log_prob = -1.0;
  CHECK_NOTHROW(s.check());
  CHECK(s.content_length() == 2);
  CHECK(s.content().size() == 2);

  TokenSequence early;
  early.token_ids = {kEos, 3, kEos};
  early.complete = true;
  CHECK_THROWS_AS(early.check(), std::logic_error);

  TokenSequence flag;
  flag.token_ids = {3, kEos};
  flag.complete = false;
  CHECK_THROWS_AS(flag.check(), std::logic_error);

  auto pos = testutil::seq({3});
  pos.log_prob = 0.5;
  CHECK_THROWS_AS(pos.check(), std::logic_error);

  TokenSequence open;
  open.token_ids = {3, 4};
  CHECK(open.content_length() == 2);
  CHECK_NOTHROW(open.check());

  const auto c = TokenSequence::closed({3, 4}, -2.0);
  CHECK(c.complete);
  CHECK(c.token_ids == std::vector<TokenId>{3, 4, kEos});
}

TEST_CASE("RewardWeights validation") {
  CHECK_NOTHROW((RewardWeights{0, 20, 200, 0}.validate()));
  CHECK_THROWS_WITH_AS((RewardWeights{1, 1, 0, 0}.validate()), doctest::Contains("w1/w2 exclusivity"), UsageError);
  CHECK_THROWS_AS((RewardWeights{0, 0, 0, 0}.validate()), UsageError);
  CHECK_THROWS_AS((RewardWeights{0, 0, -1, 1}.validate()), UsageError);
}

TEST_CASE("dataset parsing") {
  const auto recs = parse_dataset(
      R"({"concepts":["kid","room","dance"],"refs":["the kid loves to dance in her own room"]})"
      "\n");
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].concepts.size() == 3);
  REQUIRE(recs[0].refs.size() == 1);
  CHECK(recs[0].refs[0].size() == 9);

  CHECK(parse_dataset("").empty());
  CHECK(parse_dataset("\n  \n").empty());
  CHECK_THROWS_WITH_AS(parse_dataset(R"({"concepts":[]})"), doctest::Contains("empty concept set"), DataError);
  CHECK_THROWS_WITH_AS(parse_dataset("\n" R"({"concepts":["a"],"extra":1})"), doctest::Contains("line 2"),
                       DataError);
  CHECK_THROWS_WITH_AS(parse_dataset(R"({"concepts":["a"],"extra":1})"), doctest::Contains("unknown field"),
                       DataError);
  CHECK_THROWS_AS(parse_dataset("{not json"), DataError);
  CHECK_THROWS_AS(parse_dataset(R"({"concepts":["two words"]})"), DataError);

  const auto no_refs = parse_dataset(R"({"concepts":["a","b"]})");
  REQUIRE(no_refs.size() == 1);
  CHECK(no_refs[0].refs.empty());
}

TEST_CASE("dataset records round-trip through JSONL") {
  const auto records = generate_corpus(default_grammar(), 30, 11);
  const auto dir = testutil::temp_dir("dataset");
  const auto path = (dir / "d.jsonl").string();
  save_dataset(path, records);
  const auto back = load_dataset(path);
  REQUIRE(back.size() == records.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].concepts.words() == records[i].concepts.words());
    CHECK(back[i].refs == records[i].refs);
    CHECK(record_to_json(back[i]) == record_to_json(records[i]));
  }
  std::ifstream in(path);
  std::string first;
  std::getline(in, first);
  CHECK(first == record_to_json(records[0]));
}

TEST_CASE("check_in_vocab rejects unknown reference tokens") {
  const Vocab v({"kid", "room"});
  const std::vector<DatasetRecord> ok = {{ConceptSet({"kid"}), {{"kid", "room"}}}};
  CHECK_NOTHROW(check_in_vocab(v, ok));
  const std::vector<DatasetRecord> bad = {{ConceptSet({"kid"}), {{"kid", "cat"}}}};
  CHECK_THROWS_AS(check_in_vocab(v, bad), DataError);
}
