#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "picknet/text.hpp"

using namespace picknet;

TEST_CASE("tokenize applies the rule set") {
  CHECK(tokenize("A dog is playing!") == std::vector<std::string>{"a", "dog", "is", "playing"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("a rubik's cube") == std::vector<std::string>{"a", "rubik", "'s", "cube"});
  CHECK(tokenize("  Hello,   WORLD. ") == std::vector<std::string>{"hello", "world"});
  CHECK(tokenize("! ?? ...") == std::vector<std::string>{});
  // in-word punctuation and digits survive
  CHECK(tokenize("t-shirt costs $5") == std::vector<std::string>{"t-shirt", "costs", "5"});
  CHECK(tokenize("don't stop") == std::vector<std::string>{"don't", "stop"});
}

TEST_CASE("tokenize is idempotent under re-joining") {
  const std::vector<std::string> inputs = {
      "A dog is playing!", "a rubik's cube", "don't stop, never!", "x-ray (scans) are cool.",
      "the cat's 'meow' -- loudly", "", "!!!", "Mixed CASE and 123 numbers"};
  for (const std::string& s : inputs) {
    auto once = tokenize(s);
    auto twice = tokenize(join_tokens(once));
    CHECK(once == twice);
  }
}

TEST_CASE("vocabulary respects min_freq and tie-breaks") {
  std::vector<std::vector<std::string>> corpus = {
      {"dog", "runs"}, {"dog", "sits"}, {"dog", "cat"}, {"cat", "cat"}};
  // dog: 3, cat: 3, runs/sits: 1
  Vocabulary v = Vocabulary::build(corpus, 3);
  CHECK(v.size() == kNumReserved + 2);
  CHECK(v.lookup("cat") == 4);  // equal counts, "cat" < "dog"
  CHECK(v.lookup("dog") == 5);
  CHECK(v.lookup("runs") == kUnk);

  Vocabulary all = Vocabulary::build(corpus, 1);
  CHECK(all.size() == kNumReserved + 4);

  Vocabulary again = Vocabulary::build(corpus, 3);
  CHECK(again.lookup("cat") == v.lookup("cat"));
  CHECK(again.lookup("dog") == v.lookup("dog"));
  CHECK(again.hash() == v.hash());
}

TEST_CASE("reserved ids never collide with corpus tokens") {
  std::vector<std::vector<std::string>> corpus = {{"a", "a", "a", "b", "b", "b"}};
  Vocabulary v = Vocabulary::build(corpus, 3);
  for (int id = 0; id < kNumReserved; ++id) {
    CHECK(v.lookup(v.token(id)) == id);
  }
  CHECK(v.lookup("a") >= kNumReserved);
  CHECK(v.lookup("b") >= kNumReserved);
}

TEST_CASE("encode and decode round trip") {
  std::vector<std::vector<std::string>> corpus = {{"a", "dog", "runs"},
                                                  {"a", "dog", "runs"},
                                                  {"a", "dog", "runs"}};
  Vocabulary v = Vocabulary::build(corpus, 3);
  auto ids = v.encode({"a", "dog", "runs"});
  CHECK(v.decode(ids) == std::vector<std::string>{"a", "dog", "runs"});
  CHECK(v.encode({"zebra"}) == TokenSeq{kUnk});
  CHECK(v.encode({}).empty());
  CHECK_THROWS_AS(v.token(v.size()), UsageError);
}

TEST_CASE("vocabulary serializes to json and back") {
  std::vector<std::vector<std::string>> corpus = {
      {"walk", "walk", "walk", "run", "run", "run", "jump", "jump", "jump"}};
  Vocabulary v = Vocabulary::build(corpus, 3);
  nlohmann::json j = v.to_json();
  CHECK(j["min_freq"] == 3);
  Vocabulary back = Vocabulary::from_json(j);
  CHECK(back.size() == v.size());
  CHECK(back.hash() == v.hash());
  for (int id = 0; id < v.size(); ++id) CHECK(back.token(id) == v.token(id));
}
