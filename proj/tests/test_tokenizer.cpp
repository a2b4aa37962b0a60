#include <cstdio>
#include <random>

#include "doctest.h"
#include "mint/tokenizer.hpp"

using namespace mint;

TEST_CASE("specials occupy ids 0..4 in fixed order") {
  Vocabulary v = build_vocabulary({"a b", "a c"}, 8);
  CHECK(v.id_to_token[0] == "[PAD]");
  CHECK(v.id_to_token[1] == "[CLS]");
  CHECK(v.id_to_token[2] == "[DEC]");
  CHECK(v.id_to_token[3] == "[EOS]");
  CHECK(v.id_to_token[4] == "[UNK]");
}

TEST_CASE("build_vocabulary frequency order") {
  Vocabulary v = build_vocabulary({"a b", "a c"}, 8);
  CHECK(v.size() == 8);
  CHECK(v.id_of("a") == kNumSpecials);  // most frequent → smallest non-special
  CHECK(v.token_to_id.count("b") == 1);
  CHECK(v.token_to_id.count("c") == 1);
}

TEST_CASE("build_vocabulary degenerate corpus has specials only") {
  Vocabulary v = build_vocabulary({""}, 6);
  CHECK(v.size() == kNumSpecials);
  CHECK(v.id_of("anything") == static_cast<int>(Special::UNK));
}

TEST_CASE("build_vocabulary counts by hand") {
  Vocabulary v = build_vocabulary({"x x y"}, 7);
  CHECK(v.token_to_id.count("x") == 1);
  CHECK(v.token_to_id.count("y") == 1);
  CHECK(v.id_of("x") < v.id_of("y"));
}

TEST_CASE("build_vocabulary lexicographic tie-break") {
  Vocabulary v = build_vocabulary({"zeta alpha"}, 7);
  CHECK(v.id_of("alpha") < v.id_of("zeta"));
}

TEST_CASE("build_vocabulary empty corpus error") {
  CHECK_THROWS_WITH(build_vocabulary({}, 8), "empty corpus");
}

TEST_CASE("encode with CLS and padding") {
  Vocabulary v = build_vocabulary({"a b", "a c"}, 8);
  TokenSequence s = encode(v, "a b", Special::CLS, false, 5);
  REQUIRE(s.length() == 5);
  CHECK(s.ids[0] == static_cast<int>(Special::CLS));
  CHECK(s.ids[1] == v.id_of("a"));
  CHECK(s.ids[2] == v.id_of("b"));
  CHECK(s.ids[3] == static_cast<int>(Special::PAD));
  CHECK(s.ids[4] == static_cast<int>(Special::PAD));
  CHECK(s.valid_mask == std::vector<bool>{true, true, true, false, false});
}

TEST_CASE("encode empty string with DEC and EOS") {
  Vocabulary v = build_vocabulary({"a"}, 6);
  TokenSequence s = encode(v, "", Special::DEC, true, 4);
  CHECK(s.ids == std::vector<int>{2, 3, 0, 0});
  CHECK(s.valid_mask == std::vector<bool>{true, true, false, false});
}

TEST_CASE("encode truncation") {
  Vocabulary v = build_vocabulary({"a"}, 6);
  TokenSequence s = encode(v, "a a a a", std::nullopt, false, 2);
  CHECK(s.ids == std::vector<int>{v.id_of("a"), v.id_of("a")});
}

TEST_CASE("decode drops specials") {
  Vocabulary v = build_vocabulary({"a b"}, 8);
  TokenSequence s;
  s.ids = {static_cast<int>(Special::CLS), v.id_of("a"), v.id_of("b"), 0};
  s.valid_mask = {true, true, true, false};
  CHECK(decode(v, s) == "a b");
  TokenSequence empty;
  empty.ids = {2, 3};
  empty.valid_mask = {true, true};
  CHECK(decode(v, empty) == "");
}

TEST_CASE("decode unknown id error") {
  Vocabulary v = build_vocabulary({"a"}, 6);
  TokenSequence s;
  s.ids = {99};
  s.valid_mask = {true};
  CHECK_THROWS_WITH(decode(v, s), "unknown id");
}

TEST_CASE("round trip of in-vocabulary text") {
  Vocabulary v = build_vocabulary({"dog barking loudly"}, 16);
  TokenSequence s = encode(v, "Dog Barking LOUDLY", Special::CLS, true, 10);
  CHECK(decode(v, s) == "dog barking loudly");
}

TEST_CASE("padding is a suffix (property)") {
  Vocabulary v = build_vocabulary({"a b c d e"}, 12);
  std::mt19937_64 rng(3);
  std::vector<std::string> words = {"a", "b", "c", "d", "e", "zz"};
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    int n = static_cast<int>(rng() % 7);
    for (int i = 0; i < n; ++i) {
      if (i) text += " ";
      text += words[rng() % words.size()];
    }
    TokenSequence s = encode(v, text, rng() % 2 ? std::optional(Special::CLS)
                                                : std::nullopt,
                             rng() % 2 == 0, 1 + static_cast<int>(rng() % 8));
    REQUIRE(s.ids.size() == s.valid_mask.size());
    bool saw_pad = false;
    for (size_t i = 0; i < s.ids.size(); ++i) {
      if (!s.valid_mask[i]) saw_pad = true;
      if (saw_pad) CHECK_FALSE(s.valid_mask[i]);
    }
  }
}

TEST_CASE("vocabulary determinism and file round trip") {
  std::vector<std::string> corpus = {"the quick brown fox", "the lazy dog"};
  Vocabulary a = build_vocabulary(corpus, 16);
  Vocabulary b = build_vocabulary(corpus, 16);
  CHECK(a.id_to_token == b.id_to_token);

  std::string path = "vocab_test_tmp.txt";
  save_vocabulary(a, path);
  Vocabulary c = load_vocabulary(path);
  CHECK(a.id_to_token == c.id_to_token);
  CHECK(a.token_to_id == c.token_to_id);
  std::remove(path.c_str());
}
