#include <catch2/catch_amalgamated.hpp>
#include <sstream>

#include "phonotact/phone_table.hpp"

using namespace phonotact;

TEST_CASE("builtin table class lookups") {
  const PhoneTable& t = builtin_table();
  CHECK(t.find("ʔ")->sonority == 1);   // ʔ
  CHECK(t.find("ʔ")->consonantal == false);
  CHECK(t.find("ɔ")->sonority == 9);   // ɔ
  CHECK(t.find("j")->sonority == 7);
  CHECK(t.find("s")->sonority == 3);
  CHECK(t.find("d")->sonority == 2);
  CHECK(t.find("m")->sonority == 5);
  CHECK(t.find("r")->sonority == 6);
  CHECK(t.find("i")->sonority == 8);
  CHECK(t.find("tʰ") != nullptr);      // tʰ
  CHECK(t.find("tʰ")->sonority == 1);
  CHECK(t.find("aː") != nullptr);      // aː
  CHECK(t.find("ã") != nullptr);      // ã
  CHECK(t.max_symbol_len >= 2);
}

TEST_CASE("builtin table obeys the sonority conventions") {
  for (const auto& [sym, f] : builtin_table().entries) {
    REQUIRE(f.kind == PhoneKind::segment);
    REQUIRE(f.sonority >= 1);
    REQUIRE(f.sonority <= 9);
    if (f.consonantal) {
      REQUIRE(f.sonority <= 7);
    } else if (sym != "ʔ") {
      REQUIRE(f.sonority >= 8);
    }
  }
  CHECK(validate_table(builtin_table()).empty());
}

TEST_CASE("feature table TSV load") {
  std::istringstream in(
      "symbol\tsonority\tconsonantal\tkind\n"
      "s\t3\ttrue\tsegment\n"
      "a\t9\tfalse\tsegment\n"
      "51\t0\tfalse\ttone\n");
  auto t = load_feature_table(in);
  REQUIRE(t.entries.size() == 3);
  CHECK(t.find("s")->sonority == 3);
  CHECK(t.find("s")->consonantal == true);
  CHECK(t.find("51")->kind == PhoneKind::tone);
}

TEST_CASE("feature table duplicate and error handling") {
  SECTION("duplicate symbol: last wins with warning") {
    std::istringstream in("s\t3\ttrue\tsegment\ns\t4\ttrue\tsegment\n");
    std::vector<std::string> warnings;
    auto t = load_feature_table(in, &warnings);
    CHECK(t.find("s")->sonority == 4);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("duplicate") != std::string::npos);
  }
  SECTION("sonority out of range") {
    std::istringstream in("s\t12\ttrue\tsegment\n");
    CHECK_THROWS_AS(load_feature_table(in), ParseError);
  }
  SECTION("unknown kind") {
    std::istringstream in("s\t3\ttrue\tclick\n");
    CHECK_THROWS_AS(load_feature_table(in), ParseError);
  }
  SECTION("bad column count") {
    std::istringstream in("s\t3\ttrue\n");
    CHECK_THROWS_AS(load_feature_table(in), ParseError);
  }
  SECTION("empty stream falls back to builtin") {
    std::istringstream in("");
    auto t = load_feature_table(in);
    CHECK(t.entries.size() == builtin_table().entries.size());
    CHECK(t.find("ʔ") != nullptr);
  }
}

TEST_CASE("low-sonority vowel is loadable but flagged") {
  std::istringstream in("a\t5\tfalse\tsegment\n");
  auto t = load_feature_table(in);
  REQUIRE(t.find("a") != nullptr);
  auto issues = validate_table(t);
  REQUIRE(issues.size() == 1);
  CHECK(issues[0].find("\"a\"") != std::string::npos);
}

TEST_CASE("dump and reload round-trips") {
  std::string dumped = dump_feature_table(builtin_table());
  std::istringstream in(dumped);
  auto t = load_feature_table(in);
  REQUIRE(t.entries.size() == builtin_table().entries.size());
  for (const auto& [sym, f] : builtin_table().entries) {
    const PhoneFeatures* g = t.find(sym);
    REQUIRE(g != nullptr);
    CHECK(*g == f);
  }
  CHECK(t.max_symbol_len == builtin_table().max_symbol_len);
}

TEST_CASE("sonority accessor rejects tones") {
  Token tone{"31", {0, false, PhoneKind::tone}};
  CHECK_THROWS_AS(sonority(tone), Error);
  Token seg{"a", {9, false, PhoneKind::segment}};
  CHECK(sonority(seg) == 9);
}

TEST_CASE("tokenize basic and longest match") {
  auto toks = tokenize("a", builtin_table(), LanguageProfile::generic);
  REQUIRE(toks.size() == 1);
  CHECK(toks[0].symbol == "a");

  PhoneTable small;
  small.add("t", {1, true, PhoneKind::segment});
  small.add("tʰ", {1, true, PhoneKind::segment});
  small.add("a", {9, false, PhoneKind::segment});
  auto two = tokenize("tʰa", small, LanguageProfile::generic);
  REQUIRE(two.size() == 2);
  CHECK(two[0].symbol == "tʰ");
  CHECK(two[1].symbol == "a");
}

TEST_CASE("tokenize min tone runs") {
  auto toks =
      tokenize("ŋi31tʰæ51", builtin_table(), LanguageProfile::min);
  REQUIRE(toks.size() == 6);
  CHECK(toks[0].symbol == "ŋ");
  CHECK(toks[1].symbol == "i");
  CHECK(toks[2].symbol == "31");
  CHECK(toks[2].features.kind == PhoneKind::tone);
  CHECK(toks[3].symbol == "tʰ");
  CHECK(toks[4].symbol == "æ");
  CHECK(toks[5].symbol == "51");
  CHECK(toks[5].features.kind == PhoneKind::tone);
}

TEST_CASE("tokenize error cases") {
  SECTION("digit in generic profile") {
    CHECK_THROWS_AS(tokenize("a1", builtin_table(), LanguageProfile::generic),
                    TokenizeError);
  }
  SECTION("digit outside Chao range in min") {
    CHECK_THROWS_AS(tokenize("a7", builtin_table(), LanguageProfile::min),
                    TokenizeError);
  }
  SECTION("unmatchable symbol reports byte offset") {
    try {
      tokenize("ab#c", builtin_table(), LanguageProfile::generic);
      FAIL("expected TokenizeError");
    } catch (const TokenizeError& e) {
      CHECK(e.symbol == "#");
      CHECK(e.byte_offset == 2);
    }
  }
  SECTION("combining mark never severed from base") {
    PhoneTable small;
    small.add("a", {9, false, PhoneKind::segment});
    try {
      tokenize("ã", small, LanguageProfile::generic);
      FAIL("expected TokenizeError");
    } catch (const TokenizeError& e) {
      CHECK(e.symbol == "ã");
      CHECK(e.byte_offset == 0);
    }
  }
  SECTION("empty transcription") {
    CHECK_THROWS_AS(tokenize("  ", builtin_table(), LanguageProfile::generic),
                    InputError);
  }
}

TEST_CASE("tokenize concatenation identity on generated inputs") {
  std::vector<std::string> keys;
  for (const auto& [sym, f] : builtin_table().entries) keys.push_back(sym);
  Rng rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    std::string word;
    std::size_t n = 1 + rng.below(8);
    for (std::size_t i = 0; i < n; ++i) word += keys[rng.below(keys.size())];
    auto toks = tokenize(word, builtin_table(), LanguageProfile::generic);
    std::string rebuilt;
    for (const auto& t : toks) rebuilt += t.symbol;
    REQUIRE(rebuilt == word);
    auto again = tokenize(word, builtin_table(), LanguageProfile::generic);
    REQUIRE(again == toks);
  }
}

TEST_CASE("tokenize concatenation identity with min tones") {
  std::vector<std::string> keys;
  for (const auto& [sym, f] : builtin_table().entries) keys.push_back(sym);
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    std::string word;
    std::size_t syls = 1 + rng.below(3);
    for (std::size_t s = 0; s < syls; ++s) {
      std::size_t n = 1 + rng.below(3);
      for (std::size_t i = 0; i < n; ++i) word += keys[rng.below(keys.size())];
      word += static_cast<char>('1' + rng.below(5));
      if (rng.next_unit() < 0.5) word += static_cast<char>('1' + rng.below(5));
    }
    auto toks = tokenize(word, builtin_table(), LanguageProfile::min);
    std::string rebuilt;
    for (const auto& t : toks) rebuilt += t.symbol;
    REQUIRE(rebuilt == word);
  }
}
