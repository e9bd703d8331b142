#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "convsv/common/error.hpp"
#include "convsv/common/hashing.hpp"
#include "convsv/common/jsonl.hpp"
#include "convsv/common/random.hpp"
#include "convsv/common/text.hpp"

namespace convsv {
namespace {

TEST(Hashing, Sha256KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  Sha256 incremental;
  incremental.update("a").update("bc");
  EXPECT_EQ(incremental.hex(), sha256_hex("abc"));
}

TEST(Hashing, Fnv1aKnownVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Hashing, DeriveSeedSeparatesTags) {
  EXPECT_EQ(derive_seed(7, "x"), derive_seed(7, "x"));
  EXPECT_NE(derive_seed(7, "x"), derive_seed(7, "y"));
  EXPECT_NE(derive_seed(7, "x"), derive_seed(8, "x"));
}

TEST(Random, RoundHalfUp) {
  EXPECT_EQ(round_half_up(0.05, 10), 1u);
  EXPECT_EQ(round_half_up(0.3, 10), 3u);
  EXPECT_EQ(round_half_up(0.04, 10), 0u);
  EXPECT_EQ(round_half_up(0.25, 2), 1u);
}

TEST(Random, SameSeedSameStream) {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(a.below(1000), b.below(1000));
    EXPECT_EQ(a.uniform(), b.uniform());
    EXPECT_EQ(a.normal(), b.normal());
  }
}

TEST(Random, BelowAndUniformRanges) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_LT(rng.below(7), 7u);
    const double u = rng.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(Random, SampleIndicesDistinctSorted) {
  Rng rng(5);
  const auto idx = rng.sample_indices(50, 20);
  ASSERT_EQ(idx.size(), 20u);
  EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
  EXPECT_EQ(std::set<std::size_t>(idx.begin(), idx.end()).size(), 20u);
  EXPECT_LT(idx.back(), 50u);
}

TEST(Random, ShuffleIsPermutation) {
  Rng rng(9);
  std::vector<int> v{1, 2, 3, 4, 5, 6, 7, 8};
  rng.shuffle(v);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, (std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8}));
}

TEST(Text, TokenizeLowercasesAndSplits) {
  EXPECT_EQ(text::tokenize("I saw the cat"), (std::vector<std::string>{"i", "saw", "the", "cat"}));
  EXPECT_EQ(text::tokenize("Hello,  WORLD!!"), (std::vector<std::string>{"hello", "world"}));
  EXPECT_TRUE(text::tokenize("").empty());
  EXPECT_TRUE(text::tokenize(" ,.;").empty());
}

TEST(Text, TokenizeKeepsInnerApostrophe) {
  EXPECT_EQ(text::tokenize("I don't know"),
            (std::vector<std::string>{"i", "don't", "know"}));
  EXPECT_EQ(text::tokenize("it\xE2\x80\x99s"), (std::vector<std::string>{"it's"}));
  EXPECT_EQ(text::tokenize("'quoted'"), (std::vector<std::string>{"quoted"}));
}

TEST(Text, TokenizeUnicodeLetters) {
  EXPECT_EQ(text::tokenize("\xC3\x89t\xC3\xA9 caf\xC3\xA9"),
            (std::vector<std::string>{"\xC3\xA9t\xC3\xA9", "caf\xC3\xA9"}));
}

TEST(Text, Utf8RoundTrip) {
  const std::string s = "a\xC3\xA9\xE2\x82\xAC\xF0\x9F\x98\x80";
  EXPECT_EQ(text::encode_utf8(text::decode_utf8(s)), s);
  EXPECT_EQ(text::decode_utf8("\xFF").front(), U'�');
}

TEST(Text, Trim) {
  EXPECT_EQ(text::trim("  x y \t\n"), "x y");
  EXPECT_EQ(text::trim("   "), "");
}

TEST(Jsonl, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345678.9, 0.0}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
}

TEST(Jsonl, ReportsLineOfBadRecord) {
  std::istringstream in("{\"a\":1}\n\n{bad\n");
  std::size_t seen = 0;
  try {
    for_each_jsonl(in, [&](const Json&, std::size_t) { ++seen; });
    FAIL() << "expected parse error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kParse);
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_EQ(seen, 1u);
}

}  // namespace
}  // namespace convsv
