#include <gtest/gtest.h>

#include "pageguide/text.hpp"

namespace pageguide::text {
namespace {

TEST(Utf8, ValidatesWellFormedAndRejectsOverlongs) {
    EXPECT_TRUE(is_valid_utf8("plain"));
    EXPECT_TRUE(is_valid_utf8("caf\xC3\xA9 \xE2\x8B\xAE \xF0\x9F\x98\x80"));
    EXPECT_FALSE(is_valid_utf8("\xC0\xAF"));          // overlong '/'
    EXPECT_FALSE(is_valid_utf8("\xED\xA0\x80"));      // surrogate
    EXPECT_FALSE(is_valid_utf8("\xE2\x8B"));          // truncated
}

TEST(Utf8, DecodeEncodeRoundTrip) {
    const std::string s = "a\xC3\xA9\xE2\x8B\xAE\xF0\x9F\x98\x80";
    const std::u32string cps = decode_utf8(s);
    ASSERT_EQ(cps.size(), 4u);
    EXPECT_EQ(cps[2], U'⋮');
    EXPECT_EQ(encode_utf8(cps), s);
    EXPECT_EQ(length(s), 4u);
}

TEST(Utf8, MalformedBytesBecomeReplacement) {
    const std::u32string cps = decode_utf8("a\xFF" "b");
    ASSERT_EQ(cps.size(), 3u);
    EXPECT_EQ(cps[1], U'�');
}

TEST(Clip, CountsCodePointsNotBytes) {
    EXPECT_EQ(clip("h\xC3\xA9llo", 2), "h\xC3\xA9");
    EXPECT_EQ(clip("abc", 10), "abc");
    EXPECT_EQ(clip("abc", 0), "");
}

TEST(FoldCase, LatinGreekCyrillic) {
    EXPECT_EQ(fold_case(U'A'), U'a');
    EXPECT_EQ(fold_case(U'Ä'), U'ä');
    EXPECT_EQ(fold_case(U'Δ'), U'δ');
    EXPECT_EQ(fold_case(U'Ж'), U'ж');
    EXPECT_EQ(fold_case(U'7'), U'7');
}

TEST(Whitespace, CollapseAndTrim) {
    EXPECT_EQ(collapse_whitespace("  a \t\n b\xC2\xA0\xC2\xA0" "c  "), "a b c");
    EXPECT_EQ(trim("  x y \n"), "x y");
    EXPECT_EQ(trim("   "), "");
}

TEST(AnswerTokens, LowercasesAndStripsPunctuation) {
    const std::vector<std::string> want = {"the", "cat", "sat"};
    EXPECT_EQ(answer_tokens("The cat, sat!"), want);
    EXPECT_TRUE(answer_tokens(" ... ").empty());
}

TEST(Sha256, KnownVectors) {
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

}  // namespace
}  // namespace pageguide::text
