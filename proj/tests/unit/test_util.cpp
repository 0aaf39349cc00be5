#include <gtest/gtest.h>

#include <map>
#include <random>

#include "constructa/util.hpp"

using namespace constructa;

TEST(Hash, FnvKnownVectors) {
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
    EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Hash, Sha256KnownVectors) {
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Rng, MatchesSeededEngine) {
    Rng a(7);
    std::mt19937_64 ref(splitmix64(7));
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), ref());
}

TEST(Rng, StreamsAreKeyedAndReproducible) {
    auto a = Rng::stream(42, "A0001");
    auto b = Rng::stream(42, "A0001");
    auto c = Rng::stream(42, "A0002");
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    EXPECT_NE(x, c.next());
}

TEST(Rng, BelowStaysInRangeAndCoversIt) {
    Rng r(1);
    std::map<std::uint64_t, int> seen;
    for (int i = 0; i < 7000; ++i) {
        const auto v = r.below(7);
        ASSERT_LT(v, 7u);
        ++seen[v];
    }
    EXPECT_EQ(seen.size(), 7u);
    for (const auto& [v, n] : seen) EXPECT_NEAR(n, 1000, 150);
}

TEST(Rng, UniformAndPoissonMoments) {
    Rng r(3);
    double sum = 0, psum = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform01();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
        psum += r.poisson(1.93);
    }
    EXPECT_NEAR(sum / n, 0.5, 0.01);
    EXPECT_NEAR(psum / n, 1.93, 0.05);
}

TEST(Rng, WeightedNeverPicksZeroWeight) {
    Rng r(5);
    for (int i = 0; i < 1000; ++i) EXPECT_NE(r.weighted({1.0, 0.0, 2.0}), 1u);
}

TEST(Rng, ShuffleIsAPermutation) {
    Rng r(9);
    std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    r.shuffle(v);
    auto sorted = v;
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(sorted, (std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}));
}

TEST(Text, TrimSplitJoin) {
    EXPECT_EQ(trim("  a b \t\n"), "a b");
    EXPECT_EQ(split("a.b..c", '.'), (std::vector<std::string>{"a", "b", "", "c"}));
    EXPECT_EQ(join({"x", "y", "z"}, ", "), "x, y, z");
}

TEST(Text, NfcComposesDecomposedInput) {
    EXPECT_EQ(nfc("e\xCC\x81"), "\xC3\xA9");
    EXPECT_EQ(nfc("plain"), "plain");
}

TEST(Text, TokensAndWhitespace) {
    EXPECT_EQ(tokenize("  Install   duct\tbank\n"), (std::vector<std::string>{"Install", "duct", "bank"}));
    EXPECT_EQ(token_count(""), 0u);
    EXPECT_EQ(normalize_whitespace(" a \n\n b  "), "a b");
}

TEST(Text, CasefoldHandlesNonAscii) {
    EXPECT_EQ(casefold("CSA.Struc"), "csa.struc");
    EXPECT_EQ(casefold("STRASSE"), casefold("Stra\xC3\x9F" "e"));
}

TEST(Dates, StrictAndLooseParsing) {
    ASSERT_TRUE(parse_iso_date("2024-02-29"));
    EXPECT_FALSE(parse_iso_date("2023-02-29"));
    EXPECT_FALSE(parse_iso_date("2024-2-9"));
    EXPECT_FALSE(parse_iso_date("2024-02-29x"));
    const auto d = parse_loose_date("2024/2/9");
    ASSERT_TRUE(d);
    EXPECT_EQ(format_date(*d), "2024-02-09");
    EXPECT_EQ(format_date(*parse_iso_date("2024-12-31")), "2024-12-31");
}
