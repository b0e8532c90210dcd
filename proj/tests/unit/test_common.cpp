#include <gtest/gtest.h>

#include <set>
#include <stdexcept>
#include <vector>

#include "satqfl/common.hpp"

using namespace satqfl;

TEST(Time, CivilToUnixMatchesKnownInstants) {
    EXPECT_DOUBLE_EQ(utc_from_civil(1970, 1, 1).unix_seconds, 0.0);
    // date -u -d 2025-04-24T10:06:29Z +%s
    EXPECT_DOUBLE_EQ(utc_from_civil(2025, 4, 24, 10, 6, 29.0).unix_seconds, 1745489189.0);
}

TEST(Time, IsoRoundTrip) {
    const auto t = utc_from_civil(2025, 4, 24, 10, 6, 29.0);
    EXPECT_EQ(to_iso8601(t), "2025-04-24T10:06:29Z");
    EXPECT_EQ(parse_iso8601("2025-04-24T10:06:29Z"), t);
    EXPECT_EQ(to_iso8601(t + 0.25), "2025-04-24T10:06:29.250Z");
    EXPECT_EQ(parse_iso8601(to_iso8601(t + 0.25)), t + 0.25);
}

TEST(Time, SubMillisecondRoundingNeverPrintsSixtySeconds) {
    const auto t = utc_from_civil(2025, 12, 31, 23, 59, 59.9996);
    EXPECT_EQ(to_iso8601(t), "2026-01-01T00:00:00Z");
}

TEST(Time, RejectsMalformedIso) {
    EXPECT_THROW(parse_iso8601("2025-04-24 10:06"), std::invalid_argument);
    EXPECT_THROW(parse_iso8601(""), std::invalid_argument);
}

TEST(Rng, SameSeedSameStream) {
    Rng a(7);
    Rng b(7);
    for (int i = 0; i < 100; ++i) {
        EXPECT_EQ(a.next_u64(), b.next_u64());
    }
}

TEST(Rng, UniformAndBelowStayInRange) {
    Rng rng(3);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        EXPECT_GE(u, 0.0);
        EXPECT_LT(u, 1.0);
        EXPECT_LT(rng.below(7), 7u);
    }
}

TEST(Rng, NormalMomentsAreStandard) {
    Rng rng(11);
    const int n = 200000;
    double sum = 0.0;
    double sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        sq += z * z;
    }
    // 5 sigma bands for mean and variance estimators
    EXPECT_NEAR(sum / n, 0.0, 5.0 / std::sqrt(n));
    EXPECT_NEAR(sq / n, 1.0, 5.0 * std::sqrt(2.0 / n));
}

TEST(Rng, ShuffleIsAPermutation) {
    Rng rng(5);
    std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    rng.shuffle(v);
    EXPECT_EQ(std::set<int>(v.begin(), v.end()).size(), 10u);
}

TEST(Rng, DeriveSeparatesTags) {
    EXPECT_EQ(Rng::derive(42, {1, 2}), Rng::derive(42, {1, 2}));
    EXPECT_NE(Rng::derive(42, {1, 2}), Rng::derive(42, {2, 1}));
    EXPECT_NE(Rng::derive(42, {1}), Rng::derive(43, {1}));
}
