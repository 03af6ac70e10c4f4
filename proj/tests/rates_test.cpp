#include "oblivagg/rates.hpp"

#include <gtest/gtest.h>

#include <cstdint>

#include "oblivagg/dealer.hpp"
#include "oblivagg/errors.hpp"

namespace oblivagg {
namespace {

RateTuple tuple(std::uint64_t x, std::uint64_t y, std::uint64_t z, std::uint64_t zs) {
    return RateTuple{Rational(x), Rational(y), Rational(z), Rational(zs)};
}

TEST(Rates, MeasuredNoDropoutTuple) {
    const SessionParams params(4, FieldSpec(13), 8, Scheme::NoDropout);
    EXPECT_EQ(measure_rates(params), tuple(1, 1, 2, 4));
}

TEST(Rates, MeasuredDropoutTolerantTuple) {
    const SessionParams params(4, FieldSpec(13), 8, Scheme::DropoutTolerant);
    EXPECT_EQ(measure_rates(params), tuple(1, 1, 4, 4));
}

TEST(Rates, MinimalSession) {
    const SessionParams params(2, FieldSpec(2), 1, Scheme::NoDropout);
    EXPECT_EQ(measure_rates(params), tuple(1, 1, 2, 2));
}

TEST(Rates, MeasurementIsInvariantInInputLength) {
    for (Scheme scheme : {Scheme::NoDropout, Scheme::DropoutTolerant}) {
        const SessionParams base(5, FieldSpec(257), 1, scheme);
        const RateTuple reference = measure_rates(base);
        for (std::uint32_t len : {2U, 7U, 16U}) {
            const SessionParams params(5, FieldSpec(257), len, scheme);
            EXPECT_EQ(measure_rates(params), reference);
        }
    }
}

TEST(Rates, OptimalRegionTuples) {
    EXPECT_EQ(optimal_region(2, Scheme::NoDropout), tuple(1, 1, 2, 2));
    EXPECT_EQ(optimal_region(5, Scheme::DropoutTolerant), tuple(1, 1, 5, 5));
    // The two regions coincide at the smallest group size.
    EXPECT_EQ(optimal_region(2, Scheme::DropoutTolerant), optimal_region(2, Scheme::NoDropout));
    EXPECT_THROW(optimal_region(1, Scheme::NoDropout), ConfigError);
}

TEST(Rates, BothSchemesMeetTheirRegionWithEquality) {
    for (std::uint32_t user_count = 2; user_count <= 6; ++user_count) {
        for (Scheme scheme : {Scheme::NoDropout, Scheme::DropoutTolerant}) {
            const SessionParams params(user_count, FieldSpec(11), 3, scheme);
            const OptimalityReport report = verify_optimality(params);
            EXPECT_TRUE(report.optimal_met)
                << "K=" << user_count << " scheme=" << static_cast<int>(scheme);
        }
    }
}

TEST(Rates, DuplicatedKeySymbolIsFlaggedAboveBound) {
    // A scheme that pads every user key with one extra symbol would measure
    // (2L+1)/L; that must read as above the bound, not optimal.
    const std::uint32_t len = 4;
    const RateTuple padded = rates_from_counts(len, len, 2 * len + 1, 3 * len, len);
    const RateTuple optimal = optimal_region(3, Scheme::NoDropout);
    OptimalityReport report{padded, optimal, padded == optimal};
    EXPECT_FALSE(report.optimal_met);
    EXPECT_EQ(report.verdict(padded.user_key, optimal.user_key), RateVerdict::AboveBound);
    EXPECT_EQ(padded.user_key, Rational(9, 4));
}

TEST(Rates, TamperedDownlinkCountIsNotOptimal) {
    const std::uint32_t len = 8;
    const RateTuple tampered = rates_from_counts(len, len - 1, 2 * len, 4 * len, len);
    const RateTuple optimal = optimal_region(4, Scheme::NoDropout);
    OptimalityReport report{tampered, optimal, tampered == optimal};
    EXPECT_FALSE(report.optimal_met);
    EXPECT_EQ(report.verdict(tampered.downlink, optimal.downlink), RateVerdict::BelowBound);
}

TEST(Rates, ReportRendersVerdicts) {
    const SessionParams params(3, FieldSpec(5), 2, Scheme::DropoutTolerant);
    const OptimalityReport report = verify_optimality(params);
    const std::string text = report.to_text();
    EXPECT_NE(text.find("uplink rate"), std::string::npos);
    EXPECT_NE(text.find("meets the optimal region"), std::string::npos);
}

TEST(Rates, ZeroLengthIsRejected) {
    EXPECT_THROW(rates_from_counts(1, 1, 2, 2, 0), ConfigError);
}

}  // namespace
}  // namespace oblivagg
