#include "oblivagg/dealer.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cstdint>
#include <vector>

#include "oblivagg/errors.hpp"
#include "oblivagg/field.hpp"
#include "oblivagg/rng.hpp"

namespace oblivagg {
namespace {

FieldVector vec(std::uint64_t q, std::vector<std::uint64_t> elems) {
    return FieldVector(FieldSpec(q), std::move(elems));
}

SourceKey noise_135(Scheme scheme) {
    // N = ([1],[2],[3]) over F_5, K=3, L=1.
    (void)scheme;
    SourceKey src;
    src.noise = {vec(5, {1}), vec(5, {2}), vec(5, {3})};
    return src;
}

TEST(SessionParams, EnforcesModelBounds) {
    EXPECT_THROW(SessionParams(1, FieldSpec(5), 1, Scheme::NoDropout), ConfigError);
    EXPECT_THROW(SessionParams(3, FieldSpec(5), 0, Scheme::NoDropout), ConfigError);
    EXPECT_NO_THROW(SessionParams(2, FieldSpec(2), 1, Scheme::DropoutTolerant));
}

TEST(Dealer, SourceKeyIsReproducible) {
    const SessionParams params(3, FieldSpec(5), 1, Scheme::NoDropout);
    DeterministicRng a(7);
    DeterministicRng b(7);
    const SourceKey ka = generate_source_key(params, a);
    const SourceKey kb = generate_source_key(params, b);
    ASSERT_EQ(ka.noise.size(), 3U);
    EXPECT_EQ(ka.noise, kb.noise);
}

TEST(Dealer, SourceKeySymbolCountIsUserCountTimesLength) {
    const std::array<std::pair<std::uint32_t, std::uint32_t>, 3> grid = {
        std::pair<std::uint32_t, std::uint32_t>{2, 1}, {3, 4}, {5, 16}};
    for (auto [k, l] : grid) {
        const SessionParams params(k, FieldSpec(7), l, Scheme::NoDropout);
        DeterministicRng rng(1);
        const SourceKey src = generate_source_key(params, rng);
        EXPECT_EQ(src.symbol_count(), static_cast<std::size_t>(k) * l);
    }
}

// Joint chi-square over the 4 cells of (N_1, N_2) at q=2; df=3, alpha=0.001.
TEST(Dealer, NoisePairIsJointlyUniform) {
    const SessionParams params(2, FieldSpec(2), 1, Scheme::NoDropout);
    DeterministicRng rng(31337);
    constexpr int kTrials = 100000;
    std::array<std::uint64_t, 4> cells{};
    for (int t = 0; t < kTrials; ++t) {
        const SourceKey src = generate_source_key(params, rng);
        ++cells[src.noise[0][0] * 2 + src.noise[1][0]];
    }
    const double expected = kTrials / 4.0;
    double chi2 = 0.0;
    for (std::uint64_t c : cells) {
        const double d = static_cast<double>(c) - expected;
        chi2 += d * d / expected;
    }
    EXPECT_LT(chi2, 16.266);
}

TEST(Dealer, NoDropoutKeyHoldsOwnNoiseAndTotal) {
    const SessionParams params(3, FieldSpec(5), 1, Scheme::NoDropout);
    const UserKey z1 = derive_user_key(noise_135(params.scheme), 1, params);
    const auto& payload = std::get<NoDropoutKey>(z1.payload);
    EXPECT_EQ(payload.own_noise, vec(5, {1}));
    EXPECT_EQ(payload.noise_total, vec(5, {1}));  // 1+2+3 = 6 = 1 mod 5
    EXPECT_EQ(z1.symbol_count(), 2U);
}

TEST(Dealer, DropoutTolerantKeyHoldsEveryNoiseVector) {
    const SessionParams params(3, FieldSpec(5), 1, Scheme::DropoutTolerant);
    const UserKey z2 = derive_user_key(noise_135(params.scheme), 2, params);
    const auto& payload = std::get<DropoutTolerantKey>(z2.payload);
    const std::vector<FieldVector> expected = {vec(5, {1}), vec(5, {2}), vec(5, {3})};
    EXPECT_EQ(payload.all_noise, expected);
    EXPECT_EQ(z2.symbol_count(), 3U);
}

TEST(Dealer, AllZeroNoiseGivesAllZeroKeys) {
    const SessionParams params(3, FieldSpec(5), 1, Scheme::NoDropout);
    SourceKey src;
    src.noise = {vec(5, {0}), vec(5, {0}), vec(5, {0})};
    for (std::uint32_t k = 1; k <= 3; ++k) {
        const UserKey key = derive_user_key(src, k, params);
        const auto& payload = std::get<NoDropoutKey>(key.payload);
        EXPECT_EQ(payload.own_noise, vec(5, {0}));
        EXPECT_EQ(payload.noise_total, vec(5, {0}));
    }
}

TEST(Dealer, DerivationIsAPureFunction) {
    const SessionParams params(3, FieldSpec(97), 4, Scheme::DropoutTolerant);
    DeterministicRng rng(11);
    const SourceKey src = generate_source_key(params, rng);
    const UserKey a = derive_user_key(src, 2, params);
    const UserKey b = derive_user_key(src, 2, params);
    EXPECT_EQ(std::get<DropoutTolerantKey>(a.payload).all_noise,
              std::get<DropoutTolerantKey>(b.payload).all_noise);
    EXPECT_EQ(a.user_id, b.user_id);
}

TEST(Dealer, NoiseTotalAgreesAcrossUsers) {
    const SessionParams params(4, FieldSpec(11), 3, Scheme::NoDropout);
    DeterministicRng rng(5);
    const SourceKey src = generate_source_key(params, rng);
    const UserKey first = derive_user_key(src, 1, params);
    const FieldVector& total = std::get<NoDropoutKey>(first.payload).noise_total;
    for (std::uint32_t k = 2; k <= 4; ++k) {
        const UserKey key = derive_user_key(src, k, params);
        EXPECT_EQ(std::get<NoDropoutKey>(key.payload).noise_total, total);
    }
}

TEST(Dealer, KeySymbolAccountingIsExact) {
    for (std::uint32_t k : {2U, 3U, 5U}) {
        for (std::uint32_t l : {1U, 4U}) {
            DeterministicRng rng(k * 100 + l);
            const SessionParams nd(k, FieldSpec(13), l, Scheme::NoDropout);
            const SourceKey src = generate_source_key(nd, rng);
            EXPECT_EQ(derive_user_key(src, 1, nd).symbol_count(), 2ULL * l);
            EXPECT_EQ(src.symbol_count(), static_cast<std::size_t>(k) * l);

            const SessionParams dt(k, FieldSpec(13), l, Scheme::DropoutTolerant);
            EXPECT_EQ(derive_user_key(src, 1, dt).symbol_count(),
                      static_cast<std::size_t>(k) * l);
        }
    }
}

TEST(Dealer, RejectsOutOfRangeUserId) {
    const SessionParams params(3, FieldSpec(5), 1, Scheme::NoDropout);
    const SourceKey src = noise_135(params.scheme);
    EXPECT_THROW(derive_user_key(src, 0, params), ConfigError);
    EXPECT_THROW(derive_user_key(src, 4, params), ConfigError);
}

TEST(KeyFiles, GoldenHeaderAndPayload) {
    const SessionParams params(3, FieldSpec(5), 1, Scheme::NoDropout);
    const std::vector<std::uint8_t> bytes = encode_source_key(noise_135(params.scheme), params);
    const std::vector<std::uint8_t> expected = {
        'O',  'B',  'K',  'Y',              // magic
        0x01,                               // version
        0x00,                               // scheme
        0x03, 0x00, 0x00, 0x00,             // K
        0x01, 0x00, 0x00, 0x00,             // L
        0x05, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,  // q
        0x01, 0x02, 0x03,                   // N_1, N_2, N_3
    };
    EXPECT_EQ(bytes, expected);
}

TEST(KeyFiles, SourceKeyRoundTrip) {
    const SessionParams params(4, FieldSpec(257), 3, Scheme::DropoutTolerant);
    DeterministicRng rng(21);
    const SourceKey src = generate_source_key(params, rng);
    const SourceKey back = decode_source_key(encode_source_key(src, params), params);
    EXPECT_EQ(back.noise, src.noise);
}

TEST(KeyFiles, UserKeyRoundTripBothSchemes) {
    for (Scheme scheme : {Scheme::NoDropout, Scheme::DropoutTolerant}) {
        const SessionParams params(3, FieldSpec(97), 2, scheme);
        DeterministicRng rng(33);
        const SourceKey src = generate_source_key(params, rng);
        const UserKey key = derive_user_key(src, 3, params);
        const UserKey back = decode_user_key(encode_user_key(key, params), 3, params);
        EXPECT_EQ(back.user_id, 3U);
        EXPECT_EQ(back.payload, key.payload);
    }
}

TEST(KeyFiles, RejectsMalformedInput) {
    const SessionParams params(3, FieldSpec(5), 1, Scheme::NoDropout);
    std::vector<std::uint8_t> bytes = encode_source_key(noise_135(params.scheme), params);

    std::vector<std::uint8_t> bad_magic = bytes;
    bad_magic[0] = 'X';
    EXPECT_THROW(decode_source_key(bad_magic, params), WireFormatError);

    std::vector<std::uint8_t> bad_version = bytes;
    bad_version[4] = 9;
    EXPECT_THROW(decode_source_key(bad_version, params), WireFormatError);

    std::vector<std::uint8_t> wrong_scheme = bytes;
    wrong_scheme[5] = 1;
    EXPECT_THROW(decode_source_key(wrong_scheme, params), WireFormatError);

    std::vector<std::uint8_t> truncated(bytes.begin(), bytes.end() - 1);
    EXPECT_THROW(decode_source_key(truncated, params), WireFormatError);

    std::vector<std::uint8_t> trailing = bytes;
    trailing.push_back(0);
    EXPECT_THROW(decode_source_key(trailing, params), WireFormatError);

    const SessionParams other(4, FieldSpec(5), 1, Scheme::NoDropout);
    EXPECT_THROW(decode_source_key(bytes, other), WireFormatError);
}

}  // namespace
}  // namespace oblivagg
