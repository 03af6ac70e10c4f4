#pragma once

#include <boost/rational.hpp>
#include <cstdint>
#include <string>

#include "oblivagg/dealer.hpp"

namespace oblivagg {

using Rational = boost::rational<std::uint64_t>;

/// Symbols consumed per sum symbol: uplink message, downlink message,
/// per-user key, and source key.
struct RateTuple {
    Rational uplink;      // R_X
    Rational downlink;    // R_Y
    Rational user_key;    // R_Z
    Rational source_key;  // R_Z_sigma

    friend bool operator==(const RateTuple&, const RateTuple&) = default;
};

/// Builds the tuple from raw symbol counts, dividing by the input length
/// as exact rationals.
RateTuple rates_from_counts(std::uint64_t uplink_symbols, std::uint64_t downlink_symbols,
                            std::uint64_t user_key_symbols, std::uint64_t source_key_symbols,
                            std::uint32_t input_len);

/// Measures the rates a session actually pays by serializing real
/// artifacts (wire payloads and key files) and counting their elements.
/// This audits the implementation: silent padding would show up here.
RateTuple measure_rates(const SessionParams& params);

/// The scheme-optimal lower-bound tuple: (1, 1, 2, K) without dropouts,
/// (1, 1, K, K) with them.
RateTuple optimal_region(std::uint32_t user_count, Scheme scheme);

enum class RateVerdict { Optimal, AboveBound, BelowBound };

struct OptimalityReport {
    RateTuple measured;
    RateTuple optimal;
    bool optimal_met = false;

    RateVerdict verdict(const Rational& measured_rate, const Rational& optimal_rate) const;
    std::string to_text() const;
};

/// True iff the measured tuple equals the optimal tuple exactly.
OptimalityReport verify_optimality(const SessionParams& params);

}  // namespace oblivagg
