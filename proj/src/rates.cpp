#include "oblivagg/rates.hpp"

#include <sstream>
#include <vector>

#include "oblivagg/errors.hpp"
#include "oblivagg/field.hpp"
#include "oblivagg/protocol.hpp"
#include "oblivagg/rng.hpp"
#include "oblivagg/transport.hpp"

namespace oblivagg {

namespace {

constexpr std::size_t kKeyFileHeaderBytes = 22;

std::uint64_t element_count(std::size_t payload_bytes, const SessionParams& params,
                            const char* what) {
    const std::size_t width = params.spec.element_bytes();
    if (payload_bytes % width != 0) {
        throw Error(std::string(what) + " payload is not a whole number of elements");
    }
    return payload_bytes / width;
}

std::string render(const Rational& r) {
    std::ostringstream out;
    if (r.denominator() == 1) {
        out << r.numerator();
    } else {
        out << r.numerator() << "/" << r.denominator();
    }
    return out.str();
}

}  // namespace

RateTuple rates_from_counts(std::uint64_t uplink_symbols, std::uint64_t downlink_symbols,
                            std::uint64_t user_key_symbols, std::uint64_t source_key_symbols,
                            std::uint32_t input_len) {
    if (input_len == 0) {
        throw ConfigError("rates are undefined for zero-length inputs");
    }
    return RateTuple{Rational(uplink_symbols, input_len), Rational(downlink_symbols, input_len),
                     Rational(user_key_symbols, input_len),
                     Rational(source_key_symbols, input_len)};
}

RateTuple measure_rates(const SessionParams& params) {
    // The counts are structural, so any seed gives the same answer; the
    // invariance is property-tested.
    DeterministicRng rng(0x0B5E55ED);
    const SourceKey src = generate_source_key(params, rng);

    std::vector<UserState> users;
    users.reserve(params.user_count);
    for (std::uint32_t k = 1; k <= params.user_count; ++k) {
        users.emplace_back(params, k, sample_uniform(params.spec, params.input_len, rng),
                           derive_user_key(src, k, params));
    }

    ServerState server(params);
    std::size_t uplink_payload_bytes = 0;
    for (UserState& user : users) {
        const PhaseOneMsg msg = user_phase_one(user);
        const std::vector<std::uint8_t> bytes = encode_phase_one(msg, params);
        uplink_payload_bytes = bytes.size() - 4;  // minus the user id
        server.receive(decode_phase_one(bytes, params));
    }

    const auto replies = server_close_and_reply(server);
    const PhaseTwoMsg& reply = replies.begin()->second;
    const std::size_t downlink_payload_bytes =
        encode_phase_two(reply, params).size() - 4 - 4 * reply.survivors.size();

    std::size_t user_key_payload_bytes = 0;
    for (std::uint32_t k = 1; k <= params.user_count; ++k) {
        const UserKey key = derive_user_key(src, k, params);
        const std::size_t bytes = encode_user_key(key, params).size() - kKeyFileHeaderBytes;
        user_key_payload_bytes = std::max(user_key_payload_bytes, bytes);
    }
    const std::size_t source_key_payload_bytes =
        encode_source_key(src, params).size() - kKeyFileHeaderBytes;

    return rates_from_counts(element_count(uplink_payload_bytes, params, "uplink"),
                             element_count(downlink_payload_bytes, params, "downlink"),
                             element_count(user_key_payload_bytes, params, "user key"),
                             element_count(source_key_payload_bytes, params, "source key"),
                             params.input_len);
}

RateTuple optimal_region(std::uint32_t user_count, Scheme scheme) {
    if (user_count < 2) {
        throw ConfigError("the rate region is defined for 2 or more users");
    }
    const Rational one(1);
    if (scheme == Scheme::NoDropout) {
        return RateTuple{one, one, Rational(2), Rational(user_count)};
    }
    return RateTuple{one, one, Rational(user_count), Rational(user_count)};
}

RateVerdict OptimalityReport::verdict(const Rational& measured_rate,
                                      const Rational& optimal_rate) const {
    if (measured_rate == optimal_rate) {
        return RateVerdict::Optimal;
    }
    return measured_rate > optimal_rate ? RateVerdict::AboveBound : RateVerdict::BelowBound;
}

std::string OptimalityReport::to_text() const {
    const auto row = [&](const char* name, const Rational& m, const Rational& o) {
        std::ostringstream out;
        const RateVerdict v = verdict(m, o);
        out << "  " << name << ": measured " << render(m) << ", optimal " << render(o) << " -> "
            << (v == RateVerdict::Optimal
                    ? "OK"
                    : v == RateVerdict::AboveBound ? "ABOVE BOUND" : "BELOW BOUND (impossible)")
            << "\n";
        return out.str();
    };
    std::string text;
    text += row("uplink rate     ", measured.uplink, optimal.uplink);
    text += row("downlink rate   ", measured.downlink, optimal.downlink);
    text += row("user key rate   ", measured.user_key, optimal.user_key);
    text += row("source key rate ", measured.source_key, optimal.source_key);
    text += optimal_met ? "  verdict: rate tuple meets the optimal region with equality\n"
                        : "  verdict: rate tuple is NOT optimal\n";
    return text;
}

OptimalityReport verify_optimality(const SessionParams& params) {
    OptimalityReport report{measure_rates(params), optimal_region(params.user_count, params.scheme),
                            false};
    report.optimal_met = report.measured == report.optimal;
    return report;
}

}  // namespace oblivagg
