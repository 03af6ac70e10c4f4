#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "oblivagg/dealer.hpp"
#include "oblivagg/protocol.hpp"

namespace oblivagg {

// All wire integers are little-endian, fixed width, no padding.

enum class FrameType : std::uint8_t {
    PhaseOne = 0x01,
    PhaseTwo = 0x02,
    SessionHello = 0x03,
};

/// Length-prefixed envelope: length u32 (payload bytes), type u8, payload.
struct Frame {
    FrameType type;
    std::vector<std::uint8_t> payload;

    friend bool operator==(const Frame&, const Frame&) = default;
};

std::vector<std::uint8_t> encode_frame(const Frame& frame);
/// Decodes one whole frame; trailing bytes are an error.
Frame decode_frame(std::span<const std::uint8_t> bytes);

/// Writes one frame to a byte stream; the same codec, usable over any
/// iostream (a socket streambuf included).
void write_frame(std::ostream& out, const Frame& frame);
/// Reads one frame; nullopt on clean end-of-stream, error on truncation.
std::optional<Frame> read_frame(std::istream& in);

// Payload layout: user_id u32, then the masked input's packed elements.
std::vector<std::uint8_t> encode_phase_one(const PhaseOneMsg& msg, const SessionParams& params);
PhaseOneMsg decode_phase_one(std::span<const std::uint8_t> bytes, const SessionParams& params);

// Payload layout: survivor count u32, survivor ids u32 each (strictly
// ascending), then the masked sum's packed elements.
std::vector<std::uint8_t> encode_phase_two(const PhaseTwoMsg& msg, const SessionParams& params);
PhaseTwoMsg decode_phase_two(std::span<const std::uint8_t> bytes, const SessionParams& params);

/// Session announcement: version u8, scheme u8, K u32, L u32, q u64.
struct SessionHello {
    std::uint8_t version = 1;
    Scheme scheme = Scheme::NoDropout;
    std::uint32_t user_count = 0;
    std::uint32_t input_len = 0;
    std::uint64_t modulus = 0;

    static SessionHello for_session(const SessionParams& params);

    friend bool operator==(const SessionHello&, const SessionHello&) = default;
};

std::vector<std::uint8_t> encode_session_hello(const SessionHello& hello);
SessionHello decode_session_hello(std::span<const std::uint8_t> bytes);

/// Which users leave, and when. A user in `before_send` never reaches the
/// server, so it is absent from the survivor set; this is the drop the
/// formal model describes (the server simply never receives that uplink).
/// A user in `after_send` is counted as a survivor but is gone by the time
/// the reply arrives, so it produces no decoded sum.
struct DropPlan {
    std::set<std::uint32_t> before_send;
    std::set<std::uint32_t> after_send;
};

enum class TransportKind {
    /// Frames move through in-memory buffers.
    InProcess,
    /// Frames are written to and re-read from byte streams.
    ByteStream,
};

struct SessionOutcome {
    SurvivorSet survivors;
    /// Decoded survivor sums keyed by user id; after-send dropped users are
    /// absent.
    std::map<std::uint32_t, FieldVector> decoded;

    friend bool operator==(const SessionOutcome&, const SessionOutcome&) = default;
};

/// Runs one full exchange: deal keys from the seed, collect phase one in
/// user-id order (minus before-send drops), close, fan the reply out
/// (broadcast or unicast per the session flag), and decode. Every message
/// crosses the wire codec. Deterministic given (params, inputs, plan, seed).
SessionOutcome run_session(const SessionParams& params, std::span<const FieldVector> inputs,
                           const DropPlan& plan, std::uint64_t seed,
                           TransportKind transport = TransportKind::InProcess);

}  // namespace oblivagg
