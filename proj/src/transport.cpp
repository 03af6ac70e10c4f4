#include "oblivagg/transport.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>

#include "oblivagg/errors.hpp"
#include "oblivagg/rng.hpp"

namespace oblivagg {

namespace {

void append_le32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

void append_le64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

std::uint32_t read_le32(std::span<const std::uint8_t> bytes, std::size_t& offset) {
    if (bytes.size() < offset + 4) {
        throw WireFormatError("truncated u32");
    }
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) {
        v = (v << 8) | bytes[offset + static_cast<std::size_t>(i)];
    }
    offset += 4;
    return v;
}

std::uint64_t read_le64(std::span<const std::uint8_t> bytes, std::size_t& offset) {
    if (bytes.size() < offset + 8) {
        throw WireFormatError("truncated u64");
    }
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | bytes[offset + static_cast<std::size_t>(i)];
    }
    offset += 8;
    return v;
}

void require_consumed(std::span<const std::uint8_t> bytes, std::size_t offset,
                      const char* what) {
    if (offset != bytes.size()) {
        throw WireFormatError(std::string("trailing bytes after ") + what);
    }
}

bool known_frame_type(std::uint8_t tag) {
    return tag == static_cast<std::uint8_t>(FrameType::PhaseOne) ||
           tag == static_cast<std::uint8_t>(FrameType::PhaseTwo) ||
           tag == static_cast<std::uint8_t>(FrameType::SessionHello);
}

}  // namespace

std::vector<std::uint8_t> encode_frame(const Frame& frame) {
    std::vector<std::uint8_t> out;
    out.reserve(5 + frame.payload.size());
    append_le32(out, static_cast<std::uint32_t>(frame.payload.size()));
    out.push_back(static_cast<std::uint8_t>(frame.type));
    out.insert(out.end(), frame.payload.begin(), frame.payload.end());
    return out;
}

Frame decode_frame(std::span<const std::uint8_t> bytes) {
    std::size_t offset = 0;
    const std::uint32_t length = read_le32(bytes, offset);
    if (bytes.size() < offset + 1) {
        throw WireFormatError("frame missing its type tag");
    }
    const std::uint8_t tag = bytes[offset++];
    if (!known_frame_type(tag)) {
        throw WireFormatError("unknown frame type tag " + std::to_string(tag));
    }
    if (bytes.size() - offset < length) {
        throw WireFormatError("frame payload truncated: declared " + std::to_string(length) +
                              " bytes, have " + std::to_string(bytes.size() - offset));
    }
    if (bytes.size() - offset > length) {
        throw WireFormatError("frame length mismatch: trailing bytes after payload");
    }
    return Frame{static_cast<FrameType>(tag),
                 std::vector<std::uint8_t>(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                                           bytes.end())};
}

void write_frame(std::ostream& out, const Frame& frame) {
    const std::vector<std::uint8_t> bytes = encode_frame(frame);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw WireFormatError("stream write failed");
    }
}

std::optional<Frame> read_frame(std::istream& in) {
    std::uint8_t header[5];
    in.read(reinterpret_cast<char*>(header), 5);
    if (in.gcount() == 0 && in.eof()) {
        return std::nullopt;
    }
    if (in.gcount() != 5) {
        throw WireFormatError("stream ended inside a frame header");
    }
    std::size_t offset = 0;
    const std::uint32_t length = read_le32(std::span<const std::uint8_t>(header, 5), offset);
    const std::uint8_t tag = header[4];
    if (!known_frame_type(tag)) {
        throw WireFormatError("unknown frame type tag " + std::to_string(tag));
    }
    std::vector<std::uint8_t> payload(length);
    if (length > 0) {
        in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(length));
        if (static_cast<std::uint32_t>(in.gcount()) != length) {
            throw WireFormatError("stream ended inside a frame payload");
        }
    }
    return Frame{static_cast<FrameType>(tag), std::move(payload)};
}

std::vector<std::uint8_t> encode_phase_one(const PhaseOneMsg& msg, const SessionParams& params) {
    std::vector<std::uint8_t> out;
    out.reserve(4 + params.input_len * params.spec.element_bytes());
    append_le32(out, msg.user_id);
    pack_elements(msg.payload, out);
    return out;
}

PhaseOneMsg decode_phase_one(std::span<const std::uint8_t> bytes, const SessionParams& params) {
    std::size_t offset = 0;
    const std::uint32_t user_id = read_le32(bytes, offset);
    if (user_id < 1 || user_id > params.user_count) {
        throw WireFormatError("uplink user id " + std::to_string(user_id) + " is outside 1.." +
                              std::to_string(params.user_count));
    }
    FieldVector payload = unpack_elements(params.spec, params.input_len, bytes, offset);
    require_consumed(bytes, offset, "uplink payload");
    return PhaseOneMsg{user_id, std::move(payload)};
}

std::vector<std::uint8_t> encode_phase_two(const PhaseTwoMsg& msg, const SessionParams& params) {
    std::vector<std::uint8_t> out;
    append_le32(out, static_cast<std::uint32_t>(msg.survivors.size()));
    for (std::uint32_t id : msg.survivors.ids()) {
        append_le32(out, id);
    }
    pack_elements(msg.payload, out);
    return out;
}

PhaseTwoMsg decode_phase_two(std::span<const std::uint8_t> bytes, const SessionParams& params) {
    std::size_t offset = 0;
    const std::uint32_t count = read_le32(bytes, offset);
    if (count == 0) {
        throw WireFormatError("downlink survivor set is empty");
    }
    if (count > params.user_count) {
        throw WireFormatError("downlink names " + std::to_string(count) + " survivors, session has " +
                              std::to_string(params.user_count) + " users");
    }
    std::vector<std::uint32_t> ids(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        ids[i] = read_le32(bytes, offset);
        if (ids[i] < 1 || ids[i] > params.user_count) {
            throw WireFormatError("survivor id " + std::to_string(ids[i]) + " is outside 1.." +
                                  std::to_string(params.user_count));
        }
        if (i > 0 && ids[i] <= ids[i - 1]) {
            throw WireFormatError("survivor ids must be strictly ascending");
        }
    }
    FieldVector payload = unpack_elements(params.spec, params.input_len, bytes, offset);
    require_consumed(bytes, offset, "downlink payload");
    return PhaseTwoMsg{SurvivorSet(std::move(ids), params.user_count), std::move(payload)};
}

SessionHello SessionHello::for_session(const SessionParams& params) {
    return SessionHello{1, params.scheme, params.user_count, params.input_len,
                        params.spec.modulus()};
}

std::vector<std::uint8_t> encode_session_hello(const SessionHello& hello) {
    std::vector<std::uint8_t> out;
    out.push_back(hello.version);
    out.push_back(static_cast<std::uint8_t>(hello.scheme));
    append_le32(out, hello.user_count);
    append_le32(out, hello.input_len);
    append_le64(out, hello.modulus);
    return out;
}

SessionHello decode_session_hello(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 2) {
        throw WireFormatError("truncated session hello");
    }
    SessionHello hello;
    hello.version = bytes[0];
    if (bytes[1] > 1) {
        throw WireFormatError("unknown scheme byte " + std::to_string(bytes[1]));
    }
    hello.scheme = static_cast<Scheme>(bytes[1]);
    std::size_t offset = 2;
    hello.user_count = read_le32(bytes, offset);
    hello.input_len = read_le32(bytes, offset);
    hello.modulus = read_le64(bytes, offset);
    require_consumed(bytes, offset, "session hello");
    return hello;
}

namespace {

// One delivery hop. InProcess hands the encoded frame over as-is;
// ByteStream pushes it through an iostream first.
std::vector<std::uint8_t> deliver(TransportKind kind, std::vector<std::uint8_t> frame_bytes) {
    if (kind == TransportKind::InProcess) {
        return frame_bytes;
    }
    std::stringstream channel(std::ios::in | std::ios::out | std::ios::binary);
    channel.write(reinterpret_cast<const char*>(frame_bytes.data()),
                  static_cast<std::streamsize>(frame_bytes.size()));
    channel.seekg(0);
    const std::optional<Frame> frame = read_frame(channel);
    if (!frame.has_value()) {
        throw WireFormatError("stream channel lost a frame");
    }
    return encode_frame(*frame);
}

void validate_drop_plan(const DropPlan& plan, const SessionParams& params) {
    for (const auto& ids : {plan.before_send, plan.after_send}) {
        for (std::uint32_t id : ids) {
            if (id < 1 || id > params.user_count) {
                throw ConfigError("drop plan names unknown user " + std::to_string(id));
            }
        }
    }
    for (std::uint32_t id : plan.before_send) {
        if (plan.after_send.contains(id)) {
            throw ConfigError("user " + std::to_string(id) +
                              " cannot drop both before and after sending");
        }
    }
}

}  // namespace

SessionOutcome run_session(const SessionParams& params, std::span<const FieldVector> inputs,
                           const DropPlan& plan, std::uint64_t seed, TransportKind transport) {
    if (inputs.size() != params.user_count) {
        throw LengthMismatchError("got " + std::to_string(inputs.size()) + " inputs for " +
                                  std::to_string(params.user_count) + " users");
    }
    validate_drop_plan(plan, params);

    DeterministicRng rng(seed);
    const SourceKey src = generate_source_key(params, rng);
    std::vector<UserState> users;
    users.reserve(params.user_count);
    for (std::uint32_t k = 1; k <= params.user_count; ++k) {
        users.emplace_back(params, k, inputs[k - 1], derive_user_key(src, k, params));
    }

    // Phase one, in user-id order. Ordering does not affect outcomes; the
    // transport tests shuffle it to prove that.
    ServerState server(params);
    for (std::uint32_t k = 1; k <= params.user_count; ++k) {
        if (plan.before_send.contains(k)) {
            continue;
        }
        const PhaseOneMsg msg = user_phase_one(users[k - 1]);
        const std::vector<std::uint8_t> bytes = deliver(
            transport, encode_frame(Frame{FrameType::PhaseOne, encode_phase_one(msg, params)}));
        const Frame frame = decode_frame(bytes);
        server.receive(decode_phase_one(frame.payload, params));
    }

    const std::map<std::uint32_t, PhaseTwoMsg> replies = server_close_and_reply(server);
    const SurvivorSet survivors = replies.begin()->second.survivors;

    SessionOutcome outcome{survivors, {}};
    if (params.broadcast_reply) {
        // One frame for everyone; the payload is already recipient-agnostic.
        const std::vector<std::uint8_t> bytes =
            deliver(transport, encode_frame(Frame{FrameType::PhaseTwo,
                                                  encode_phase_two(replies.begin()->second,
                                                                   params)}));
        for (std::uint32_t id : survivors.ids()) {
            if (plan.after_send.contains(id)) {
                continue;
            }
            const Frame frame = decode_frame(bytes);
            outcome.decoded.emplace(id,
                                    user_decode(users[id - 1],
                                                decode_phase_two(frame.payload, params)));
        }
    } else {
        for (const auto& [id, reply] : replies) {
            if (plan.after_send.contains(id)) {
                continue;
            }
            const std::vector<std::uint8_t> bytes = deliver(
                transport, encode_frame(Frame{FrameType::PhaseTwo,
                                              encode_phase_two(reply, params)}));
            const Frame frame = decode_frame(bytes);
            outcome.decoded.emplace(id,
                                    user_decode(users[id - 1],
                                                decode_phase_two(frame.payload, params)));
        }
    }
    return outcome;
}

}  // namespace oblivagg
