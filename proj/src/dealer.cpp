#include "oblivagg/dealer.hpp"

#include <cstring>
#include <string>
#include <utility>

#include "oblivagg/errors.hpp"

namespace oblivagg {

namespace {

constexpr char kMagic[4] = {'O', 'B', 'K', 'Y'};

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

std::uint32_t read_le32(std::span<const std::uint8_t> bytes, std::size_t offset) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) {
        v = (v << 8) | bytes[offset + static_cast<std::size_t>(i)];
    }
    return v;
}

std::uint64_t read_le64(std::span<const std::uint8_t> bytes, std::size_t offset) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | bytes[offset + static_cast<std::size_t>(i)];
    }
    return v;
}

constexpr std::size_t kHeaderBytes = 4 + 1 + 1 + 4 + 4 + 8;

std::vector<std::uint8_t> encode_key_header(const SessionParams& params) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    out.push_back(kKeyFileVersion);
    out.push_back(static_cast<std::uint8_t>(params.scheme));
    append_le32(out, params.user_count);
    append_le32(out, params.input_len);
    append_le64(out, params.spec.modulus());
    return out;
}

// Validates the fixed header against the session and returns the offset of
// the first element byte.
std::size_t check_key_header(std::span<const std::uint8_t> bytes, const SessionParams& params) {
    if (bytes.size() < kHeaderBytes) {
        throw WireFormatError("key file shorter than its header");
    }
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw WireFormatError("bad key file magic");
    }
    if (bytes[4] != kKeyFileVersion) {
        throw WireFormatError("unsupported key file version " + std::to_string(bytes[4]));
    }
    if (bytes[5] != static_cast<std::uint8_t>(params.scheme)) {
        throw WireFormatError("key file scheme does not match session");
    }
    if (read_le32(bytes, 6) != params.user_count) {
        throw WireFormatError("key file user count does not match session");
    }
    if (read_le32(bytes, 10) != params.input_len) {
        throw WireFormatError("key file input length does not match session");
    }
    if (read_le64(bytes, 14) != params.spec.modulus()) {
        throw WireFormatError("key file modulus does not match session");
    }
    return kHeaderBytes;
}

void check_noise_shape(const SourceKey& src, const SessionParams& params) {
    if (src.noise.size() != params.user_count) {
        throw LengthMismatchError("source key holds " + std::to_string(src.noise.size()) +
                                  " noise vectors, session has " +
                                  std::to_string(params.user_count) + " users");
    }
    for (const FieldVector& n : src.noise) {
        if (n.spec() != params.spec) {
            throw SpecMismatchError("source key field does not match session");
        }
        if (n.size() != params.input_len) {
            throw LengthMismatchError("noise vector length " + std::to_string(n.size()) +
                                      " does not match session length " +
                                      std::to_string(params.input_len));
        }
    }
}

}  // namespace

SessionParams::SessionParams(std::uint32_t user_count_, FieldSpec spec_, std::uint32_t input_len_,
                             Scheme scheme_, bool broadcast_reply_)
    : user_count(user_count_),
      spec(spec_),
      input_len(input_len_),
      scheme(scheme_),
      broadcast_reply(broadcast_reply_) {
    if (user_count < 2) {
        throw ConfigError("sessions need at least 2 users, got " + std::to_string(user_count));
    }
    if (input_len < 1) {
        throw ConfigError("sessions need input length >= 1");
    }
}

std::size_t SourceKey::symbol_count() const {
    std::size_t n = 0;
    for (const FieldVector& v : noise) {
        n += v.size();
    }
    return n;
}

Scheme UserKey::scheme() const {
    return std::holds_alternative<NoDropoutKey>(payload) ? Scheme::NoDropout
                                                         : Scheme::DropoutTolerant;
}

std::size_t UserKey::symbol_count() const {
    if (const auto* nd = std::get_if<NoDropoutKey>(&payload)) {
        return nd->own_noise.size() + nd->noise_total.size();
    }
    const auto& dt = std::get<DropoutTolerantKey>(payload);
    std::size_t n = 0;
    for (const FieldVector& v : dt.all_noise) {
        n += v.size();
    }
    return n;
}

SourceKey generate_source_key(const SessionParams& params, DeterministicRng& rng) {
    SourceKey src;
    src.noise.reserve(params.user_count);
    for (std::uint32_t k = 0; k < params.user_count; ++k) {
        src.noise.push_back(sample_uniform(params.spec, params.input_len, rng));
    }
    return src;
}

UserKey derive_user_key(const SourceKey& src, std::uint32_t user_id, const SessionParams& params) {
    if (user_id < 1 || user_id > params.user_count) {
        throw ConfigError("user id " + std::to_string(user_id) + " is outside 1.." +
                          std::to_string(params.user_count));
    }
    check_noise_shape(src, params);

    if (params.scheme == Scheme::NoDropout) {
        return UserKey{user_id,
                       NoDropoutKey{src.noise[user_id - 1], sum_vectors(src.noise)}};
    }
    return UserKey{user_id, DropoutTolerantKey{src.noise}};
}

std::vector<std::uint8_t> encode_source_key(const SourceKey& src, const SessionParams& params) {
    check_noise_shape(src, params);
    std::vector<std::uint8_t> out = encode_key_header(params);
    for (const FieldVector& n : src.noise) {
        pack_elements(n, out);
    }
    return out;
}

SourceKey decode_source_key(std::span<const std::uint8_t> bytes, const SessionParams& params) {
    std::size_t offset = check_key_header(bytes, params);
    SourceKey src;
    src.noise.reserve(params.user_count);
    for (std::uint32_t k = 0; k < params.user_count; ++k) {
        src.noise.push_back(unpack_elements(params.spec, params.input_len, bytes, offset));
    }
    if (offset != bytes.size()) {
        throw WireFormatError("trailing bytes after source key payload");
    }
    return src;
}

std::vector<std::uint8_t> encode_user_key(const UserKey& key, const SessionParams& params) {
    if (key.scheme() != params.scheme) {
        throw KeyMismatchError("user key scheme does not match session");
    }
    std::vector<std::uint8_t> out = encode_key_header(params);
    if (const auto* nd = std::get_if<NoDropoutKey>(&key.payload)) {
        pack_elements(nd->own_noise, out);
        pack_elements(nd->noise_total, out);
    } else {
        for (const FieldVector& n : std::get<DropoutTolerantKey>(key.payload).all_noise) {
            pack_elements(n, out);
        }
    }
    return out;
}

UserKey decode_user_key(std::span<const std::uint8_t> bytes, std::uint32_t user_id,
                        const SessionParams& params) {
    if (user_id < 1 || user_id > params.user_count) {
        throw ConfigError("user id " + std::to_string(user_id) + " is outside 1.." +
                          std::to_string(params.user_count));
    }
    std::size_t offset = check_key_header(bytes, params);
    std::variant<NoDropoutKey, DropoutTolerantKey> payload = [&] {
        if (params.scheme == Scheme::NoDropout) {
            FieldVector own = unpack_elements(params.spec, params.input_len, bytes, offset);
            FieldVector total = unpack_elements(params.spec, params.input_len, bytes, offset);
            return std::variant<NoDropoutKey, DropoutTolerantKey>(
                NoDropoutKey{std::move(own), std::move(total)});
        }
        DropoutTolerantKey dt;
        dt.all_noise.reserve(params.user_count);
        for (std::uint32_t k = 0; k < params.user_count; ++k) {
            dt.all_noise.push_back(unpack_elements(params.spec, params.input_len, bytes, offset));
        }
        return std::variant<NoDropoutKey, DropoutTolerantKey>(std::move(dt));
    }();
    if (offset != bytes.size()) {
        throw WireFormatError("trailing bytes after user key payload");
    }
    return UserKey{user_id, std::move(payload)};
}

}  // namespace oblivagg
