#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "oblivagg/field.hpp"
#include "oblivagg/rng.hpp"

namespace oblivagg {

enum class Scheme : std::uint8_t {
    /// Keys carry (own noise, group noise total); tolerates no dropouts.
    NoDropout = 0,
    /// Every user holds all K noise vectors and can decode any survivor sum.
    DropoutTolerant = 1,
};

/// Parameters fixed for the lifetime of one aggregation session.
struct SessionParams {
    SessionParams(std::uint32_t user_count, FieldSpec spec, std::uint32_t input_len,
                  Scheme scheme, bool broadcast_reply = false);

    std::uint32_t user_count;  // K >= 2
    FieldSpec spec;
    std::uint32_t input_len;  // L >= 1
    Scheme scheme;
    /// Fan the reply out as one frame instead of K; payloads are identical
    /// either way, so this only changes transport behavior.
    bool broadcast_reply;
};

/// The dealer's master randomness: K independent uniform noise vectors.
struct SourceKey {
    std::vector<FieldVector> noise;  // N_1..N_K, each of length L

    std::size_t symbol_count() const;
};

struct NoDropoutKey {
    FieldVector own_noise;    // N_k
    FieldVector noise_total;  // sum of N_1..N_K

    friend bool operator==(const NoDropoutKey&, const NoDropoutKey&) = default;
};

struct DropoutTolerantKey {
    std::vector<FieldVector> all_noise;  // N_1..N_K

    friend bool operator==(const DropoutTolerantKey&, const DropoutTolerantKey&) = default;
};

/// Per-user key material, a pure function of the source key.
struct UserKey {
    std::uint32_t user_id = 0;  // 1-based
    std::variant<NoDropoutKey, DropoutTolerantKey> payload;

    Scheme scheme() const;
    std::size_t symbol_count() const;
};

/// Draws the K independent uniform noise vectors.
SourceKey generate_source_key(const SessionParams& params, DeterministicRng& rng);

/// Derives user k's key from the source key. Deterministic: identical
/// inputs always give identical keys.
UserKey derive_user_key(const SourceKey& src, std::uint32_t user_id, const SessionParams& params);

// --- OBKY key files -------------------------------------------------------
//
// Layout: magic "OBKY", version u8, scheme u8, K u32, L u32, q u64 (all
// little-endian), then the key's elements packed per the field wire rule.
// The file does not name its user; per-user files carry that in the name.

inline constexpr std::uint8_t kKeyFileVersion = 1;

std::vector<std::uint8_t> encode_source_key(const SourceKey& src, const SessionParams& params);
SourceKey decode_source_key(std::span<const std::uint8_t> bytes, const SessionParams& params);

std::vector<std::uint8_t> encode_user_key(const UserKey& key, const SessionParams& params);
UserKey decode_user_key(std::span<const std::uint8_t> bytes, std::uint32_t user_id,
                        const SessionParams& params);

}  // namespace oblivagg
