#include "oblivagg/rng.hpp"

#include <sodium.h>

#include <bit>
#include <mutex>
#include <stdexcept>

#include "oblivagg/errors.hpp"

namespace oblivagg {

namespace {

void ensure_sodium() {
    static std::once_flag once;
    std::call_once(once, [] {
        if (sodium_init() < 0) {
            throw Error("libsodium initialization failed");
        }
    });
}

void store_le64(unsigned char* out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out[i] = static_cast<unsigned char>(v >> (8 * i));
    }
}

}  // namespace

DeterministicRng::DeterministicRng(std::uint64_t seed) {
    ensure_sodium();
    store_le64(key_.data(), seed);
}

DeterministicRng DeterministicRng::from_os_entropy() {
    ensure_sodium();
    DeterministicRng rng;
    randombytes_buf(rng.key_.data(), rng.key_.size());
    return rng;
}

void DeterministicRng::refill() {
    static_assert(crypto_stream_chacha20_NONCEBYTES == 8);
    unsigned char nonce[crypto_stream_chacha20_NONCEBYTES];
    store_le64(nonce, next_block_++);
    crypto_stream_chacha20(buf_.data(), buf_.size(), nonce, key_.data());
    pos_ = 0;
}

std::uint64_t DeterministicRng::next_u64() {
    if (pos_ + 8 > buf_.size()) {
        refill();
    }
    // Assemble little-endian so the stream is identical on every platform.
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | buf_[pos_ + static_cast<std::size_t>(i)];
    }
    pos_ += 8;
    return v;
}

std::uint64_t DeterministicRng::below(std::uint64_t bound) {
    if (bound == 0) {
        throw ConfigError("rng bound must be positive");
    }
    if (bound == 1) {
        return 0;
    }
    const int bits = std::bit_width(bound - 1);
    const std::uint64_t mask = bits >= 64 ? ~0ULL : (1ULL << bits) - 1;
    std::uint64_t r;
    do {
        r = next_u64() & mask;
    } while (r >= bound);
    return r;
}

}  // namespace oblivagg
