#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace oblivagg {

/// Deterministic generator backed by a ChaCha20 keystream. The same seed
/// always yields the same stream, which is what the auditor, the session
/// harness, and every scripted CLI invocation rely on for replay.
///
/// Instances are single-owner: move them, do not share across threads.
class DeterministicRng {
public:
    explicit DeterministicRng(std::uint64_t seed);

    /// Seeds from the OS entropy pool (opt-in; scripted runs want seeds).
    static DeterministicRng from_os_entropy();

    std::uint64_t next_u64();

    /// Uniform draw in [0, bound) by masked rejection; bound must be > 0.
    std::uint64_t below(std::uint64_t bound);

    DeterministicRng(const DeterministicRng&) = delete;
    DeterministicRng& operator=(const DeterministicRng&) = delete;
    DeterministicRng(DeterministicRng&&) = default;
    DeterministicRng& operator=(DeterministicRng&&) = default;

private:
    DeterministicRng() = default;
    void refill();

    std::array<unsigned char, 32> key_{};
    std::uint64_t next_block_ = 0;
    std::array<unsigned char, 4096> buf_{};
    std::size_t pos_ = buf_.size();
};

}  // namespace oblivagg
