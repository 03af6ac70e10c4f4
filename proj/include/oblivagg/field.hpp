#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "oblivagg/errors.hpp"
#include "oblivagg/rng.hpp"

namespace oblivagg {

/// Prime modulus q of the ambient field. Construction proves primality
/// (deterministic Miller-Rabin), so a held FieldSpec is always valid.
class FieldSpec {
public:
    explicit FieldSpec(std::uint64_t modulus);

    std::uint64_t modulus() const noexcept { return q_; }

    /// Bytes one element occupies on the wire: ceil(bits(q-1) / 8).
    std::size_t element_bytes() const noexcept;

    static bool is_prime(std::uint64_t n) noexcept;

    friend bool operator==(const FieldSpec&, const FieldSpec&) = default;

private:
    std::uint64_t q_;
};

/// Vector of canonical residues in [0, q). Immutable after construction.
class FieldVector {
public:
    FieldVector(FieldSpec spec, std::vector<std::uint64_t> elems);

    static FieldVector zeros(FieldSpec spec, std::size_t length);

    const FieldSpec& spec() const noexcept { return spec_; }
    std::size_t size() const noexcept { return elems_.size(); }
    std::uint64_t operator[](std::size_t i) const { return elems_[i]; }
    std::span<const std::uint64_t> elems() const noexcept { return elems_; }

    friend bool operator==(const FieldVector&, const FieldVector&) = default;

private:
    FieldSpec spec_;
    std::vector<std::uint64_t> elems_;
};

/// Elementwise (a + b) mod q. Throws SpecMismatchError / LengthMismatchError.
FieldVector add(const FieldVector& a, const FieldVector& b);

/// Elementwise (a - b) mod q.
FieldVector sub(const FieldVector& a, const FieldVector& b);

/// Elementwise modular sum of a nonempty sequence.
FieldVector sum_vectors(std::span<const FieldVector> vs);

/// i.i.d. uniform elements via rejection sampling; no modulo bias.
FieldVector sample_uniform(const FieldSpec& spec, std::size_t length, DeterministicRng& rng);

/// Appends each element as a little-endian integer in spec.element_bytes()
/// bytes, contiguously with no padding.
void pack_elements(const FieldVector& v, std::vector<std::uint8_t>& out);

/// Reads `length` packed elements starting at `offset`, advancing it.
/// Throws WireFormatError on truncation or an element >= q.
FieldVector unpack_elements(const FieldSpec& spec, std::size_t length,
                            std::span<const std::uint8_t> bytes, std::size_t& offset);

}  // namespace oblivagg
