#include "oblivagg/field.hpp"

#include <bit>
#include <initializer_list>
#include <string>
#include <utility>

namespace oblivagg {

namespace {

std::uint64_t mul_mod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
    return static_cast<std::uint64_t>((static_cast<__uint128_t>(a) * b) % m);
}

std::uint64_t pow_mod(std::uint64_t base, std::uint64_t exp, std::uint64_t m) {
    std::uint64_t acc = 1 % m;
    base %= m;
    while (exp > 0) {
        if (exp & 1) {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    return acc;
}

// Witnesses proving 64-bit primality deterministically.
constexpr std::initializer_list<std::uint64_t> kWitnesses = {2,  3,  5,  7,  11, 13,
                                                             17, 19, 23, 29, 31, 37};

void require_same_shape(const FieldVector& a, const FieldVector& b) {
    if (a.spec() != b.spec()) {
        throw SpecMismatchError("field moduli differ: " + std::to_string(a.spec().modulus()) +
                                " vs " + std::to_string(b.spec().modulus()));
    }
    if (a.size() != b.size()) {
        throw LengthMismatchError("vector lengths differ: " + std::to_string(a.size()) + " vs " +
                                  std::to_string(b.size()));
    }
}

}  // namespace

bool FieldSpec::is_prime(std::uint64_t n) noexcept {
    if (n < 2) {
        return false;
    }
    for (std::uint64_t p : kWitnesses) {
        if (n % p == 0) {
            return n == p;
        }
    }
    std::uint64_t d = n - 1;
    int r = 0;
    while ((d & 1) == 0) {
        d >>= 1;
        ++r;
    }
    for (std::uint64_t a : kWitnesses) {
        std::uint64_t x = pow_mod(a, d, n);
        if (x == 1 || x == n - 1) {
            continue;
        }
        bool composite = true;
        for (int i = 1; i < r; ++i) {
            x = mul_mod(x, x, n);
            if (x == n - 1) {
                composite = false;
                break;
            }
        }
        if (composite) {
            return false;
        }
    }
    return true;
}

FieldSpec::FieldSpec(std::uint64_t modulus) : q_(modulus) {
    if (!is_prime(modulus)) {
        throw ConfigError("modulus " + std::to_string(modulus) + " is not prime");
    }
}

std::size_t FieldSpec::element_bytes() const noexcept {
    return (static_cast<std::size_t>(std::bit_width(q_ - 1)) + 7) / 8;
}

FieldVector::FieldVector(FieldSpec spec, std::vector<std::uint64_t> elems)
    : spec_(spec), elems_(std::move(elems)) {
    for (std::uint64_t e : elems_) {
        if (e >= spec_.modulus()) {
            throw ConfigError("element " + std::to_string(e) + " is not a canonical residue mod " +
                              std::to_string(spec_.modulus()));
        }
    }
}

FieldVector FieldVector::zeros(FieldSpec spec, std::size_t length) {
    return FieldVector(spec, std::vector<std::uint64_t>(length, 0));
}

FieldVector add(const FieldVector& a, const FieldVector& b) {
    require_same_shape(a, b);
    const std::uint64_t q = a.spec().modulus();
    std::vector<std::uint64_t> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::uint64_t x = a[i];
        const std::uint64_t y = b[i];
        // x + y can overflow 64 bits for moduli near 2^64; rearrange instead.
        out[i] = x >= q - y && y != 0 ? x - (q - y) : x + y;
    }
    return FieldVector(a.spec(), std::move(out));
}

FieldVector sub(const FieldVector& a, const FieldVector& b) {
    require_same_shape(a, b);
    const std::uint64_t q = a.spec().modulus();
    std::vector<std::uint64_t> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::uint64_t x = a[i];
        const std::uint64_t y = b[i];
        out[i] = x >= y ? x - y : q - (y - x);
    }
    return FieldVector(a.spec(), std::move(out));
}

FieldVector sum_vectors(std::span<const FieldVector> vs) {
    if (vs.empty()) {
        throw EmptyAggregateError("cannot sum zero vectors");
    }
    FieldVector acc = vs.front();
    for (std::size_t i = 1; i < vs.size(); ++i) {
        acc = add(acc, vs[i]);
    }
    return acc;
}

FieldVector sample_uniform(const FieldSpec& spec, std::size_t length, DeterministicRng& rng) {
    const std::uint64_t q = spec.modulus();
    const int bits = std::bit_width(q - 1);
    const std::uint64_t mask = bits >= 64 ? ~0ULL : (1ULL << bits) - 1;
    std::vector<std::uint64_t> out(length);
    for (std::size_t i = 0; i < length; ++i) {
        std::uint64_t r;
        do {
            r = rng.next_u64() & mask;
        } while (r >= q);
        out[i] = r;
    }
    return FieldVector(spec, std::move(out));
}

void pack_elements(const FieldVector& v, std::vector<std::uint8_t>& out) {
    const std::size_t width = v.spec().element_bytes();
    for (std::uint64_t e : v.elems()) {
        for (std::size_t b = 0; b < width; ++b) {
            out.push_back(static_cast<std::uint8_t>(e >> (8 * b)));
        }
    }
}

FieldVector unpack_elements(const FieldSpec& spec, std::size_t length,
                            std::span<const std::uint8_t> bytes, std::size_t& offset) {
    const std::size_t width = spec.element_bytes();
    if (bytes.size() < offset || bytes.size() - offset < length * width) {
        throw WireFormatError("truncated element data: need " + std::to_string(length * width) +
                              " bytes, have " + std::to_string(bytes.size() - offset));
    }
    std::vector<std::uint64_t> out(length);
    for (std::size_t i = 0; i < length; ++i) {
        std::uint64_t e = 0;
        for (std::size_t b = width; b-- > 0;) {
            e = (e << 8) | bytes[offset + i * width + b];
        }
        if (e >= spec.modulus()) {
            throw WireFormatError("element " + std::to_string(e) + " is outside the field mod " +
                                  std::to_string(spec.modulus()));
        }
        out[i] = e;
    }
    offset += length * width;
    return FieldVector(spec, std::move(out));
}

}  // namespace oblivagg
