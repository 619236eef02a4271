#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace xfp {

// IEEE 754 binary16 <-> binary32 conversion, round-to-nearest-even.
// Software path only, so results are bit-identical on every platform.

inline std::uint16_t float_to_half_bits(float value) noexcept {
    const std::uint32_t bits = std::bit_cast<std::uint32_t>(value);
    const std::uint32_t sign = (bits >> 16) & 0x8000u;
    int e = static_cast<int>((bits >> 23) & 0xFFu) - 112;
    std::uint32_t m = bits & 0x007FFFFFu;
    if (e <= 0) {
        if (e < -10) {
            return static_cast<std::uint16_t>(sign); // underflows to signed zero
        }
        // subnormal half: shift with round-to-nearest-even
        m |= 0x00800000u;
        const int t = 14 - e;
        const std::uint32_t a = (1u << (t - 1)) - 1;
        const std::uint32_t b = (m >> t) & 1u;
        return static_cast<std::uint16_t>(sign | ((m + a + b) >> t));
    }
    if (e == 143) { // inf or nan
        if (m == 0) {
            return static_cast<std::uint16_t>(sign | 0x7C00u);
        }
        m >>= 13;
        return static_cast<std::uint16_t>(sign | 0x7C00u | m | (m == 0));
    }
    m = m + 0x00000FFFu + ((m >> 13) & 1u);
    if (m & 0x00800000u) {
        m = 0;
        ++e;
    }
    if (e > 30) {
        return static_cast<std::uint16_t>(sign | 0x7C00u); // overflow to inf
    }
    return static_cast<std::uint16_t>(sign | (static_cast<std::uint32_t>(e) << 10) | (m >> 13));
}

inline float half_bits_to_float(std::uint16_t h) noexcept {
    const std::uint32_t sign = (static_cast<std::uint32_t>(h) & 0x8000u) << 16;
    std::uint32_t e = (h >> 10) & 0x1Fu;
    std::uint32_t m = h & 0x3FFu;
    if (e == 0) {
        if (m == 0) {
            return std::bit_cast<float>(sign);
        }
        // renormalize subnormal
        e = 113;
        while ((m & 0x400u) == 0) {
            m <<= 1;
            --e;
        }
        m &= 0x3FFu;
        return std::bit_cast<float>(sign | (e << 23) | (m << 13));
    }
    if (e == 31) {
        return std::bit_cast<float>(sign | 0x7F800000u | (m << 13));
    }
    return std::bit_cast<float>(sign | ((e + 112) << 23) | (m << 13));
}

inline bool is_nan_half_bits(std::uint16_t h) noexcept {
    return (h & 0x7C00u) == 0x7C00u && (h & 0x3FFu) != 0;
}

// 16-bit storage scalar. NaN patterns are rejected at construction; every
// Half therefore widens to a non-NaN binary32.
class Half {
public:
    constexpr Half() = default;

    static Half from_float(float v) {
        if (std::isnan(v)) {
            throw std::invalid_argument("Half: NaN rejected");
        }
        return Half(float_to_half_bits(v));
    }

    static Half from_bits(std::uint16_t b) {
        if (is_nan_half_bits(b)) {
            throw std::invalid_argument("Half: NaN bit pattern rejected");
        }
        return Half(b);
    }

    float to_float() const noexcept { return half_bits_to_float(bits_); }
    std::uint16_t bits() const noexcept { return bits_; }

    friend bool operator==(Half, Half) = default;

private:
    explicit constexpr Half(std::uint16_t b) : bits_(b) {}
    std::uint16_t bits_ = 0;
};

// Round a binary32 value through the binary16 grid.
inline float round_to_half(float v) {
    return Half::from_float(v).to_float();
}

// Grid spacing of binary16 at the magnitude of h.
inline float half_ulp(Half h) noexcept {
    const std::uint32_t e = (h.bits() >> 10) & 0x1Fu;
    if (e == 0) {
        return std::ldexp(1.0f, -24);
    }
    if (e == 31) {
        return std::numeric_limits<float>::infinity();
    }
    return std::ldexp(1.0f, static_cast<int>(e) - 25);
}

} // namespace xfp
