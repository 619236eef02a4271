#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <limits>

#include "xfp/half.hpp"
#include "xfp/philox.hpp"

using namespace xfp;

TEST(Half, KnownPatterns) {
    EXPECT_EQ(float_to_half_bits(0.0f), 0x0000);
    EXPECT_EQ(float_to_half_bits(-0.0f), 0x8000);
    EXPECT_EQ(float_to_half_bits(1.0f), 0x3C00);
    EXPECT_EQ(float_to_half_bits(-1.0f), 0xBC00);
    EXPECT_EQ(float_to_half_bits(2.0f), 0x4000);
    EXPECT_EQ(float_to_half_bits(0.5f), 0x3800);
    EXPECT_EQ(float_to_half_bits(65504.0f), 0x7BFF); // max finite
    EXPECT_EQ(float_to_half_bits(std::ldexp(1.0f, -24)), 0x0001); // min subnormal

    EXPECT_FLOAT_EQ(half_bits_to_float(0x3C00), 1.0f);
    EXPECT_FLOAT_EQ(half_bits_to_float(0xC000), -2.0f);
    EXPECT_FLOAT_EQ(half_bits_to_float(0x7BFF), 65504.0f);
    EXPECT_FLOAT_EQ(half_bits_to_float(0x0001), std::ldexp(1.0f, -24));
}

TEST(Half, RoundToNearestEven) {
    // 1 + 1.5/2048 sits exactly between 1 + 1/1024 and 1 + 2/1024 in binary16;
    // ties go to the even mantissa
    EXPECT_EQ(float_to_half_bits(1.0f + 3.0f / 2048.0f), 0x3C02);
    EXPECT_EQ(float_to_half_bits(1.0f + 1.0f / 2048.0f), 0x3C00);
    // midway between 0 and the smallest subnormal rounds to 0
    EXPECT_EQ(float_to_half_bits(std::ldexp(1.0f, -25)), 0x0000);
    EXPECT_EQ(float_to_half_bits(std::nextafter(std::ldexp(1.0f, -25), 1.0f)), 0x0001);
    // overflow boundary: 65519.996 stays finite, 65520 becomes inf
    EXPECT_EQ(float_to_half_bits(65519.0f), 0x7BFF);
    EXPECT_EQ(float_to_half_bits(65520.0f), 0x7C00);
}

TEST(Half, NanRejected) {
    EXPECT_THROW(Half::from_float(std::numeric_limits<float>::quiet_NaN()), std::invalid_argument);
    EXPECT_THROW(Half::from_bits(0x7C01), std::invalid_argument);
    EXPECT_THROW(Half::from_bits(0xFE00), std::invalid_argument);
    EXPECT_NO_THROW(Half::from_bits(0x7C00)); // inf is a valid pattern
}

TEST(Half, ExhaustiveBitRoundTrip) {
    // every non-NaN binary16 value survives widening and re-narrowing exactly
    for (std::uint32_t b = 0; b <= 0xFFFF; ++b) {
        const auto bits = static_cast<std::uint16_t>(b);
        if (is_nan_half_bits(bits)) {
            continue;
        }
        const float f = half_bits_to_float(bits);
        EXPECT_EQ(float_to_half_bits(f), bits) << "bits 0x" << std::hex << b;
    }
}

TEST(Half, RandomRepresentableRoundTrip) {
    const PhiloxStream rng(2024);
    for (std::uint64_t i = 0; i < 20000; ++i) {
        const auto bits = static_cast<std::uint16_t>(rng.uint64(0, i, 0) & 0xFFFF);
        if (is_nan_half_bits(bits) || (bits & 0x7C00u) == 0x7C00u) {
            continue; // skip nan and inf
        }
        const float x = half_bits_to_float(bits);
        EXPECT_EQ(round_to_half(x), x);
    }
}

TEST(Half, Ulp) {
    EXPECT_FLOAT_EQ(half_ulp(Half::from_float(1.0f)), std::ldexp(1.0f, -10));
    EXPECT_FLOAT_EQ(half_ulp(Half::from_float(0.0f)), std::ldexp(1.0f, -24));
    EXPECT_FLOAT_EQ(half_ulp(Half::from_float(4096.0f)), 4.0f);
    // spacing bound: |x - round(x)| <= ulp/2 for in-range values
    const PhiloxStream rng(7);
    for (std::uint64_t i = 0; i < 1000; ++i) {
        const float x = static_cast<float>(rng.uniform(0, i) * 100.0 - 50.0);
        const Half h = Half::from_float(x);
        EXPECT_LE(std::abs(h.to_float() - x), 0.5f * half_ulp(h));
    }
}
