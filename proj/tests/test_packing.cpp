#include <gtest/gtest.h>

#include <cstdint>
#include <set>

#include "xfp/packing.hpp"
#include "xfp/philox.hpp"

using namespace xfp;

namespace {

IndexMatrix make_indices(std::size_t rows, std::size_t cols, int n_bits,
                         std::uint64_t seed) {
    const PhiloxStream rng(seed);
    IndexMatrix im;
    im.rows = rows;
    im.cols = cols;
    im.n_bits = n_bits;
    im.idx.resize(rows * cols);
    const std::uint64_t limit = 1u << n_bits;
    for (std::size_t i = 0; i < im.idx.size(); ++i) {
        im.idx[i] = static_cast<std::uint8_t>(rng.uint64(0, i, 0) % limit);
    }
    return im;
}

} // namespace

TEST(PackingScheme, TableConstants) {
    // the five schemes, exactly
    const PackingScheme expected[] = {
        {2, 16, 32, 32, 0}, {3, 10, 32, 30, 2}, {4, 8, 32, 32, 0},
        {5, 3, 16, 15, 1},  {6, 5, 32, 30, 2},
    };
    ASSERT_EQ(kPackingSchemes.size(), 5u);
    for (const PackingScheme& e : expected) {
        const PackingScheme& s = scheme_for(e.n_bits);
        EXPECT_EQ(s, e);
        EXPECT_EQ(s.used_bits, s.n_bits * s.values_per_word);
        EXPECT_EQ(s.used_bits + s.reserve_bits, s.word_bits);
    }
    EXPECT_THROW(scheme_for(1), std::invalid_argument);
    EXPECT_THROW(scheme_for(7), std::invalid_argument);
    EXPECT_THROW(scheme_for(8), std::invalid_argument);
}

TEST(Pack, HandBitLayout) {
    IndexMatrix im;
    im.rows = 1;
    im.cols = 8;
    im.n_bits = 4;
    im.idx = {1, 2, 3, 4, 5, 6, 7, 8};
    const PackedIndices p = pack(im, 4);
    ASSERT_EQ(p.words.size(), 1u);
    EXPECT_EQ(p.words[0], 0x87654321u);
    EXPECT_EQ(unpack(p), im);
}

TEST(Pack, TenIndicesOneWordAtN3) {
    IndexMatrix im;
    im.rows = 1;
    im.cols = 10;
    im.n_bits = 3;
    im.idx.assign(10, 7);
    const PackedIndices p = pack(im, 3);
    ASSERT_EQ(p.words.size(), 1u);
    EXPECT_EQ(p.words[0] >> 30, 0u); // top two bits are reserve
    EXPECT_EQ(p.words[0], 0x3FFFFFFFu);
}

TEST(Pack, AllZeros) {
    for (int n : {2, 3, 4, 5, 6}) {
        IndexMatrix im;
        im.rows = 3;
        im.cols = 17;
        im.n_bits = n;
        im.idx.assign(51, 0);
        const PackedIndices p = pack(im, n);
        for (std::uint32_t w : p.words) {
            EXPECT_EQ(w, 0u);
        }
        EXPECT_EQ(unpack(p), im);
    }
}

TEST(Pack, WordCountFormula) {
    for (int n : {2, 3, 4, 5, 6}) {
        const PackingScheme& s = scheme_for(n);
        const IndexMatrix im = make_indices(5, 23, n, 77);
        const PackedIndices p = pack(im, n);
        const std::size_t expected =
            (im.numel() + static_cast<std::size_t>(s.values_per_word) - 1) /
            static_cast<std::size_t>(s.values_per_word);
        EXPECT_EQ(p.words.size(), expected);
        // bits per weight at full words: word_bits / values_per_word >= N
        EXPECT_GE(static_cast<double>(s.word_bits) / s.values_per_word, double(n));
    }
}

TEST(Pack, U16SchemeStaysBelow16Bits) {
    const IndexMatrix im = make_indices(4, 9, 5, 3);
    const PackedIndices p = pack(im, 5);
    for (std::uint32_t w : p.words) {
        EXPECT_LT(w, 0x10000u);
    }
    EXPECT_EQ(unpack(p), im);
}

TEST(Pack, RoundTripRandom) {
    for (int n : {2, 3, 4, 5, 6}) {
        for (std::uint64_t t = 0; t < 500; ++t) {
            const std::size_t rows = 1 + static_cast<std::size_t>(t % 7);
            const std::size_t cols = 1 + static_cast<std::size_t>((t * 13) % 41);
            const IndexMatrix im = make_indices(rows, cols, n, t * 31 + n);
            EXPECT_EQ(unpack(pack(im, n)), im);
        }
    }
}

TEST(Pack, ErrorPaths) {
    IndexMatrix im = make_indices(2, 8, 2, 5);
    im.idx[3] = 4; // out of range for N=2
    EXPECT_THROW(pack(im, 2), std::invalid_argument);
    im.idx[3] = 1;
    EXPECT_THROW(pack(im, 7), std::invalid_argument);
}

TEST(Unpack, ReserveBitCorruptionDetected) {
    const IndexMatrix im = make_indices(2, 10, 3, 9);
    PackedIndices p = pack(im, 3);
    p.words[0] |= 0x40000000u; // poke a reserve bit
    EXPECT_THROW(unpack(p), std::runtime_error);
}

TEST(Unpack, TrailingSlotCorruptionDetected) {
    const IndexMatrix im = make_indices(1, 9, 4, 11); // 8 slots/word -> 1 trailing
    PackedIndices p = pack(im, 4);
    ASSERT_EQ(p.words.size(), 2u);
    p.words[1] |= 0xF0u; // second slot of the final word is past the end
    EXPECT_THROW(unpack(p), std::runtime_error);
}

TEST(Unpack, EmptyEdge) {
    IndexMatrix im;
    im.rows = 1;
    im.cols = 1;
    im.n_bits = 2;
    im.idx = {3};
    const PackedIndices p = pack(im, 2);
    EXPECT_EQ(p.words.size(), 1u);
    EXPECT_EQ(unpack(p), im);
}

TEST(LaneGeometry, PaperValues) {
    const LaneGeometry g4 = v2a_lane_geometry(4, 128);
    EXPECT_TRUE(g4.admissible);
    EXPECT_EQ(g4.lanes_per_group, 16);
    EXPECT_EQ(g4.cb_per_iter, 2);

    const LaneGeometry g2 = v2a_lane_geometry(2, 128);
    EXPECT_TRUE(g2.admissible);
    EXPECT_EQ(g2.lanes_per_group, 8);
    EXPECT_EQ(g2.cb_per_iter, 4);

    EXPECT_FALSE(v2a_lane_geometry(3, 128).admissible); // 128 mod 10 != 0

    const LaneGeometry g380 = v2a_lane_geometry(3, 80);
    EXPECT_TRUE(g380.admissible);
    EXPECT_EQ(g380.lanes_per_group, 8);
    EXPECT_EQ(g380.cb_per_iter, 4);
}

TEST(LaneGeometry, AdmissibleSetAt128) {
    std::set<int> admissible;
    for (int n : {2, 3, 4, 5, 6}) {
        if (v2a_lane_geometry(n, 128).admissible) {
            admissible.insert(n);
        }
    }
    EXPECT_EQ(admissible, (std::set<int>{2, 4}));
}

TEST(LaneGeometry, Constraints) {
    EXPECT_FALSE(v2a_lane_geometry(2, 0).admissible);
    // lanes would exceed the warp: 2048 / 16 = 128 > 32
    EXPECT_FALSE(v2a_lane_geometry(2, 2048).admissible);
    // divisible but warp does not split evenly: 48 / 16 = 3 lanes, 32 mod 3 != 0
    EXPECT_FALSE(v2a_lane_geometry(2, 48).admissible);
    EXPECT_THROW(v2a_lane_geometry(9, 128), std::invalid_argument);
}
