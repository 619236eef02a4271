#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "xfp/lloyd.hpp"

namespace xfp {

// Fixed packing schemes. Values fill each word from the least significant
// bits upward (slot 0 lowest); reserve bits stay zero and double as a
// corruption canary on unpack.
struct PackingScheme {
    int n_bits;
    int values_per_word;
    int word_bits; // 16 or 32
    int used_bits;
    int reserve_bits;

    friend bool operator==(const PackingScheme&, const PackingScheme&) = default;
};

inline constexpr std::array<PackingScheme, 5> kPackingSchemes = {{
    {2, 16, 32, 32, 0},
    {3, 10, 32, 30, 2},
    {4, 8, 32, 32, 0},
    {5, 3, 16, 15, 1},
    {6, 5, 32, 30, 2},
}};

inline const PackingScheme& scheme_for(int n_bits) {
    for (const PackingScheme& s : kPackingSchemes) {
        if (s.n_bits == n_bits) {
            return s;
        }
    }
    throw std::invalid_argument("unsupported bit width: " + std::to_string(n_bits));
}

// Packed index words. Words of 16-bit schemes stay below 2^16 and serialize
// as two bytes each.
struct PackedIndices {
    std::vector<std::uint32_t> words;
    PackingScheme scheme{};
    std::size_t element_count = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;

    friend bool operator==(const PackedIndices&, const PackedIndices&) = default;
};

inline std::size_t packed_word_count(std::size_t element_count, const PackingScheme& s) {
    return (element_count + static_cast<std::size_t>(s.values_per_word) - 1) /
           static_cast<std::size_t>(s.values_per_word);
}

// Row-major traversal; value at slot s occupies bits [s*N, (s+1)*N) of its
// word. The final partial word is zero-padded.
inline PackedIndices pack(const IndexMatrix& indices, int n_bits) {
    const PackingScheme& s = scheme_for(n_bits);
    const std::uint32_t limit = 1u << n_bits;
    PackedIndices out;
    out.scheme = s;
    out.element_count = indices.numel();
    out.rows = indices.rows;
    out.cols = indices.cols;
    out.words.assign(packed_word_count(out.element_count, s), 0);
    for (std::size_t i = 0; i < indices.idx.size(); ++i) {
        const std::uint32_t v = indices.idx[i];
        if (v >= limit) {
            throw std::invalid_argument("pack: index out of range for bit width");
        }
        const std::size_t word = i / static_cast<std::size_t>(s.values_per_word);
        const std::size_t slot = i % static_cast<std::size_t>(s.values_per_word);
        out.words[word] |= v << (slot * static_cast<std::size_t>(n_bits));
    }
    return out;
}

// Inverse of pack. Nonzero reserve bits or nonzero trailing slots signal
// corruption.
inline IndexMatrix unpack(const PackedIndices& packed) {
    const PackingScheme& s = packed.scheme;
    if (packed.element_count != packed.rows * packed.cols) {
        throw std::invalid_argument("unpack: element count does not match shape");
    }
    if (packed.words.size() != packed_word_count(packed.element_count, s)) {
        throw std::runtime_error("unpack: word count does not match element count");
    }
    const std::uint32_t word_mask =
        s.word_bits == 32 ? 0xFFFFFFFFu : ((1u << s.word_bits) - 1u);
    const std::uint32_t used_mask =
        s.used_bits == 32 ? 0xFFFFFFFFu : ((1u << s.used_bits) - 1u);
    const std::uint32_t value_mask = (1u << s.n_bits) - 1u;

    IndexMatrix im;
    im.rows = packed.rows;
    im.cols = packed.cols;
    im.n_bits = s.n_bits;
    im.idx.resize(packed.element_count);
    for (std::size_t w = 0; w < packed.words.size(); ++w) {
        const std::uint32_t word = packed.words[w];
        if ((word & ~word_mask) != 0 || (word & word_mask & ~used_mask) != 0) {
            throw std::runtime_error("unpack: nonzero reserve bits (corrupt data)");
        }
        const std::size_t base = w * static_cast<std::size_t>(s.values_per_word);
        for (int slot = 0; slot < s.values_per_word; ++slot) {
            const std::uint32_t v = (word >> (slot * s.n_bits)) & value_mask;
            const std::size_t i = base + static_cast<std::size_t>(slot);
            if (i < packed.element_count) {
                im.idx[i] = static_cast<std::uint8_t>(v);
            } else if (v != 0) {
                throw std::runtime_error("unpack: nonzero trailing slots (corrupt data)");
            }
        }
    }
    return im;
}

// Decode-kernel lane geometry for the shared-library mode: a warp walks each
// group with group_size / values_per_word lanes, and warpSize must divide
// evenly into whole groups per iteration.
struct LaneGeometry {
    bool admissible = false;
    int lanes_per_group = 0;
    int cb_per_iter = 0;

    friend bool operator==(const LaneGeometry&, const LaneGeometry&) = default;
};

inline constexpr int kWarpSize = 32;

inline LaneGeometry v2a_lane_geometry(int n_bits, std::size_t group_size) {
    const PackingScheme& s = scheme_for(n_bits);
    const auto vpw = static_cast<std::size_t>(s.values_per_word);
    LaneGeometry g;
    if (group_size == 0 || group_size % vpw != 0) {
        return g;
    }
    const std::size_t lanes = group_size / vpw;
    if (lanes > kWarpSize || kWarpSize % lanes != 0) {
        return g;
    }
    g.admissible = true;
    g.lanes_per_group = static_cast<int>(lanes);
    g.cb_per_iter = static_cast<int>(kWarpSize / lanes);
    return g;
}

} // namespace xfp
