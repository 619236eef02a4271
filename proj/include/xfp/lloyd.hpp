#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "xfp/detail/parallel.hpp"
#include "xfp/half.hpp"
#include "xfp/tensor.hpp"

namespace xfp {

// Per-channel scalar codebook of 2^N fp16 entries, sorted ascending.
struct ChannelCodebook {
    std::vector<Half> entries;

    std::vector<float> entry_floats() const {
        std::vector<float> out(entries.size());
        for (std::size_t i = 0; i < entries.size(); ++i) {
            out[i] = entries[i].to_float();
        }
        return out;
    }

    friend bool operator==(const ChannelCodebook&, const ChannelCodebook&) = default;
};

// One codebook per output channel.
struct ChannelCodebookSet {
    std::vector<ChannelCodebook> codebooks;
    int n_bits = 0;

    friend bool operator==(const ChannelCodebookSet&, const ChannelCodebookSet&) = default;
};

// Dense matrix of codebook indices in [0, 2^N).
struct IndexMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    int n_bits = 0;
    std::vector<std::uint8_t> idx; // row-major

    std::size_t numel() const noexcept { return rows * cols; }
    std::uint8_t at(std::size_t r, std::size_t c) const { return idx[r * cols + c]; }
    std::uint8_t& at(std::size_t r, std::size_t c) { return idx[r * cols + c]; }

    friend bool operator==(const IndexMatrix&, const IndexMatrix&) = default;
};

namespace detail {

// Nearest value in a sorted array, ties to the lower index.
inline std::size_t nearest_sorted(std::span<const double> sorted, double v) {
    const auto it = std::lower_bound(sorted.begin(), sorted.end(), v);
    if (it == sorted.begin()) {
        return 0;
    }
    if (it == sorted.end()) {
        return sorted.size() - 1;
    }
    const std::size_t hi = static_cast<std::size_t>(it - sorted.begin());
    const std::size_t lo = hi - 1;
    return (sorted[hi] - v < v - sorted[lo]) ? hi : lo;
}

inline std::size_t nearest_sorted_f(std::span<const float> sorted, double v) {
    const auto it = std::lower_bound(sorted.begin(), sorted.end(), v);
    if (it == sorted.begin()) {
        return 0;
    }
    if (it == sorted.end()) {
        return sorted.size() - 1;
    }
    const std::size_t hi = static_cast<std::size_t>(it - sorted.begin());
    const std::size_t lo = hi - 1;
    return (static_cast<double>(sorted[hi]) - v < v - static_cast<double>(sorted[lo])) ? hi : lo;
}

// CDF-uniform quantile initialization: entry j sits at probability
// (j + 0.5) / size, interpolated linearly between order statistics
// (h = p*n - 0.5 convention).
inline std::vector<double> quantile_init(std::span<const float> values, std::size_t size) {
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    std::vector<double> entries(size);
    for (std::size_t j = 0; j < size; ++j) {
        const double p = (static_cast<double>(j) + 0.5) / static_cast<double>(size);
        double h = p * n - 0.5;
        h = std::clamp(h, 0.0, n - 1.0);
        const auto lo = static_cast<std::size_t>(h);
        const double frac = h - static_cast<double>(lo);
        const double a = sorted[lo];
        const double b = sorted[std::min(lo + 1, sorted.size() - 1)];
        entries[j] = a + frac * (b - a);
    }
    return entries;
}

inline void check_codebook_size(std::size_t size) {
    if (size < 2 || (size & (size - 1)) != 0) {
        throw std::invalid_argument("codebook size must be a power of two >= 2");
    }
}

inline ChannelCodebook to_fp16_sorted(std::vector<double> entries) {
    ChannelCodebook cb;
    cb.entries.reserve(entries.size());
    for (double e : entries) {
        cb.entries.push_back(Half::from_float(static_cast<float>(e)));
    }
    std::sort(cb.entries.begin(), cb.entries.end(),
              [](Half a, Half b) { return a.to_float() < b.to_float(); });
    return cb;
}

} // namespace detail

inline ChannelCodebook init_codebook(std::span<const float> channel_values, std::size_t size) {
    if (channel_values.empty()) {
        throw std::invalid_argument("init_codebook: empty channel");
    }
    detail::check_codebook_size(size);
    return detail::to_fp16_sorted(detail::quantile_init(channel_values, size));
}

struct LloydResult {
    ChannelCodebook codebook;
    std::vector<double> sse_per_round; // non-increasing
};

// Lloyd iteration: quantile init, then `iters` rounds of nearest-neighbor
// assignment and conditional-mean update. Empty cells keep their previous
// centroid. No randomness anywhere, so identical inputs give bit-identical
// codebooks. binary16 rounding is applied once at the end.
inline LloydResult lloyd_fit_traced(std::span<const float> channel_values, std::size_t size,
                                    int iters) {
    if (channel_values.empty()) {
        throw std::invalid_argument("lloyd_fit: empty channel");
    }
    if (iters < 0) {
        throw std::invalid_argument("lloyd_fit: negative iteration count");
    }
    detail::check_codebook_size(size);

    std::vector<double> centroids = detail::quantile_init(channel_values, size);
    std::sort(centroids.begin(), centroids.end());

    LloydResult result;
    std::vector<std::uint8_t> assign(channel_values.size());
    std::vector<double> sums(size);
    std::vector<std::size_t> counts(size);

    for (int round = 0; round < iters; ++round) {
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < channel_values.size(); ++i) {
            const double v = channel_values[i];
            const std::size_t a = detail::nearest_sorted(centroids, v);
            assign[i] = static_cast<std::uint8_t>(a);
            sums[a] += v;
            ++counts[a];
        }
        bool moved = false;
        for (std::size_t j = 0; j < size; ++j) {
            if (counts[j] > 0) {
                const double mean = sums[j] / static_cast<double>(counts[j]);
                if (mean != centroids[j]) {
                    moved = true;
                }
                centroids[j] = mean;
            }
        }
        double sse = 0.0;
        for (std::size_t i = 0; i < channel_values.size(); ++i) {
            const double d = static_cast<double>(channel_values[i]) - centroids[assign[i]];
            sse += d * d;
        }
        result.sse_per_round.push_back(sse);
        std::sort(centroids.begin(), centroids.end());
        if (!moved) {
            break; // converged; remaining rounds are no-ops
        }
    }

    result.codebook = detail::to_fp16_sorted(std::move(centroids));
    return result;
}

inline ChannelCodebook lloyd_fit(std::span<const float> channel_values, std::size_t size,
                                 int iters) {
    return lloyd_fit_traced(channel_values, size, iters).codebook;
}

// Fit one codebook per output channel of the bulk. Channel fits are
// independent and fan out across workers.
inline ChannelCodebookSet fit_channel_codebooks(const BulkMatrix& bulk, int n_bits, int iters) {
    if (n_bits < 1 || n_bits > 8) {
        throw std::invalid_argument("fit_channel_codebooks: unsupported bit width");
    }
    ChannelCodebookSet set;
    set.n_bits = n_bits;
    set.codebooks.resize(bulk.rows());
    const std::size_t size = std::size_t{1} << n_bits;
    detail::parallel_for(bulk.rows(), [&](std::size_t r) {
        set.codebooks[r] = lloyd_fit(bulk.row(r), size, iters);
    });
    return set;
}

// Nearest codebook entry per element, ties to the lower index.
inline IndexMatrix assign_indices(const BulkMatrix& bulk, const ChannelCodebookSet& cbs) {
    if (cbs.codebooks.size() != bulk.rows()) {
        throw std::invalid_argument("assign_indices: codebook count != rows");
    }
    IndexMatrix im;
    im.rows = bulk.rows();
    im.cols = bulk.cols();
    im.n_bits = cbs.n_bits;
    im.idx.resize(bulk.numel());
    detail::parallel_for(bulk.rows(), [&](std::size_t r) {
        const std::vector<float> entries = cbs.codebooks[r].entry_floats();
        const auto row = bulk.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) {
            im.idx[r * im.cols + c] =
                static_cast<std::uint8_t>(detail::nearest_sorted_f(entries, row[c]));
        }
    });
    return im;
}

// Codebook gather: the V2 bulk reconstruction.
inline WeightMatrix decode_channels(const ChannelCodebookSet& cbs, const IndexMatrix& im) {
    if (cbs.codebooks.size() != im.rows) {
        throw std::invalid_argument("decode_channels: codebook count != rows");
    }
    WeightMatrix out(im.rows, im.cols);
    for (std::size_t r = 0; r < im.rows; ++r) {
        const std::vector<float> entries = cbs.codebooks[r].entry_floats();
        for (std::size_t c = 0; c < im.cols; ++c) {
            const std::uint8_t i = im.at(r, c);
            if (i >= entries.size()) {
                throw std::invalid_argument("decode_channels: index out of range");
            }
            out.at(r, c) = entries[i];
        }
    }
    return out;
}

} // namespace xfp
