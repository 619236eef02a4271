#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <tuple>
#include <utility>
#include <vector>

#include "xfp/half.hpp"
#include "xfp/tensor.hpp"

namespace xfp {

struct OutlierEntry {
    std::int64_t row = 0;
    std::int64_t col = 0;
    Half value; // raw weight after extraction, residual after finalize_residuals

    friend bool operator==(const OutlierEntry&, const OutlierEntry&) = default;
};

// Sparse half-precision residual triples plus the extraction parameters that
// produced them. Entries are kept sorted by (row, col).
struct OutlierSet {
    std::vector<OutlierEntry> entries;
    double k = 4.0;
    double cap_fraction = 0.02;
    double mu_used = 0.0;
    double sigma_used = 0.0;

    friend bool operator==(const OutlierSet&, const OutlierSet&) = default;
};

enum class ResidualConvention : std::uint8_t {
    add = 0,       // decode scatter-adds stored residuals onto the bulk decode
    overwrite = 1, // decode overwrites with stored raw values
};

// Split W into a cleaned bulk and the set of positions with |w - mu| > k*sigma.
// If more than floor(cap_fraction * numel) positions qualify, the largest
// |w - mu| win; ties break on (row, col). Extracted positions are replaced by
// mu in the bulk. sigma == 0 extracts nothing.
inline std::pair<BulkMatrix, OutlierSet> extract_outliers(const WeightMatrix& w, double k,
                                                          double cap_fraction) {
    if (!(k > 0.0)) {
        throw std::invalid_argument("extract_outliers: k must be positive");
    }
    if (cap_fraction < 0.0 || cap_fraction > 1.0) {
        throw std::invalid_argument("extract_outliers: cap_fraction outside [0, 1]");
    }
    const MatrixStats stats = matrix_stats(w);
    OutlierSet set;
    set.k = k;
    set.cap_fraction = cap_fraction;
    set.mu_used = stats.mean;
    set.sigma_used = stats.stddev;

    BulkMatrix bulk = w;
    if (stats.stddev == 0.0) {
        return {std::move(bulk), std::move(set)};
    }

    struct Candidate {
        double dev;
        std::size_t r, c;
    };
    const double threshold = k * stats.stddev;
    std::vector<Candidate> candidates;
    for (std::size_t r = 0; r < w.rows(); ++r) {
        for (std::size_t c = 0; c < w.cols(); ++c) {
            const double dev = std::abs(static_cast<double>(w.at(r, c)) - stats.mean);
            if (dev > threshold) {
                candidates.push_back({dev, r, c});
            }
        }
    }

    const std::size_t cap =
        static_cast<std::size_t>(std::floor(cap_fraction * static_cast<double>(w.numel())));
    if (candidates.size() > cap) {
        std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
            if (a.dev != b.dev) {
                return a.dev > b.dev;
            }
            return std::tie(a.r, a.c) < std::tie(b.r, b.c);
        });
        candidates.resize(cap);
        std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
            return std::tie(a.r, a.c) < std::tie(b.r, b.c);
        });
    }

    const float mu_f = static_cast<float>(stats.mean);
    set.entries.reserve(candidates.size());
    for (const Candidate& cand : candidates) {
        set.entries.push_back({static_cast<std::int64_t>(cand.r), static_cast<std::int64_t>(cand.c),
                               Half::from_float(w.at(cand.r, cand.c))});
        bulk.at(cand.r, cand.c) = mu_f;
    }
    return {std::move(bulk), std::move(set)};
}

// Replace each entry's value with the half-precision residual against the
// codebook-only reconstruction, so that scatter-adding the set onto the bulk
// decode reproduces W at outlier positions within one binary16 ulp.
inline OutlierSet finalize_residuals(OutlierSet outliers, const WeightMatrix& w,
                                     const WeightMatrix& bulk_recon) {
    if (!w.same_shape(bulk_recon)) {
        throw std::invalid_argument("finalize_residuals: shape mismatch");
    }
    for (OutlierEntry& e : outliers.entries) {
        if (e.row < 0 || e.col < 0 || static_cast<std::size_t>(e.row) >= w.rows() ||
            static_cast<std::size_t>(e.col) >= w.cols()) {
            throw std::invalid_argument("finalize_residuals: position outside matrix");
        }
        const auto r = static_cast<std::size_t>(e.row);
        const auto c = static_cast<std::size_t>(e.col);
        e.value = Half::from_float(w.at(r, c) - bulk_recon.at(r, c));
    }
    return outliers;
}

// Apply the outlier path to a bulk reconstruction, in place.
inline void apply_outliers(WeightMatrix& recon, const OutlierSet& outliers,
                           ResidualConvention convention) {
    for (const OutlierEntry& e : outliers.entries) {
        const auto r = static_cast<std::size_t>(e.row);
        const auto c = static_cast<std::size_t>(e.col);
        if (r >= recon.rows() || c >= recon.cols()) {
            throw std::invalid_argument("apply_outliers: position outside matrix");
        }
        if (convention == ResidualConvention::add) {
            recon.at(r, c) += e.value.to_float();
        } else {
            recon.at(r, c) = e.value.to_float();
        }
    }
}

// 18 bytes per triple: int64 row, int64 col, fp16 value.
inline std::size_t outlier_bytes(const OutlierSet& outliers) noexcept {
    return 18 * outliers.entries.size();
}

} // namespace xfp
