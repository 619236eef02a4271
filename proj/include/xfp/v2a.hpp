#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "xfp/detail/parallel.hpp"
#include "xfp/half.hpp"
#include "xfp/lloyd.hpp"
#include "xfp/tensor.hpp"

namespace xfp {

// Shared per-layer library of L codebooks. Each weight group references one
// entry through a per-group affine transform: w_hat = scale * entry[idx] + mid.
struct CodebookLibrary {
    std::vector<ChannelCodebook> entries; // size L, each 2^N values sorted ascending
    int n_bits = 0;

    std::size_t size() const noexcept { return entries.size(); }
    std::size_t byte_size() const noexcept {
        return entries.size() * (std::size_t{1} << n_bits) * 2;
    }

    friend bool operator==(const CodebookLibrary&, const CodebookLibrary&) = default;
};

struct GroupAssignment {
    std::uint8_t library_index = 0;
    Half scale;
    Half mid;

    friend bool operator==(const GroupAssignment&, const GroupAssignment&) = default;
};

enum class GroupOrientation : std::uint8_t {
    rows = 0, // groups run along each channel row (contiguous input positions)
    cols = 1, // groups run down each column
};

struct LibFitResult {
    CodebookLibrary library;
    bool duplicate_centroids = false; // fewer distinct source codebooks than L
};

namespace detail {

// Zero-mean, unit max-absolute-deviation normalization. Zero-spread vectors
// map to the zero vector.
inline std::vector<double> normalize_codebook(const ChannelCodebook& cb) {
    std::vector<double> v(cb.entries.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = cb.entries[i].to_float();
        sum += v[i];
    }
    const double mean = sum / static_cast<double>(v.size());
    double dev = 0.0;
    for (double& x : v) {
        x -= mean;
        dev = std::max(dev, std::abs(x));
    }
    if (dev == 0.0) {
        std::fill(v.begin(), v.end(), 0.0);
        return v;
    }
    for (double& x : v) {
        x /= dev;
    }
    return v;
}

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double t = a[i] - b[i];
        d += t * t;
    }
    return d;
}

} // namespace detail

// LibFit: condense per-channel codebooks into a library of L representative
// codebooks via a second Lloyd pass in 2^N-dimensional space. Sources are
// normalized first; seeding is farthest-point starting from channel 0, then
// k-means rounds with empty cells retaining their centroid.
inline LibFitResult libfit(const ChannelCodebookSet& channel_codebooks, std::size_t library_size,
                           int iters) {
    const auto& sources = channel_codebooks.codebooks;
    if (sources.empty()) {
        throw std::invalid_argument("libfit: no source codebooks");
    }
    if (library_size < 1) {
        throw std::invalid_argument("libfit: library size must be >= 1");
    }
    if (iters < 0) {
        throw std::invalid_argument("libfit: negative iteration count");
    }

    std::vector<std::vector<double>> points(sources.size());
    for (std::size_t i = 0; i < sources.size(); ++i) {
        points[i] = detail::normalize_codebook(sources[i]);
    }
    const std::size_t dim = points[0].size();

    LibFitResult result;
    {
        auto distinct = points;
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        result.duplicate_centroids = distinct.size() < library_size;
    }

    // farthest-point seeding
    std::vector<std::vector<double>> centroids;
    centroids.reserve(library_size);
    centroids.push_back(points[0]);
    std::vector<double> min_dist(points.size(), std::numeric_limits<double>::infinity());
    while (centroids.size() < library_size) {
        const auto& last = centroids.back();
        std::size_t best = 0;
        double best_dist = -1.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            min_dist[i] = std::min(min_dist[i], detail::sq_dist(points[i], last));
            if (min_dist[i] > best_dist) {
                best_dist = min_dist[i];
                best = i;
            }
        }
        centroids.push_back(points[best]);
    }

    std::vector<std::size_t> assign(points.size(), 0);
    for (int round = 0; round < iters; ++round) {
        bool moved = false;
        for (std::size_t i = 0; i < points.size(); ++i) {
            std::size_t best = 0;
            double best_dist = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < centroids.size(); ++c) {
                const double d = detail::sq_dist(points[i], centroids[c]);
                if (d < best_dist) {
                    best_dist = d;
                    best = c;
                }
            }
            assign[i] = best;
        }
        std::vector<std::vector<double>> sums(centroids.size(), std::vector<double>(dim, 0.0));
        std::vector<std::size_t> counts(centroids.size(), 0);
        for (std::size_t i = 0; i < points.size(); ++i) {
            for (std::size_t d = 0; d < dim; ++d) {
                sums[assign[i]][d] += points[i][d];
            }
            ++counts[assign[i]];
        }
        for (std::size_t c = 0; c < centroids.size(); ++c) {
            if (counts[c] == 0) {
                continue; // retain previous centroid
            }
            for (std::size_t d = 0; d < dim; ++d) {
                const double mean = sums[c][d] / static_cast<double>(counts[c]);
                if (mean != centroids[c][d]) {
                    moved = true;
                }
                centroids[c][d] = mean;
            }
        }
        if (!moved) {
            break;
        }
    }

    result.library.n_bits = channel_codebooks.n_bits;
    result.library.entries.reserve(centroids.size());
    for (auto& c : centroids) {
        std::sort(c.begin(), c.end());
        result.library.entries.push_back(detail::to_fp16_sorted(std::move(c)));
    }
    return result;
}

namespace detail {

// Enumeration of 128-weight groups under either orientation. Groups never
// span a row (rows orientation) or a column (cols orientation); the last
// group of a line may be short.
struct GroupLayout {
    std::size_t rows, cols, group_size;
    GroupOrientation orientation;

    std::size_t groups_per_line() const {
        const std::size_t line = orientation == GroupOrientation::rows ? cols : rows;
        return (line + group_size - 1) / group_size;
    }

    std::size_t line_count() const {
        return orientation == GroupOrientation::rows ? rows : cols;
    }

    std::size_t group_count() const { return groups_per_line() * line_count(); }

    // members of group g as (row, col, length); positions are consecutive
    // along the line starting at `offset`
    struct Extent {
        std::size_t line;   // row index (rows orientation) or column index
        std::size_t offset; // first position within the line
        std::size_t length;
    };

    Extent extent(std::size_t group) const {
        const std::size_t per_line = groups_per_line();
        const std::size_t line = group / per_line;
        const std::size_t offset = (group % per_line) * group_size;
        const std::size_t line_len = orientation == GroupOrientation::rows ? cols : rows;
        const std::size_t length = std::min(group_size, line_len - offset);
        return {line, offset, length};
    }

    std::size_t group_of(std::size_t r, std::size_t c) const {
        if (orientation == GroupOrientation::rows) {
            return r * groups_per_line() + c / group_size;
        }
        return c * groups_per_line() + r / group_size;
    }

    float value_at(const WeightMatrix& w, const Extent& e, std::size_t i) const {
        if (orientation == GroupOrientation::rows) {
            return w.at(e.line, e.offset + i);
        }
        return w.at(e.offset + i, e.line);
    }
};

} // namespace detail

// Re-index every group to its best library entry. Per group: mid = group
// mean, scale = max |w - mid| (1 for zero-spread groups); candidate indices
// are nearest-neighbor against the fp16-rounded affine the decoder will use,
// and the entry with minimal reconstruction SSE wins (ties to the lower
// library index).
inline std::pair<std::vector<GroupAssignment>, IndexMatrix> assign_groups(
    const BulkMatrix& bulk, const CodebookLibrary& library, std::size_t group_size,
    GroupOrientation orientation = GroupOrientation::rows) {
    if (library.entries.empty()) {
        throw std::invalid_argument("assign_groups: empty library");
    }
    if (group_size < 1) {
        throw std::invalid_argument("assign_groups: group_size must be >= 1");
    }
    const detail::GroupLayout layout{bulk.rows(), bulk.cols(), group_size, orientation};

    std::vector<std::vector<float>> entry_values(library.entries.size());
    for (std::size_t l = 0; l < library.entries.size(); ++l) {
        entry_values[l] = library.entries[l].entry_floats();
    }

    IndexMatrix im;
    im.rows = bulk.rows();
    im.cols = bulk.cols();
    im.n_bits = library.n_bits;
    im.idx.resize(bulk.numel());
    std::vector<GroupAssignment> assignments(layout.group_count());

    detail::parallel_for(layout.group_count(), [&](std::size_t g) {
        const auto e = layout.extent(g);
        double sum = 0.0;
        for (std::size_t i = 0; i < e.length; ++i) {
            sum += layout.value_at(bulk, e, i);
        }
        const double mean = sum / static_cast<double>(e.length);
        double dev = 0.0;
        for (std::size_t i = 0; i < e.length; ++i) {
            dev = std::max(dev, std::abs(static_cast<double>(layout.value_at(bulk, e, i)) - mean));
        }
        const Half mid = Half::from_float(static_cast<float>(mean));
        const Half scale = Half::from_float(dev == 0.0 ? 1.0f : static_cast<float>(dev));
        const double s = scale.to_float();
        const double m = mid.to_float();

        std::size_t best_entry = 0;
        double best_sse = std::numeric_limits<double>::infinity();
        std::vector<std::uint8_t> best_idx(e.length);
        std::vector<std::uint8_t> cur_idx(e.length);
        for (std::size_t l = 0; l < entry_values.size(); ++l) {
            const auto& entries = entry_values[l];
            double sse = 0.0;
            for (std::size_t i = 0; i < e.length; ++i) {
                const double w = layout.value_at(bulk, e, i);
                const double z = (w - m) / s;
                const std::size_t idx = detail::nearest_sorted_f(entries, z);
                cur_idx[i] = static_cast<std::uint8_t>(idx);
                const double err = s * entries[idx] + m - w;
                sse += err * err;
            }
            if (sse < best_sse) {
                best_sse = sse;
                best_entry = l;
                best_idx.swap(cur_idx);
            }
        }

        assignments[g] = {static_cast<std::uint8_t>(best_entry), scale, mid};
        for (std::size_t i = 0; i < e.length; ++i) {
            if (orientation == GroupOrientation::rows) {
                im.at(e.line, e.offset + i) = best_idx[i];
            } else {
                im.at(e.offset + i, e.line) = best_idx[i];
            }
        }
    });

    return {std::move(assignments), std::move(im)};
}

// The V2a bulk reconstruction: w_hat = scale * entry[idx] + mid per group.
inline WeightMatrix decode_groups(const CodebookLibrary& library,
                                  const std::vector<GroupAssignment>& assignments,
                                  const IndexMatrix& im, std::size_t group_size,
                                  GroupOrientation orientation = GroupOrientation::rows) {
    const detail::GroupLayout layout{im.rows, im.cols, group_size, orientation};
    if (assignments.size() != layout.group_count()) {
        throw std::invalid_argument("decode_groups: assignment count mismatch");
    }
    std::vector<std::vector<float>> entry_values(library.entries.size());
    for (std::size_t l = 0; l < library.entries.size(); ++l) {
        entry_values[l] = library.entries[l].entry_floats();
    }
    WeightMatrix out(im.rows, im.cols);
    for (std::size_t r = 0; r < im.rows; ++r) {
        for (std::size_t c = 0; c < im.cols; ++c) {
            const GroupAssignment& a = assignments[layout.group_of(r, c)];
            if (a.library_index >= entry_values.size()) {
                throw std::invalid_argument("decode_groups: library index out of range");
            }
            const auto& entries = entry_values[a.library_index];
            const std::uint8_t i = im.at(r, c);
            if (i >= entries.size()) {
                throw std::invalid_argument("decode_groups: codebook index out of range");
            }
            out.at(r, c) = a.scale.to_float() * entries[i] + a.mid.to_float();
        }
    }
    return out;
}

} // namespace xfp
