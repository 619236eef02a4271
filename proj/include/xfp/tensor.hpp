#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "xfp/half.hpp"

namespace xfp {

// Dense row-major 2-D weight matrix. Rows are output channels.
// Elements are binary32 and must be finite when constructed from data.
class WeightMatrix {
public:
    WeightMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {
        check_shape(rows, cols);
        data_.assign(rows * cols, 0.0f);
    }

    WeightMatrix(std::size_t rows, std::size_t cols, std::vector<float> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        check_shape(rows, cols);
        if (data_.size() != rows * cols) {
            throw std::invalid_argument("WeightMatrix: data size does not match shape");
        }
        for (float v : data_) {
            if (!std::isfinite(v)) {
                throw std::invalid_argument("WeightMatrix: non-finite element");
            }
        }
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t numel() const noexcept { return rows_ * cols_; }

    float at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    float& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

    std::span<const float> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    std::span<const float> values() const noexcept { return data_; }
    std::span<float> values() noexcept { return data_; }

    bool same_shape(const WeightMatrix& o) const noexcept {
        return rows_ == o.rows_ && cols_ == o.cols_;
    }

    friend bool operator==(const WeightMatrix& a, const WeightMatrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    static void check_shape(std::size_t rows, std::size_t cols) {
        if (rows == 0 || cols == 0) {
            throw std::invalid_argument("WeightMatrix: shape must be at least 1x1");
        }
    }

    std::size_t rows_;
    std::size_t cols_;
    std::vector<float> data_;
};

// A weight matrix whose outlier positions have been replaced by the mean.
using BulkMatrix = WeightMatrix;

struct MatrixStats {
    double mean = 0.0;
    double stddev = 0.0; // population convention
};

// Mean and population standard deviation over the whole matrix,
// accumulated in binary64.
inline MatrixStats matrix_stats(const WeightMatrix& w) {
    double sum = 0.0;
    for (float v : w.values()) {
        sum += v;
    }
    const double mean = sum / static_cast<double>(w.numel());
    double ss = 0.0;
    for (float v : w.values()) {
        const double d = static_cast<double>(v) - mean;
        ss += d * d;
    }
    return {mean, std::sqrt(ss / static_cast<double>(w.numel()))};
}

// Cosine similarity between matching rows. Two zero rows compare as 1,
// a zero row against a nonzero one as 0.
inline std::vector<double> per_channel_cosine(const WeightMatrix& w, const WeightMatrix& w_hat) {
    if (!w.same_shape(w_hat)) {
        throw std::invalid_argument("per_channel_cosine: shape mismatch");
    }
    std::vector<double> cos(w.rows());
    for (std::size_t r = 0; r < w.rows(); ++r) {
        const auto a = w.row(r);
        const auto b = w_hat.row(r);
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (std::size_t c = 0; c < a.size(); ++c) {
            const double x = a[c];
            const double y = b[c];
            dot += x * y;
            na += x * x;
            nb += y * y;
        }
        if (na == 0.0 && nb == 0.0) {
            cos[r] = 1.0;
        } else if (na == 0.0 || nb == 0.0) {
            cos[r] = 0.0;
        } else {
            cos[r] = std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
        }
    }
    return cos;
}

inline double mse(const WeightMatrix& w, const WeightMatrix& w_hat) {
    if (!w.same_shape(w_hat)) {
        throw std::invalid_argument("mse: shape mismatch");
    }
    double acc = 0.0;
    const auto a = w.values();
    const auto b = w_hat.values();
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(w.numel());
}

// Exact statistical median; even counts take the lower of the two
// central order statistics.
inline double median_lower(std::vector<double> v) {
    if (v.empty()) {
        throw std::invalid_argument("median_lower: empty input");
    }
    const std::size_t k = (v.size() - 1) / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
    return v[k];
}

// Reconstruction quality of a codebook-only decode (bulk) and a decode with
// the outlier path applied (full), measured against the original matrix.
struct QualityReport {
    std::vector<double> per_channel_cos; // of the full reconstruction
    double median_cos = 0.0;
    double mse_bulk = 0.0;
    double mse_full = 0.0;
    double mse_ratio = 0.0; // mse_bulk / mse_full

    static QualityReport compute(const WeightMatrix& w, const WeightMatrix& bulk_recon,
                                 const WeightMatrix& full_recon) {
        QualityReport q;
        q.per_channel_cos = per_channel_cosine(w, full_recon);
        q.median_cos = median_lower(q.per_channel_cos);
        q.mse_bulk = mse(w, bulk_recon);
        q.mse_full = mse(w, full_recon);
        if (q.mse_full > 0.0) {
            q.mse_ratio = q.mse_bulk / q.mse_full;
        } else {
            // both reconstructions exact -> ratio 1; only the full one exact -> +inf
            q.mse_ratio = q.mse_bulk == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
        }
        return q;
    }
};

} // namespace xfp
