#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "xfp/philox.hpp"
#include "xfp/tensor.hpp"
#include "xfp/tensor_io.hpp"

using namespace xfp;

namespace {

WeightMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                           double scale = 1.0) {
    const PhiloxStream rng(seed);
    WeightMatrix w(rows, cols);
    for (std::size_t i = 0; i < w.numel(); ++i) {
        w.values()[i] = static_cast<float>(rng.gaussian_pair(0, i).first * scale);
    }
    return w;
}

} // namespace

TEST(WeightMatrix, Invariants) {
    EXPECT_THROW(WeightMatrix(0, 4), std::invalid_argument);
    EXPECT_THROW(WeightMatrix(4, 0), std::invalid_argument);
    EXPECT_THROW(WeightMatrix(1, 2, {1.0f}), std::invalid_argument);
    EXPECT_THROW(WeightMatrix(1, 2, {1.0f, std::numeric_limits<float>::infinity()}),
                 std::invalid_argument);
    EXPECT_THROW(WeightMatrix(1, 2, {1.0f, std::numeric_limits<float>::quiet_NaN()}),
                 std::invalid_argument);
    const WeightMatrix w(2, 3, {1, 2, 3, 4, 5, 6});
    EXPECT_EQ(w.at(1, 2), 6.0f);
    EXPECT_EQ(w.row(1)[0], 4.0f);
}

TEST(Stats, ConstantMatrix) {
    const WeightMatrix w(2, 2, {1, 1, 1, 1});
    const MatrixStats s = matrix_stats(w);
    EXPECT_DOUBLE_EQ(s.mean, 1.0);
    EXPECT_DOUBLE_EQ(s.stddev, 0.0);
}

TEST(Stats, HandComputed) {
    const WeightMatrix w(2, 2, {0, 2, -2, 0});
    const MatrixStats s = matrix_stats(w);
    EXPECT_DOUBLE_EQ(s.mean, 0.0);
    EXPECT_DOUBLE_EQ(s.stddev, std::sqrt(2.0));
}

TEST(Cosine, Identical) {
    const WeightMatrix w = random_matrix(5, 16, 1);
    for (double c : per_channel_cosine(w, w)) {
        EXPECT_NEAR(c, 1.0, 1e-12);
    }
}

TEST(Cosine, OrthogonalAndScaled) {
    const WeightMatrix a(1, 2, {1, 0});
    const WeightMatrix b(1, 2, {0, 1});
    EXPECT_DOUBLE_EQ(per_channel_cosine(a, b)[0], 0.0);

    const WeightMatrix c(1, 3, {1, 2, 3});
    const WeightMatrix d(1, 3, {2, 4, 6});
    EXPECT_NEAR(per_channel_cosine(c, d)[0], 1.0, 1e-12);
}

TEST(Cosine, ZeroRows) {
    const WeightMatrix z(1, 2, {0, 0});
    const WeightMatrix nz(1, 2, {1, 2});
    EXPECT_DOUBLE_EQ(per_channel_cosine(z, z)[0], 1.0);
    EXPECT_DOUBLE_EQ(per_channel_cosine(z, nz)[0], 0.0);
    EXPECT_DOUBLE_EQ(per_channel_cosine(nz, z)[0], 0.0);
}

TEST(Cosine, ShapeMismatch) {
    const WeightMatrix a(2, 2);
    const WeightMatrix b(2, 3);
    EXPECT_THROW(per_channel_cosine(a, b), std::invalid_argument);
    EXPECT_THROW(mse(a, b), std::invalid_argument);
}

// positive per-row rescaling of either argument leaves the cosine unchanged
TEST(Cosine, ScalingInvariance) {
    const WeightMatrix w = random_matrix(8, 32, 5);
    WeightMatrix w_hat = random_matrix(8, 32, 6);
    const std::vector<double> before = per_channel_cosine(w, w_hat);
    const PhiloxStream rng(7);
    for (std::size_t r = 0; r < w_hat.rows(); ++r) {
        const auto factor = static_cast<float>(0.1 + rng.uniform(0, r) * 10.0);
        for (std::size_t c = 0; c < w_hat.cols(); ++c) {
            w_hat.at(r, c) *= factor;
        }
    }
    const std::vector<double> after = per_channel_cosine(w, w_hat);
    for (std::size_t r = 0; r < before.size(); ++r) {
        EXPECT_NEAR(before[r], after[r], 1e-6);
    }
}

TEST(Mse, Examples) {
    const WeightMatrix w = random_matrix(3, 7, 2);
    EXPECT_DOUBLE_EQ(mse(w, w), 0.0);
    EXPECT_DOUBLE_EQ(mse(WeightMatrix(1, 1, {0}), WeightMatrix(1, 1, {2})), 4.0);
}

TEST(Median, LowerConvention) {
    EXPECT_DOUBLE_EQ(median_lower({3.0}), 3.0);
    EXPECT_DOUBLE_EQ(median_lower({1.0, 2.0}), 1.0);
    EXPECT_DOUBLE_EQ(median_lower({5.0, 1.0, 3.0}), 3.0);
    EXPECT_DOUBLE_EQ(median_lower({4.0, 1.0, 3.0, 2.0}), 2.0);
    EXPECT_THROW(median_lower({}), std::invalid_argument);
}

// inserting one cos = -1 channel into a 2k+1 report moves the median by at
// most one order statistic
TEST(Median, SingleInsertionShift) {
    const PhiloxStream rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> cos(21);
        for (std::size_t i = 0; i < cos.size(); ++i) {
            cos[i] = rng.uniform(0, static_cast<std::uint64_t>(trial) * 100 + i) * 2.0 - 1.0;
        }
        std::vector<double> sorted = cos;
        std::sort(sorted.begin(), sorted.end());
        const double before = median_lower(cos);
        std::vector<double> extended = cos;
        extended.push_back(-1.0);
        const double after = median_lower(extended);
        // lower median of 22 values after prepending -1 is the order
        // statistic one below the old median
        EXPECT_LE(after, before);
        const auto pos = std::find(sorted.begin(), sorted.end(), before);
        ASSERT_NE(pos, sorted.end());
        if (pos != sorted.begin()) {
            EXPECT_GE(after, *(pos - 1));
        }
    }
}

TEST(QualityReport, Ratio) {
    const WeightMatrix w(1, 4, {1, 2, 3, 4});
    const WeightMatrix bulk(1, 4, {1, 2, 3, 6});  // mse 1.0
    const WeightMatrix full(1, 4, {1, 2, 3, 5});  // mse 0.25
    const QualityReport q = QualityReport::compute(w, bulk, full);
    EXPECT_DOUBLE_EQ(q.mse_bulk, 1.0);
    EXPECT_DOUBLE_EQ(q.mse_full, 0.25);
    EXPECT_DOUBLE_EQ(q.mse_ratio, 4.0);
    EXPECT_EQ(q.per_channel_cos.size(), 1u);

    const QualityReport exact = QualityReport::compute(w, w, w);
    EXPECT_DOUBLE_EQ(exact.mse_ratio, 1.0);
}

TEST(XwtIo, RoundTripF32) {
    const std::string path = std::filesystem::temp_directory_path() / "t_roundtrip.xwt";
    const WeightMatrix w = random_matrix(7, 13, 99);
    write_xwt(path, w);
    const WeightMatrix r = read_xwt(path);
    EXPECT_EQ(w, r);
    std::filesystem::remove(path);
}

TEST(XwtIo, RoundTripF16) {
    const std::string path = std::filesystem::temp_directory_path() / "t_roundtrip16.xwt";
    WeightMatrix w = random_matrix(4, 8, 100);
    // snap to the binary16 grid first so the roundtrip is exact
    for (float& v : w.values()) {
        v = round_to_half(v);
    }
    write_xwt(path, w, XwtDtype::f16);
    EXPECT_EQ(read_xwt(path), w);
    std::filesystem::remove(path);
}

TEST(XwtIo, BadMagicAndTruncation) {
    namespace fs = std::filesystem;
    const std::string path = fs::temp_directory_path() / "t_bad.xwt";
    {
        std::ofstream out(path, std::ios::binary);
        out << "NOPE";
    }
    EXPECT_THROW(read_xwt(path), std::runtime_error);
    const WeightMatrix w = random_matrix(2, 2, 1);
    write_xwt(path, w);
    fs::resize_file(path, 20); // chop the payload
    EXPECT_THROW(read_xwt(path), std::runtime_error);
    fs::remove(path);
}
