#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace xfp {

// Philox4x32-10 counter-based generator (Salmon et al., "Parallel random
// numbers: as easy as 1, 2, 3"). Every draw is a pure function of
// (seed, tag, index, attempt), which is what makes the synthetic matrices
// reproducible element-by-element regardless of evaluation order.
struct Philox4x32 {
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    static std::array<std::uint32_t, 4> block(std::uint64_t key,
                                              std::array<std::uint32_t, 4> ctr) noexcept {
        std::uint32_t k0 = static_cast<std::uint32_t>(key);
        std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ k0, lo1, hi0 ^ ctr[3] ^ k1, lo0};
            k0 += kWeyl0;
            k1 += kWeyl1;
        }
        return ctr;
    }
};

// Convenience layer that maps (tag, index, attempt) to doubles.
class PhiloxStream {
public:
    explicit PhiloxStream(std::uint64_t seed) : seed_(seed) {}

    std::array<std::uint32_t, 4> block(std::uint32_t tag, std::uint64_t index,
                                       std::uint32_t attempt) const noexcept {
        return Philox4x32::block(seed_, {static_cast<std::uint32_t>(index),
                                         static_cast<std::uint32_t>(index >> 32), attempt, tag});
    }

    std::uint64_t uint64(std::uint32_t tag, std::uint64_t index, std::uint32_t attempt) const {
        const auto b = block(tag, index, attempt);
        return (static_cast<std::uint64_t>(b[0]) << 32) | b[1];
    }

    // uniform in (0, 1), 53-bit resolution
    static double to_unit(std::uint32_t a, std::uint32_t b) noexcept {
        const std::uint64_t u = (static_cast<std::uint64_t>(a) << 32) | b;
        return (static_cast<double>(u >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(std::uint32_t tag, std::uint64_t index, std::uint32_t attempt = 0) const {
        const auto b = block(tag, index, attempt);
        return to_unit(b[0], b[1]);
    }

    // Box-Muller pair from one block
    std::pair<double, double> gaussian_pair(std::uint32_t tag, std::uint64_t index,
                                            std::uint32_t attempt = 0) const {
        const auto b = block(tag, index, attempt);
        const double u1 = to_unit(b[0], b[1]);
        const double u2 = to_unit(b[2], b[3]);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        return {r * std::cos(theta), r * std::sin(theta)};
    }

    // Student-t with 3 degrees of freedom: z / sqrt(chi2_3 / 3)
    double student_t3(std::uint32_t tag, std::uint64_t index, std::uint32_t attempt = 0) const {
        const auto [z0, z1] = gaussian_pair(tag, index, 2 * attempt);
        const auto [z2, z3] = gaussian_pair(tag, index, 2 * attempt + 1);
        const double chi2 = z1 * z1 + z2 * z2 + z3 * z3;
        return z0 / std::sqrt(std::max(chi2 / 3.0, 1e-12));
    }

private:
    std::uint64_t seed_;
};

} // namespace xfp
