#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "xfp/philox.hpp"
#include "xfp/tensor.hpp"

namespace xfp {

// Target shape of a synthetic weight matrix: a unit-sigma bulk, a heavy-tail
// fraction beyond 3 sigma, and individually planted high-magnitude outliers.
struct PlantedOutlier {
    double magnitude_sigma = 0.0;
    std::size_t count = 0;

    friend bool operator==(const PlantedOutlier&, const PlantedOutlier&) = default;
};

struct DistributionProfile {
    std::string name;
    double tail_fraction_3sigma = 0.0;
    double max_abs_sigma = 3.0;
    std::vector<PlantedOutlier> planted;
    double abs_max_informational = 0.0; // reported absolute max|w|, not a contract

    friend bool operator==(const DistributionProfile&, const DistributionProfile&) = default;
};

namespace detail_synth {

struct BaseDraws {
    std::vector<double> gauss;     // N(0,1)
    std::vector<double> tail;      // Student-t(3)
    std::vector<double> uniform;   // (0,1), mixture / thinning selector
    std::vector<double> truncated; // N(0,1) conditioned on |z| <= bound
};

inline constexpr double kTruncBoundScale = 0.96; // keeps rescaled draws inside 3 sigma

inline BaseDraws draw_base(const PhiloxStream& rng, std::size_t numel, bool want_tail,
                           bool want_truncated, double trunc_bound) {
    BaseDraws d;
    d.gauss.resize(numel);
    d.uniform.resize(numel);
    if (want_tail) {
        d.tail.resize(numel);
    }
    if (want_truncated) {
        d.truncated.resize(numel);
    }
    for (std::size_t i = 0; i < numel; ++i) {
        d.gauss[i] = rng.gaussian_pair(0, i).first;
        d.uniform[i] = rng.uniform(1, i);
        if (want_tail) {
            d.tail[i] = rng.student_t3(2, i);
        }
        if (want_truncated) {
            double z = d.gauss[i];
            for (std::uint32_t attempt = 0; std::abs(z) > trunc_bound && attempt < 64; ++attempt) {
                z = rng.gaussian_pair(3, i, attempt).first;
            }
            d.truncated[i] = std::clamp(z, -trunc_bound, trunc_bound);
        }
    }
    return d;
}

inline double clamp_mag(double v, double cap) {
    return std::clamp(v, -cap, cap);
}

struct PlantSpec {
    std::size_t position;
    double value;
};

inline std::vector<PlantSpec> plant_positions(const PhiloxStream& rng,
                                              const std::vector<PlantedOutlier>& planted,
                                              std::size_t numel) {
    std::vector<PlantSpec> plants;
    std::vector<std::size_t> taken;
    std::uint64_t seq = 0;
    for (const PlantedOutlier& p : planted) {
        for (std::size_t i = 0; i < p.count; ++i, ++seq) {
            std::size_t pos = 0;
            for (std::uint32_t attempt = 0;; ++attempt) {
                pos = static_cast<std::size_t>(rng.uint64(4, seq, attempt) % numel);
                if (std::find(taken.begin(), taken.end(), pos) == taken.end()) {
                    break;
                }
            }
            taken.push_back(pos);
            const bool negative = (rng.uint64(5, seq, 0) & 1u) != 0;
            plants.push_back({pos, negative ? -p.magnitude_sigma : p.magnitude_sigma});
        }
    }
    return plants;
}

// Rescale to unit population sigma, then write the planted outliers.
inline void finish(std::vector<double>& x, const std::vector<PlantSpec>& plants) {
    double sum = 0.0;
    for (double v : x) {
        sum += v;
    }
    const double mean = sum / static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) {
        const double d = v - mean;
        ss += d * d;
    }
    const double sigma = std::sqrt(ss / static_cast<double>(x.size()));
    const double inv = sigma > 0.0 ? 1.0 / sigma : 1.0;
    for (double& v : x) {
        v = (v - mean) * inv;
    }
    for (const PlantSpec& p : plants) {
        x[p.position] = p.value;
    }
}

inline double tail_fraction(const std::vector<double>& x) {
    double sum = 0.0;
    for (double v : x) {
        sum += v;
    }
    const double mean = sum / static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) {
        const double d = v - mean;
        ss += d * d;
    }
    const double sigma = std::sqrt(ss / static_cast<double>(x.size()));
    const double threshold = 3.0 * sigma;
    std::size_t count = 0;
    for (double v : x) {
        if (std::abs(v - mean) > threshold) {
            ++count;
        }
    }
    return static_cast<double>(count) / static_cast<double>(x.size());
}

} // namespace detail_synth

// Deterministic synthetic weight matrix matching a distribution profile:
// Gaussian bulk at unit sigma, a clamped Student-t(3) mixture component tuned
// by bisection until the fraction beyond 3 sigma hits the target, planted
// outliers at their stated sigma multiples. Same (profile, dims, seed) gives
// a bit-identical matrix.
inline WeightMatrix generate(const DistributionProfile& profile, std::size_t rows,
                             std::size_t cols, std::uint64_t seed) {
    if (rows == 0 || cols == 0) {
        throw std::invalid_argument("generate: shape must be at least 1x1");
    }
    if (profile.tail_fraction_3sigma < 0.0 || profile.tail_fraction_3sigma > 1.0) {
        throw std::invalid_argument("generate: tail fraction outside [0, 1]");
    }
    if (!(profile.max_abs_sigma > 0.0)) {
        throw std::invalid_argument("generate: max_abs_sigma must be positive");
    }
    if (profile.tail_fraction_3sigma > 0.0 && profile.max_abs_sigma <= 3.0) {
        throw std::invalid_argument(
            "generate: infeasible profile (tail mass demanded below the 3 sigma cap)");
    }

    const std::size_t numel = rows * cols;
    std::size_t plant_total = 0;
    double min_plant = std::numeric_limits<double>::infinity();
    for (const PlantedOutlier& p : profile.planted) {
        if (!(p.magnitude_sigma > 0.0) || p.magnitude_sigma > profile.max_abs_sigma) {
            throw std::invalid_argument("generate: planted magnitude outside (0, max_abs_sigma]");
        }
        plant_total += p.count;
        min_plant = std::min(min_plant, p.magnitude_sigma);
    }
    if (plant_total >= numel) {
        throw std::invalid_argument("generate: more planted outliers than elements");
    }

    // tail draws stay clearly below the planted magnitudes so the planted
    // maximum stays the maximum
    double cap = profile.max_abs_sigma;
    if (plant_total > 0) {
        cap = std::min(cap, 0.5 * min_plant);
    }

    const PhiloxStream rng(seed);
    const auto plants = detail_synth::plant_positions(rng, profile.planted, numel);

    std::vector<double> x(numel);
    const double trunc_bound =
        detail_synth::kTruncBoundScale * std::min(3.0, profile.max_abs_sigma);

    if (profile.tail_fraction_3sigma == 0.0) {
        const auto base = detail_synth::draw_base(rng, numel, false, true, trunc_bound);
        x = base.truncated;
        detail_synth::finish(x, plants);
    } else {
        const auto base = detail_synth::draw_base(rng, numel, true, true, trunc_bound);
        const double target = profile.tail_fraction_3sigma;

        auto assemble_mix = [&](double p_mix, double t_scale) {
            for (std::size_t i = 0; i < numel; ++i) {
                const double v = base.uniform[i] < p_mix ? t_scale * base.tail[i] : base.gauss[i];
                x[i] = detail_synth::clamp_mag(v, cap);
            }
            detail_synth::finish(x, plants);
            return detail_synth::tail_fraction(x);
        };
        auto assemble_thinned = [&](double q) {
            for (std::size_t i = 0; i < numel; ++i) {
                x[i] = base.uniform[i] < q ? base.truncated[i]
                                           : detail_synth::clamp_mag(base.gauss[i], cap);
            }
            detail_synth::finish(x, plants);
            return detail_synth::tail_fraction(x);
        };

        const double gauss_tail = assemble_mix(0.0, 0.0);
        if (gauss_tail > target) {
            // a plain Gaussian already overshoots: thin its tail with
            // truncated redraws
            double lo = 0.0, hi = 1.0;
            for (int it = 0; it < 40; ++it) {
                const double q = 0.5 * (lo + hi);
                if (assemble_thinned(q) > target) {
                    lo = q;
                } else {
                    hi = q;
                }
            }
            assemble_thinned(0.5 * (lo + hi));
        } else {
            const double p_mix = std::clamp(3.0 * target, 1e-4, 0.25);
            double lo = 0.0, hi = 64.0;
            for (int it = 0; it < 40; ++it) {
                const double s = 0.5 * (lo + hi);
                if (assemble_mix(p_mix, s) < target) {
                    lo = s;
                } else {
                    hi = s;
                }
            }
            assemble_mix(p_mix, 0.5 * (lo + hi));
        }
    }

    std::vector<float> data(numel);
    for (std::size_t i = 0; i < numel; ++i) {
        data[i] = static_cast<float>(x[i]);
    }
    return WeightMatrix(rows, cols, std::move(data));
}

// Profile registry, keyed "<model>_<component>". Tail fractions and the
// sigma-multiple maxima follow the measured distribution tables; rows whose
// maxima were only reported in absolute units carry a chosen sigma multiple,
// with the absolute value kept as informational metadata.
inline const std::map<std::string, DistributionProfile>& builtin_profiles() {
    static const std::map<std::string, DistributionProfile> registry = [] {
        std::map<std::string, DistributionProfile> m;
        auto add = [&m](std::string name, double tail, double max_abs,
                        std::vector<PlantedOutlier> planted, double abs_max) {
            DistributionProfile p;
            p.name = name;
            p.tail_fraction_3sigma = tail;
            p.max_abs_sigma = max_abs;
            p.planted = std::move(planted);
            p.abs_max_informational = abs_max;
            m.emplace(std::move(name), std::move(p));
        };
        add("glm_attn_k", 0.0148, 49.0, {{49.0, 1}}, 1.63);
        add("glm_dense_mlp", 0.0040, 12.0, {}, 0.94);
        add("glm_routed_down", 0.0028, 6.0, {}, 0.26);
        add("glm_shared_gate_up", 0.0054, 10.0, {}, 0.49);
        add("qwen_attn_k", 0.0094, 14.0, {{14.0, 1}}, 0.22);
        add("qwen_attn_v", 0.0082, 10.0, {}, 0.20);
        add("qwen_dense_mlp", 0.0119, 8.0, {}, 0.32);
        add("qwen_routed_down", 0.0040, 7.0, {}, 0.32);
        add("qwen_shared_gate_up", 0.0102, 6.0, {}, 0.13);
        // aliases for the two reference behaviours
        m.emplace("attn_kva", m.at("glm_attn_k"));
        m.emplace("routed", m.at("glm_routed_down"));
        return m;
    }();
    return registry;
}

inline const DistributionProfile& profile_by_name(const std::string& name) {
    const auto& reg = builtin_profiles();
    const auto it = reg.find(name);
    if (it == reg.end()) {
        throw std::invalid_argument("unknown distribution profile: " + name);
    }
    return it->second;
}

} // namespace xfp
