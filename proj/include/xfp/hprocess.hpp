#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "xfp/autoselect.hpp"
#include "xfp/container.hpp"
#include "xfp/philox.hpp"
#include "xfp/policy.hpp"
#include "xfp/synth.hpp"

namespace xfp {

// Shapes and counts of one layer class in the model being planned, plus the
// synthetic profile its representative matrices are drawn from.
struct ClassProfile {
    LayerClass cls = LayerClass::self_attention;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t layer_count = 0;
    std::size_t expert_count = 1; // 1 for non-MoE classes
    std::string synth_profile;    // registry key for sweep sampling
    std::size_t sample_count = 4;
    // representative matrices are quantized at these dims; the decision
    // transfers to the true shape for the memory accounting (0 = derive)
    std::size_t sample_rows = 0;
    std::size_t sample_cols = 0;

    std::size_t matrix_count() const noexcept { return layer_count * expert_count; }
    std::size_t numel() const noexcept { return rows * cols; }

    std::size_t effective_sample_rows() const noexcept {
        return sample_rows > 0 ? sample_rows : std::min<std::size_t>(rows, 128);
    }
    std::size_t effective_sample_cols() const noexcept {
        return sample_cols > 0 ? sample_cols : std::min<std::size_t>(cols, 512);
    }
};

struct HardwareEnvelope {
    double bytes_per_device = 0.0;
    int device_count = 1;
    double reserved_bytes = 0.0; // KV-cache, activations, compile buffers

    double total_bytes() const noexcept { return bytes_per_device * device_count; }
};

struct ModelProfile {
    std::string name;
    std::uint64_t seed = 1;
    StorageMode mode = StorageMode::v2a;
    HardwareEnvelope hardware;
    std::vector<ClassProfile> classes;

    void validate() const {
        if (classes.empty()) {
            return; // a zero-layer profile is legal; memory is just the reserve
        }
        for (const ClassProfile& c : classes) {
            if (c.rows == 0 || c.cols == 0 || c.layer_count == 0 || c.expert_count == 0) {
                throw std::invalid_argument("ModelProfile: counts must be positive");
            }
        }
    }
};

// Fractional bit-width mix for one class (fractions sum to 1).
struct BitsMix {
    std::map<int, double> fraction_by_n;
};

using ClassAssignment = std::map<LayerClass, BitsMix>;

struct MemoryEstimate {
    double steady_bytes = 0.0;
    double spike_bytes = 0.0;
};

// bits-per-weight lookup used by the memory model; the sweep passes measured
// values that include the outlier contribution
using BitsLookup = std::function<double(const ClassProfile&, int n)>;

inline BitsLookup formula_bits_lookup(StorageMode mode, std::size_t group_size,
                                      std::size_t library_size) {
    return [mode, group_size, library_size](const ClassProfile& c, int n) {
        return effective_bits_formula(mode, n, c.rows, c.cols, group_size, library_size, 0.0)
            .total;
    };
}

// Peak transient while one matrix is being fit: binary32 source, working
// int8 indices, and the candidate codebooks at the largest candidate N.
inline double fit_workspace_bytes(const ClassProfile& c, StorageMode mode, int max_candidate_n,
                                  std::size_t library_size) {
    const double numel = static_cast<double>(c.numel());
    const double entries = static_cast<double>(std::size_t{1} << max_candidate_n);
    double bytes = numel * 4.0 + numel * 1.0;
    bytes += static_cast<double>(c.rows) * entries * 2.0; // per-channel codebooks
    if (mode == StorageMode::v2a) {
        bytes += static_cast<double>(library_size) * entries * 2.0;
    }
    return bytes;
}

// Steady state is the sum of container sizes plus the reserve; the spike adds
// the single largest per-matrix fit transient, which is why quantize-on-load
// peaks above the serving footprint.
inline MemoryEstimate estimate_memory(const ModelProfile& profile,
                                      const ClassAssignment& assignment,
                                      const BitsLookup& bits_lookup, int max_candidate_n,
                                      std::size_t library_size) {
    profile.validate();
    MemoryEstimate est;
    est.steady_bytes = profile.hardware.reserved_bytes;
    double max_workspace = 0.0;
    for (const ClassProfile& c : profile.classes) {
        const auto it = assignment.find(c.cls);
        if (it == assignment.end()) {
            throw std::invalid_argument("estimate_memory: assignment missing class " +
                                        std::string(to_string(c.cls)));
        }
        double bits = 0.0;
        for (const auto& [n, fraction] : it->second.fraction_by_n) {
            bits += fraction * bits_lookup(c, n);
        }
        est.steady_bytes +=
            static_cast<double>(c.matrix_count()) * static_cast<double>(c.numel()) * bits / 8.0;
        max_workspace =
            std::max(max_workspace, fit_workspace_bytes(c, profile.mode, max_candidate_n,
                                                        library_size));
    }
    est.spike_bytes = est.steady_bytes + max_workspace;
    return est;
}

inline MemoryEstimate estimate_memory(const ModelProfile& profile,
                                      const ClassAssignment& assignment,
                                      const QualityPolicy& policy = {}) {
    const int max_n = policy.candidates(profile.mode).back();
    return estimate_memory(profile, assignment,
                           formula_bits_lookup(profile.mode, policy.group_size,
                                               policy.library_size),
                           max_n, policy.library_size);
}

struct GridPoint {
    std::string label;
    double tau_strict = 0.96;
    double tau_lazy = 0.93;
};

// The reference operating grid, aggressive to conservative.
inline std::vector<GridPoint> preset_grid() {
    return {
        {"G", 0.92, 0.80},   {"H1", 0.96, 0.92},   {"H1.5", 0.96, 0.93},
        {"H1.7", 0.96, 0.935}, {"H", 0.96, 0.94},
    };
}

enum class SweepVerdict : std::uint8_t {
    fits = 0,
    oom = 1,
    external_garbage = 2,
};

inline const char* to_string(SweepVerdict v) {
    switch (v) {
    case SweepVerdict::fits: return "fits";
    case SweepVerdict::oom: return "oom";
    case SweepVerdict::external_garbage: return "garbage";
    }
    return "?";
}

struct OperatingPoint {
    GridPoint point;
    std::map<LayerClass, std::map<int, std::size_t>> histogram; // matrices per N
    ClassAssignment mix;
    double steady_bytes = 0.0;
    double spike_bytes = 0.0;
    double effective_bits = 0.0; // weighted bits/param including outliers
    SweepVerdict verdict = SweepVerdict::fits;
};

using QuantizerHook = std::function<AutoSelectReport(const WeightMatrix&, LayerClass,
                                                     const QualityPolicy&, StorageMode)>;

inline QuantizerHook default_quantizer_hook() {
    return [](const WeightMatrix& w, LayerClass cls, const QualityPolicy& policy,
              StorageMode mode) { return auto_select(w, cls, policy, mode); };
}

// Iterate the threshold grid: quantize representative sampled matrices per
// class at each point, tally the bit-width mix, estimate memory, and classify
// against the hardware envelope and the externally supplied generation
// verdicts. Garbage cannot be detected from weights alone, so it arrives as
// an input keyed by grid label.
inline std::vector<OperatingPoint> sweep(const ModelProfile& profile,
                                         const std::vector<GridPoint>& grid,
                                         const QualityPolicy& base_policy,
                                         const QuantizerHook& hook = default_quantizer_hook(),
                                         const std::map<std::string, bool>& garbage_verdicts = {}) {
    if (grid.empty()) {
        throw std::invalid_argument("sweep: empty grid");
    }
    for (const GridPoint& p : grid) {
        if (!(p.tau_lazy <= p.tau_strict)) {
            throw std::invalid_argument("sweep: grid point with tau_lazy > tau_strict: " +
                                        p.label);
        }
    }
    profile.validate();
    base_policy.validate();

    // representative matrices and their outlier fractions, fixed across the
    // grid so points differ only in thresholds
    const PhiloxStream seeder(profile.seed);
    std::vector<std::vector<WeightMatrix>> samples(profile.classes.size());
    std::vector<double> outlier_fraction(profile.classes.size(), 0.0);
    for (std::size_t ci = 0; ci < profile.classes.size(); ++ci) {
        const ClassProfile& c = profile.classes[ci];
        const DistributionProfile& dist = profile_by_name(c.synth_profile);
        double fraction_sum = 0.0;
        for (std::size_t s = 0; s < c.sample_count; ++s) {
            const std::uint64_t sub_seed = seeder.uint64(static_cast<std::uint32_t>(ci), s, 0);
            WeightMatrix w =
                generate(dist, c.effective_sample_rows(), c.effective_sample_cols(), sub_seed);
            const auto [bulk, outliers] =
                extract_outliers(w, base_policy.k, base_policy.cap_fraction);
            fraction_sum += static_cast<double>(outliers.entries.size()) /
                            static_cast<double>(w.numel());
            samples[ci].push_back(std::move(w));
        }
        outlier_fraction[ci] =
            c.sample_count > 0 ? fraction_sum / static_cast<double>(c.sample_count) : 0.0;
    }

    const int max_n = base_policy.candidates(profile.mode).back();
    std::vector<OperatingPoint> points;
    points.reserve(grid.size());
    for (const GridPoint& gp : grid) {
        QualityPolicy policy = base_policy;
        policy.tau_strict = gp.tau_strict;
        policy.tau_lazy = gp.tau_lazy;

        OperatingPoint op;
        op.point = gp;

        for (std::size_t ci = 0; ci < profile.classes.size(); ++ci) {
            const ClassProfile& c = profile.classes[ci];
            std::map<int, std::size_t> picks;
            for (const WeightMatrix& w : samples[ci]) {
                const AutoSelectReport r = hook(w, c.cls, policy, profile.mode);
                ++picks[r.chosen_n];
            }
            BitsMix mix;
            for (const auto& [n, count] : picks) {
                mix.fraction_by_n[n] =
                    static_cast<double>(count) / static_cast<double>(samples[ci].size());
            }
            op.mix[c.cls] = mix;
            // histogram over actual matrix counts, remainder to the largest N
            std::map<int, std::size_t> hist;
            std::size_t assigned = 0;
            for (const auto& [n, fraction] : mix.fraction_by_n) {
                const auto cnt = static_cast<std::size_t>(
                    std::floor(fraction * static_cast<double>(c.matrix_count())));
                hist[n] = cnt;
                assigned += cnt;
            }
            hist[std::prev(mix.fraction_by_n.end())->first] += c.matrix_count() - assigned;
            op.histogram[c.cls] = hist;
        }

        auto bits_lookup = [&](const ClassProfile& c, int n) {
            for (std::size_t ci = 0; ci < profile.classes.size(); ++ci) {
                if (&profile.classes[ci] == &c) {
                    return effective_bits_formula(profile.mode, n, c.rows, c.cols,
                                                  policy.group_size, policy.library_size,
                                                  outlier_fraction[ci])
                        .total;
                }
            }
            return effective_bits_formula(profile.mode, n, c.rows, c.cols, policy.group_size,
                                          policy.library_size, 0.0)
                .total;
        };
        const MemoryEstimate mem =
            estimate_memory(profile, op.mix, bits_lookup, max_n, policy.library_size);
        op.steady_bytes = mem.steady_bytes;
        op.spike_bytes = mem.spike_bytes;

        double bit_weight = 0.0, param_count = 0.0;
        for (const ClassProfile& c : profile.classes) {
            const double params =
                static_cast<double>(c.matrix_count()) * static_cast<double>(c.numel());
            for (const auto& [n, fraction] : op.mix[c.cls].fraction_by_n) {
                bit_weight += params * fraction * bits_lookup(c, n);
            }
            param_count += params;
        }
        op.effective_bits = param_count > 0.0 ? bit_weight / param_count : 0.0;

        if (op.spike_bytes > profile.hardware.total_bytes()) {
            op.verdict = SweepVerdict::oom;
        } else if (const auto it = garbage_verdicts.find(gp.label);
                   it != garbage_verdicts.end() && it->second) {
            op.verdict = SweepVerdict::external_garbage;
        } else {
            op.verdict = SweepVerdict::fits;
        }
        points.push_back(std::move(op));
    }
    return points;
}

// Outlier fraction at which a lower bit width plus extra outliers costs the
// same as the higher bit width at its cap:
//   bits_low/8 + y*bpo = bits_high/8 + cap_high*bpo
inline double break_even_outlier_fraction(double bits_low, double bits_high, double cap_high,
                                          double bytes_per_outlier) {
    if (!(bits_high > bits_low)) {
        throw std::invalid_argument("break_even: bits_high must exceed bits_low");
    }
    if (!(bytes_per_outlier > 0.0)) {
        throw std::invalid_argument("break_even: bytes_per_outlier must be positive");
    }
    return (bits_high / 8.0 - bits_low / 8.0 + cap_high * bytes_per_outlier) / bytes_per_outlier;
}

inline std::string format_sweep_table(const std::vector<OperatingPoint>& points) {
    std::ostringstream out;
    constexpr double gib = 1024.0 * 1024.0 * 1024.0;
    out << "point   tau_s   tau_l   steady_GiB  spike_GiB  eff_bits  verdict\n";
    for (const OperatingPoint& p : points) {
        char line[160];
        std::snprintf(line, sizeof(line), "%-7s %-7.3f %-7.3f %-11.1f %-10.1f %-9.2f %s\n",
                      p.point.label.c_str(), p.point.tau_strict, p.point.tau_lazy,
                      p.steady_bytes / gib, p.spike_bytes / gib, p.effective_bits,
                      to_string(p.verdict));
        out << line;
    }
    return out.str();
}

} // namespace xfp
