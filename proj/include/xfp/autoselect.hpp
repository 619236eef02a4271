#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <utility>

#include "xfp/container.hpp"
#include "xfp/philox.hpp"
#include "xfp/policy.hpp"
#include "xfp/tensor.hpp"

namespace xfp {

// Quality-targeted bit-width selection: candidates are tried in ascending
// order; the first whose reconstruction (outlier residual applied) reaches
// the class-dispatched median per-channel cosine wins. If none passes, the
// largest candidate is used and the fallback flag is set.
inline AutoSelectReport auto_select(const WeightMatrix& w, LayerClass cls,
                                    const QualityPolicy& policy, StorageMode mode,
                                    QuantizedLayer* chosen_layer = nullptr) {
    policy.validate();
    AutoSelectReport report;
    report.active_tau = dispatch_tau(cls, policy);

    const std::vector<int>& candidates = policy.candidates(mode);
    std::optional<EncodeArtifacts> last;
    for (int n : candidates) {
        EncodeArtifacts artifacts = encode_with_bits(w, cls, n, policy, mode);
        const double med = median_lower(per_channel_cosine(w, artifacts.full_recon));
        report.median_cos[n] = med;
        last = std::move(artifacts);
        if (med >= report.active_tau) {
            report.chosen_n = n;
            report.fallback_used = false;
            if (chosen_layer != nullptr) {
                *chosen_layer = std::move(last->layer);
            }
            return report;
        }
    }
    report.chosen_n = candidates.back();
    report.fallback_used = true;
    if (chosen_layer != nullptr) {
        *chosen_layer = std::move(last->layer);
    }
    return report;
}

// MoE path: selection runs on a small concatenation of experts rather than
// the full population. Deterministic default: the lowest expert indices.
inline AutoSelectReport moe_sample_select(std::span<const WeightMatrix> experts,
                                          const QualityPolicy& policy, StorageMode mode,
                                          QuantizedLayer* chosen_layer = nullptr) {
    policy.validate();
    if (experts.empty()) {
        throw std::invalid_argument("moe_sample_select: no experts");
    }
    for (const WeightMatrix& e : experts) {
        if (!e.same_shape(experts.front())) {
            throw std::invalid_argument("moe_sample_select: expert shape mismatch");
        }
    }

    const std::size_t take = std::min<std::size_t>(policy.moe_sample_size, experts.size());
    std::vector<std::size_t> ids(experts.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        ids[i] = i;
    }
    if (policy.moe_sample_seed.has_value()) {
        // seeded partial Fisher-Yates for the agreement-study configuration
        PhiloxStream rng(*policy.moe_sample_seed);
        for (std::size_t i = 0; i < take; ++i) {
            const std::size_t j =
                i + static_cast<std::size_t>(rng.uint64(0, i, 0) % (ids.size() - i));
            std::swap(ids[i], ids[j]);
        }
    }
    ids.resize(take);
    std::sort(ids.begin(), ids.end());

    const std::size_t rows = experts.front().rows();
    const std::size_t cols = experts.front().cols();
    WeightMatrix concat(rows * take, cols);
    for (std::size_t s = 0; s < take; ++s) {
        const WeightMatrix& e = experts[ids[s]];
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
                concat.at(s * rows + r, c) = e.at(r, c);
            }
        }
    }

    AutoSelectReport report =
        auto_select(concat, LayerClass::routed_expert, policy, mode, chosen_layer);
    report.sampled_experts = std::move(ids);
    return report;
}

struct EncodeResult {
    QuantizedLayer layer;
    AutoSelectReport report;
};

// Full pipeline for one layer: outlier extraction, auto-select, codebook fit,
// residual finalization, packing.
inline EncodeResult encode_layer(const WeightMatrix& w, LayerClass cls,
                                 const QualityPolicy& policy, StorageMode mode) {
    EncodeResult result;
    result.report = auto_select(w, cls, policy, mode, &result.layer);
    return result;
}

} // namespace xfp
