#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace xfp {

enum class LayerClass : std::uint8_t {
    self_attention = 0,
    linear_attention = 1,
    shared_expert = 2,
    routed_expert = 3,
    lm_head = 4,
};

enum class StorageMode : std::uint8_t {
    v2 = 0,  // one codebook per output channel
    v2a = 1, // shared library, per-group assignment
};

inline const char* to_string(LayerClass c) {
    switch (c) {
    case LayerClass::self_attention: return "self_attention";
    case LayerClass::linear_attention: return "linear_attention";
    case LayerClass::shared_expert: return "shared_expert";
    case LayerClass::routed_expert: return "routed_expert";
    case LayerClass::lm_head: return "lm_head";
    }
    return "?";
}

inline const char* to_string(StorageMode m) {
    return m == StorageMode::v2 ? "v2" : "v2a";
}

inline LayerClass layer_class_from_string(const std::string& s) {
    if (s == "self_attention") return LayerClass::self_attention;
    if (s == "linear_attention") return LayerClass::linear_attention;
    if (s == "shared_expert") return LayerClass::shared_expert;
    if (s == "routed_expert") return LayerClass::routed_expert;
    if (s == "lm_head") return LayerClass::lm_head;
    throw std::invalid_argument("unknown layer class: " + s);
}

inline StorageMode storage_mode_from_string(const std::string& s) {
    if (s == "v2") return StorageMode::v2;
    if (s == "v2a") return StorageMode::v2a;
    throw std::invalid_argument("unknown storage mode: " + s);
}

// Quality-targeted selection parameters. The strict floor governs attention,
// linear-attention, shared-expert and lm-head projections; the lazy floor
// governs the routed-expert path.
struct QualityPolicy {
    double tau_strict = 0.96;
    double tau_lazy = 0.93;
    double k = 4.0;
    double cap_fraction = 0.02;
    std::vector<int> candidates_v2 = {2, 3, 4};
    std::vector<int> candidates_v2a = {2, 4};
    std::size_t group_size = 128;
    int lloyd_iters = 20;
    int moe_lloyd_iters = 20;
    std::size_t moe_sample_size = 4;
    std::size_t library_size = 32;
    // when set, expert sampling draws a seeded random subset instead of the
    // first moe_sample_size experts (agreement-study knob)
    std::optional<std::uint64_t> moe_sample_seed;

    void validate() const {
        if (!(tau_lazy <= tau_strict)) {
            throw std::invalid_argument("QualityPolicy: tau_lazy must not exceed tau_strict");
        }
        if (!(k > 0.0)) {
            throw std::invalid_argument("QualityPolicy: k must be positive");
        }
        if (cap_fraction < 0.0 || cap_fraction > 1.0) {
            throw std::invalid_argument("QualityPolicy: cap_fraction outside [0, 1]");
        }
        if (candidates_v2.empty() || candidates_v2a.empty()) {
            throw std::invalid_argument("QualityPolicy: empty candidate set");
        }
        if (!std::is_sorted(candidates_v2.begin(), candidates_v2.end()) ||
            !std::is_sorted(candidates_v2a.begin(), candidates_v2a.end())) {
            throw std::invalid_argument("QualityPolicy: candidate sets must be ascending");
        }
        if (group_size < 1) {
            throw std::invalid_argument("QualityPolicy: group_size must be >= 1");
        }
        if (lloyd_iters < 0 || moe_lloyd_iters < 0) {
            throw std::invalid_argument("QualityPolicy: negative iteration count");
        }
        if (moe_sample_size < 1) {
            throw std::invalid_argument("QualityPolicy: moe_sample_size must be >= 1");
        }
        if (library_size < 1 || library_size > 256) {
            throw std::invalid_argument("QualityPolicy: library_size outside [1, 256]");
        }
    }

    const std::vector<int>& candidates(StorageMode mode) const {
        return mode == StorageMode::v2 ? candidates_v2 : candidates_v2a;
    }
};

inline double dispatch_tau(LayerClass cls, const QualityPolicy& policy) {
    return cls == LayerClass::routed_expert ? policy.tau_lazy : policy.tau_strict;
}

struct AutoSelectReport {
    std::map<int, double> median_cos; // per evaluated candidate N
    int chosen_n = 0;
    double active_tau = 0.0;
    bool fallback_used = false;
    std::vector<std::size_t> sampled_experts; // MoE selection only
};

} // namespace xfp
