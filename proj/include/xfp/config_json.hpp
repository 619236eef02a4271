#pragma once

#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "xfp/container.hpp"
#include "xfp/hprocess.hpp"
#include "xfp/policy.hpp"
#include "xfp/synth.hpp"

namespace xfp {

// JSON bindings for the operator-facing configs and reports. Schemas are
// versioned alongside the container format.

inline constexpr int kJsonSchemaVersion = 1;

inline nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open json file: " + path);
    }
    nlohmann::json j;
    in >> j;
    return j;
}

inline void save_json_file(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open json file for writing: " + path);
    }
    out << j.dump(2) << "\n";
}

// Partial policy overlay: only the keys present are applied.
inline void apply_policy_json(QualityPolicy& policy, const nlohmann::json& j) {
    if (j.contains("tau_strict")) policy.tau_strict = j.at("tau_strict").get<double>();
    if (j.contains("tau_lazy")) policy.tau_lazy = j.at("tau_lazy").get<double>();
    if (j.contains("k")) policy.k = j.at("k").get<double>();
    if (j.contains("cap_fraction")) policy.cap_fraction = j.at("cap_fraction").get<double>();
    if (j.contains("group_size")) policy.group_size = j.at("group_size").get<std::size_t>();
    if (j.contains("lloyd_iters")) policy.lloyd_iters = j.at("lloyd_iters").get<int>();
    if (j.contains("moe_lloyd_iters")) {
        policy.moe_lloyd_iters = j.at("moe_lloyd_iters").get<int>();
    }
    if (j.contains("moe_sample_size")) {
        policy.moe_sample_size = j.at("moe_sample_size").get<std::size_t>();
    }
    if (j.contains("library_size")) policy.library_size = j.at("library_size").get<std::size_t>();
    if (j.contains("candidates_v2")) {
        policy.candidates_v2 = j.at("candidates_v2").get<std::vector<int>>();
    }
    if (j.contains("candidates_v2a")) {
        policy.candidates_v2a = j.at("candidates_v2a").get<std::vector<int>>();
    }
    if (j.contains("moe_sample_seed")) {
        policy.moe_sample_seed = j.at("moe_sample_seed").get<std::uint64_t>();
    }
}

inline nlohmann::json policy_to_json(const QualityPolicy& policy) {
    nlohmann::json j;
    j["tau_strict"] = policy.tau_strict;
    j["tau_lazy"] = policy.tau_lazy;
    j["k"] = policy.k;
    j["cap_fraction"] = policy.cap_fraction;
    j["group_size"] = policy.group_size;
    j["lloyd_iters"] = policy.lloyd_iters;
    j["moe_lloyd_iters"] = policy.moe_lloyd_iters;
    j["moe_sample_size"] = policy.moe_sample_size;
    j["library_size"] = policy.library_size;
    j["candidates_v2"] = policy.candidates_v2;
    j["candidates_v2a"] = policy.candidates_v2a;
    return j;
}

inline ModelProfile model_profile_from_json(const nlohmann::json& j) {
    ModelProfile p;
    p.name = j.value("name", "");
    p.seed = j.value("seed", std::uint64_t{1});
    p.mode = storage_mode_from_string(j.value("mode", "v2a"));
    const auto& hw = j.at("hardware");
    p.hardware.bytes_per_device = hw.at("bytes_per_device").get<double>();
    p.hardware.device_count = hw.at("device_count").get<int>();
    p.hardware.reserved_bytes = hw.value("reserved_bytes", 0.0);
    for (const auto& cj : j.value("classes", nlohmann::json::array())) {
        ClassProfile c;
        c.cls = layer_class_from_string(cj.at("class").get<std::string>());
        c.rows = cj.at("rows").get<std::size_t>();
        c.cols = cj.at("cols").get<std::size_t>();
        c.layer_count = cj.at("layers").get<std::size_t>();
        c.expert_count = cj.value("experts", std::size_t{1});
        c.synth_profile = cj.at("profile").get<std::string>();
        c.sample_count = cj.value("samples", std::size_t{4});
        c.sample_rows = cj.value("sample_rows", std::size_t{0});
        c.sample_cols = cj.value("sample_cols", std::size_t{0});
        p.classes.push_back(std::move(c));
    }
    return p;
}

inline std::vector<GridPoint> grid_from_json(const nlohmann::json& j) {
    std::vector<GridPoint> grid;
    for (const auto& gj : j) {
        GridPoint g;
        g.label = gj.at("label").get<std::string>();
        g.tau_strict = gj.at("tau_strict").get<double>();
        g.tau_lazy = gj.at("tau_lazy").get<double>();
        grid.push_back(std::move(g));
    }
    return grid;
}

// verdict file: {"G": "garbage", "H1": "pass", ...}
inline std::map<std::string, bool> verdicts_from_json(const nlohmann::json& j) {
    std::map<std::string, bool> verdicts;
    for (const auto& [label, value] : j.items()) {
        const std::string v = value.get<std::string>();
        if (v != "garbage" && v != "pass") {
            throw std::invalid_argument("verdict must be 'garbage' or 'pass': " + label);
        }
        verdicts[label] = v == "garbage";
    }
    return verdicts;
}

inline nlohmann::json effective_bits_to_json(const EffectiveBits& eb) {
    nlohmann::json j;
    j["index"] = eb.index_bits_per_weight;
    j["codebook_overhead"] = eb.codebook_overhead_bits_per_weight;
    j["outliers"] = eb.outlier_bits_per_weight;
    j["total_with_outliers"] = eb.total;
    j["total_without_outliers"] = eb.without_outliers();
    return j;
}

inline nlohmann::json report_to_json(const AutoSelectReport& r) {
    nlohmann::json j;
    nlohmann::json medians = nlohmann::json::object();
    for (const auto& [n, med] : r.median_cos) {
        medians[std::to_string(n)] = med;
    }
    j["median_cos_per_candidate"] = medians;
    j["chosen_n"] = r.chosen_n;
    j["active_tau"] = r.active_tau;
    j["fallback_used"] = r.fallback_used;
    if (!r.sampled_experts.empty()) {
        j["sampled_experts"] = r.sampled_experts;
    }
    return j;
}

inline nlohmann::json sweep_to_json(const std::vector<OperatingPoint>& points) {
    nlohmann::json out;
    out["schema_version"] = kJsonSchemaVersion;
    nlohmann::json arr = nlohmann::json::array();
    for (const OperatingPoint& p : points) {
        nlohmann::json pj;
        pj["label"] = p.point.label;
        pj["tau_strict"] = p.point.tau_strict;
        pj["tau_lazy"] = p.point.tau_lazy;
        pj["steady_bytes"] = p.steady_bytes;
        pj["spike_bytes"] = p.spike_bytes;
        pj["effective_bits"] = p.effective_bits;
        pj["verdict"] = to_string(p.verdict);
        nlohmann::json hist = nlohmann::json::object();
        for (const auto& [cls, by_n] : p.histogram) {
            nlohmann::json hj = nlohmann::json::object();
            for (const auto& [n, count] : by_n) {
                hj[std::to_string(n)] = count;
            }
            hist[to_string(cls)] = hj;
        }
        pj["n_histogram"] = hist;
        arr.push_back(std::move(pj));
    }
    out["points"] = arr;
    return out;
}

inline nlohmann::json profiles_to_json(const std::map<std::string, DistributionProfile>& reg) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [name, p] : reg) {
        nlohmann::json pj;
        pj["tail_fraction_3sigma"] = p.tail_fraction_3sigma;
        pj["max_abs_sigma"] = p.max_abs_sigma;
        pj["abs_max_informational"] = p.abs_max_informational;
        nlohmann::json plants = nlohmann::json::array();
        for (const PlantedOutlier& po : p.planted) {
            plants.push_back({{"magnitude_sigma", po.magnitude_sigma}, {"count", po.count}});
        }
        pj["planted_outliers"] = plants;
        out[name] = pj;
    }
    return out;
}

inline std::map<std::string, DistributionProfile> profiles_from_json(const nlohmann::json& j) {
    std::map<std::string, DistributionProfile> reg;
    for (const auto& [name, pj] : j.items()) {
        DistributionProfile p;
        p.name = name;
        p.tail_fraction_3sigma = pj.at("tail_fraction_3sigma").get<double>();
        p.max_abs_sigma = pj.at("max_abs_sigma").get<double>();
        p.abs_max_informational = pj.value("abs_max_informational", 0.0);
        for (const auto& po : pj.value("planted_outliers", nlohmann::json::array())) {
            p.planted.push_back(
                {po.at("magnitude_sigma").get<double>(), po.at("count").get<std::size_t>()});
        }
        reg.emplace(name, std::move(p));
    }
    return reg;
}

} // namespace xfp
