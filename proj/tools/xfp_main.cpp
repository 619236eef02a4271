// xfp: quantization codec and operator toolkit.
//
// Subcommands: synth, quantize, dequantize, report, sweep, breakeven,
// geometry. Configuration precedence is flags > environment > config file >
// defaults; see README.md for the environment keys.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "xfp/config_json.hpp"
#include "xfp/xfp.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::optional<double> env_double(const char* name) {
    if (const char* v = std::getenv(name)) {
        return std::strtod(v, nullptr);
    }
    return std::nullopt;
}

std::optional<long> env_long(const char* name) {
    if (const char* v = std::getenv(name)) {
        return std::strtol(v, nullptr, 10);
    }
    return std::nullopt;
}

// Policy flags shared by quantize and sweep. Merge order: defaults, then the
// config file, then environment, then explicit flags.
struct PolicyCli {
    std::string config_file;
    double tau_strict = 0, tau_lazy = 0, k = 0, cap_fraction = 0;
    std::size_t group_size = 0, moe_sample_size = 0, library_size = 0;
    int lloyd_iters = 0, moe_lloyd_iters = 0;

    CLI::App* app = nullptr;

    void attach(CLI::App* cmd) {
        app = cmd;
        cmd->add_option("--config", config_file, "JSON config file with policy keys");
        cmd->add_option("--tau-strict", tau_strict, "strict cosine floor (default 0.96)");
        cmd->add_option("--tau-lazy", tau_lazy, "lazy cosine floor (default 0.93)");
        cmd->add_option("--k", k, "outlier threshold multiplier (default 4.0)");
        cmd->add_option("--cap", cap_fraction, "outlier cap fraction (default 0.02)");
        cmd->add_option("--group-size", group_size, "v2a group size (default 128)");
        cmd->add_option("--lloyd-iters", lloyd_iters, "Lloyd rounds (default 20)");
        cmd->add_option("--moe-lloyd-iters", moe_lloyd_iters,
                        "library-fit rounds for routed experts (default 20)");
        cmd->add_option("--moe-sample-size", moe_sample_size,
                        "experts sampled for MoE selection (default 4)");
        cmd->add_option("--library-size", library_size, "v2a library entries (default 32)");
    }

    xfp::QualityPolicy resolve() const {
        xfp::QualityPolicy policy;
        if (!config_file.empty()) {
            xfp::apply_policy_json(policy, xfp::load_json_file(config_file));
        }
        if (const auto v = env_double("XFP_MIN_COS_STRICT")) policy.tau_strict = *v;
        if (const auto v = env_double("XFP_MIN_COS_LAZY")) policy.tau_lazy = *v;
        if (const auto v = env_long("XFP_GROUP_SIZE")) {
            policy.group_size = static_cast<std::size_t>(*v);
        }
        if (const auto v = env_long("XFP_LLOYD_ITERS")) policy.lloyd_iters = static_cast<int>(*v);
        if (const auto v = env_long("XFP_MOE_LLOYD_ITERS")) {
            policy.moe_lloyd_iters = static_cast<int>(*v);
        }
        if (app->count("--tau-strict")) policy.tau_strict = tau_strict;
        if (app->count("--tau-lazy")) policy.tau_lazy = tau_lazy;
        if (app->count("--k")) policy.k = k;
        if (app->count("--cap")) policy.cap_fraction = cap_fraction;
        if (app->count("--group-size")) policy.group_size = group_size;
        if (app->count("--lloyd-iters")) policy.lloyd_iters = lloyd_iters;
        if (app->count("--moe-lloyd-iters")) policy.moe_lloyd_iters = moe_lloyd_iters;
        if (app->count("--moe-sample-size")) policy.moe_sample_size = moe_sample_size;
        if (app->count("--library-size")) policy.library_size = library_size;
        policy.validate();
        return policy;
    }
};

int cmd_synth(const std::string& profile_name, const std::string& profiles_file,
              std::size_t rows, std::size_t cols, std::uint64_t seed, const std::string& out,
              bool list) {
    std::map<std::string, xfp::DistributionProfile> registry = xfp::builtin_profiles();
    if (!profiles_file.empty()) {
        registry = xfp::profiles_from_json(xfp::load_json_file(profiles_file));
    }
    if (list) {
        for (const auto& [name, p] : registry) {
            std::printf("%-22s tail=%.4f max=%.1f sigma plants=%zu\n", name.c_str(),
                        p.tail_fraction_3sigma, p.max_abs_sigma, p.planted.size());
        }
        return 0;
    }
    const auto it = registry.find(profile_name);
    if (it == registry.end()) {
        throw std::invalid_argument("unknown distribution profile: " + profile_name);
    }
    const xfp::WeightMatrix w = xfp::generate(it->second, rows, cols, seed);
    xfp::write_xwt(out, w);
    const xfp::MatrixStats stats = xfp::matrix_stats(w);
    std::printf("%s: %zux%zu seed=%llu mu=%.4g sigma=%.4g -> %s\n", profile_name.c_str(), rows,
                cols, static_cast<unsigned long long>(seed), stats.mean, stats.stddev,
                out.c_str());
    return 0;
}

int cmd_quantize(const std::vector<std::string>& inputs, const std::string& class_map_file,
                 const std::string& default_class, const std::string& mode_name,
                 const std::string& out, const std::string& report_file,
                 const std::string& residual, const PolicyCli& pcli) {
    const xfp::QualityPolicy policy = pcli.resolve();
    const xfp::StorageMode mode = xfp::storage_mode_from_string(mode_name);
    const xfp::ResidualConvention convention = residual == "overwrite"
                                                   ? xfp::ResidualConvention::overwrite
                                                   : xfp::ResidualConvention::add;

    std::map<std::string, std::string> class_map;
    if (!class_map_file.empty()) {
        const json map_json = xfp::load_json_file(class_map_file);
        for (const auto& [name, cls] : map_json.items()) {
            class_map[name] = cls.get<std::string>();
        }
    }

    std::vector<xfp::QuantizedLayer> layers;
    json report;
    report["schema_version"] = xfp::kJsonSchemaVersion;
    report["mode"] = mode_name;
    report["policy"] = xfp::policy_to_json(policy);
    json layer_reports = json::array();

    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const std::string stem = fs::path(inputs[i]).stem().string();
        std::string cls_name = default_class;
        if (const auto it = class_map.find(stem); it != class_map.end()) {
            cls_name = it->second;
        }
        if (cls_name.empty()) {
            throw std::invalid_argument("no layer class for input " + inputs[i] +
                                        " (use --class-map or --class)");
        }
        const xfp::LayerClass cls = xfp::layer_class_from_string(cls_name);
        const xfp::WeightMatrix w = xfp::read_xwt(inputs[i]);

        xfp::EncodeResult enc = xfp::encode_layer(w, cls, policy, mode);
        if (convention == xfp::ResidualConvention::overwrite) {
            enc.layer = xfp::encode_with_bits(w, cls, enc.report.chosen_n, policy, mode,
                                              xfp::GroupOrientation::rows, convention)
                            .layer;
        }

        const xfp::EffectiveBits eb = xfp::effective_bits(enc.layer);
        std::printf("%-24s %-16s N=%d cos=%.4f outliers=%zu bits/w=%.3f%s\n", stem.c_str(),
                    cls_name.c_str(), enc.report.chosen_n,
                    enc.report.median_cos.at(enc.report.chosen_n),
                    enc.layer.outliers.entries.size(), eb.total,
                    enc.report.fallback_used ? " (fallback)" : "");

        json lj = xfp::report_to_json(enc.report);
        lj["index"] = i;
        lj["name"] = stem;
        lj["class"] = cls_name;
        lj["rows"] = w.rows();
        lj["cols"] = w.cols();
        lj["outlier_count"] = enc.layer.outliers.entries.size();
        lj["outlier_bytes"] = xfp::outlier_bytes(enc.layer.outliers);
        lj["effective_bits"] = xfp::effective_bits_to_json(eb);
        layer_reports.push_back(std::move(lj));
        layers.push_back(std::move(enc.layer));
    }

    xfp::save_model(out, layers);
    report["container"] = out;
    report["layers"] = layer_reports;
    if (!report_file.empty()) {
        xfp::save_json_file(report_file, report);
    }
    std::printf("wrote %zu layer(s) -> %s\n", layers.size(), out.c_str());
    return 0;
}

int cmd_dequantize(const std::string& input, const std::string& outdir,
                   const std::string& dtype) {
    const auto layers = xfp::load_model(input);
    fs::create_directories(outdir);
    const xfp::XwtDtype dt = dtype == "f16" ? xfp::XwtDtype::f16 : xfp::XwtDtype::f32;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "layer%03zu.xwt", i);
        const fs::path out = fs::path(outdir) / name;
        xfp::write_xwt(out.string(), xfp::decode_layer(layers[i]), dt);
        std::printf("%s: %zux%zu %s N=%d -> %s\n", name, layers[i].rows, layers[i].cols,
                    xfp::to_string(layers[i].mode), layers[i].n_bits, out.c_str());
    }
    return 0;
}

// percentile over a small population, lower order statistic
double percentile_lower(std::vector<double> v, double p) {
    if (v.empty()) {
        return 0.0;
    }
    std::sort(v.begin(), v.end());
    const auto idx = static_cast<std::size_t>(p * static_cast<double>(v.size() - 1));
    return v[idx];
}

int cmd_report(const std::string& input, const std::vector<std::string>& originals,
               const std::string& json_file) {
    const auto layers = xfp::load_model(input);
    json out;
    out["schema_version"] = xfp::kJsonSchemaVersion;
    out["layer_count"] = layers.size();

    std::map<std::string, std::map<int, std::size_t>> histogram;
    double total_params = 0.0, total_bits_with = 0.0, total_bits_without = 0.0;
    json layer_arr = json::array();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& layer = layers[i];
        const xfp::EffectiveBits eb = xfp::effective_bits(layer);
        ++histogram[xfp::to_string(layer.cls)][layer.n_bits];
        const double params = static_cast<double>(layer.numel());
        total_params += params;
        total_bits_with += params * eb.total;
        total_bits_without += params * eb.without_outliers();
        json lj;
        lj["index"] = i;
        lj["class"] = xfp::to_string(layer.cls);
        lj["mode"] = xfp::to_string(layer.mode);
        lj["n_bits"] = layer.n_bits;
        lj["rows"] = layer.rows;
        lj["cols"] = layer.cols;
        lj["outlier_count"] = layer.outliers.entries.size();
        lj["effective_bits"] = xfp::effective_bits_to_json(eb);
        layer_arr.push_back(std::move(lj));
    }
    out["layers"] = layer_arr;

    std::printf("%zu layer(s), %.0f parameters\n", layers.size(), total_params);
    std::printf("effective bits: %.4f with outliers, %.4f without\n",
                total_bits_with / total_params, total_bits_without / total_params);
    out["effective_bits_with_outliers"] = total_bits_with / total_params;
    out["effective_bits_without_outliers"] = total_bits_without / total_params;

    json hist_json = json::object();
    std::printf("per-class bit widths:\n");
    for (const auto& [cls, by_n] : histogram) {
        std::string line;
        json hj = json::object();
        for (const auto& [n, count] : by_n) {
            line += "  " + std::to_string(count) + "x N=" + std::to_string(n);
            hj[std::to_string(n)] = count;
        }
        std::printf("  %-18s%s\n", cls.c_str(), line.c_str());
        hist_json[cls] = hj;
    }
    out["n_histogram"] = hist_json;

    if (!originals.empty()) {
        if (originals.size() != layers.size()) {
            throw std::invalid_argument("--originals must list one .xwt per layer, in order");
        }
        // reconstruction table vs. originals: cos of the codebook-only decode,
        // cos with the outlier path, the delta, and the bulk/full MSE ratio
        struct ReconRow {
            double cos_bulk, cos_full, dcos, ratio;
        };
        std::map<std::string, std::vector<ReconRow>> by_class;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const xfp::WeightMatrix w = xfp::read_xwt(originals[i]);
            const xfp::WeightMatrix bulk = xfp::decode_layer_bulk(layers[i]);
            const xfp::WeightMatrix full = xfp::decode_layer(layers[i]);
            const xfp::QualityReport q = xfp::QualityReport::compute(w, bulk, full);
            const double cos_bulk = xfp::median_lower(xfp::per_channel_cosine(w, bulk));
            by_class[xfp::to_string(layers[i].cls)].push_back(
                {cos_bulk, q.median_cos, q.median_cos - cos_bulk, q.mse_ratio});
        }
        json recon = json::object();
        std::printf("reconstruction vs. originals (per class):\n");
        std::printf("  %-18s %8s %8s %9s %9s %9s\n", "class", "cos_bulk", "cos_full", "dcos",
                    "mse_p50", "mse_p90");
        for (auto& [cls, rows] : by_class) {
            std::vector<double> cos_bulk, cos_full, dcos, ratio;
            for (const ReconRow& row : rows) {
                cos_bulk.push_back(row.cos_bulk);
                cos_full.push_back(row.cos_full);
                dcos.push_back(row.dcos);
                ratio.push_back(row.ratio);
            }
            const double p50 = percentile_lower(ratio, 0.5);
            const double p90 = percentile_lower(ratio, 0.9);
            std::printf("  %-18s %8.5f %8.5f %+9.5f %8.2fx %8.2fx\n", cls.c_str(),
                        xfp::median_lower(cos_bulk), xfp::median_lower(cos_full),
                        xfp::median_lower(dcos), p50, p90);
            json cj;
            cj["cos_bulk_median"] = xfp::median_lower(cos_bulk);
            cj["cos_full_median"] = xfp::median_lower(cos_full);
            cj["delta_cos_median"] = xfp::median_lower(dcos);
            cj["mse_ratio_p50"] = p50;
            cj["mse_ratio_p90"] = p90;
            recon[cls] = cj;
        }
        out["reconstruction"] = recon;
    }

    if (!json_file.empty()) {
        xfp::save_json_file(json_file, out);
    }
    return 0;
}

int cmd_sweep(const std::string& profile_file, const std::string& grid_file, bool preset,
              const std::string& verdicts_file, const std::string& json_file,
              const PolicyCli& pcli) {
    const xfp::QualityPolicy policy = pcli.resolve();
    const xfp::ModelProfile profile =
        xfp::model_profile_from_json(xfp::load_json_file(profile_file));
    std::vector<xfp::GridPoint> grid;
    if (preset || grid_file.empty()) {
        grid = xfp::preset_grid();
    } else {
        grid = xfp::grid_from_json(xfp::load_json_file(grid_file));
    }
    std::map<std::string, bool> verdicts;
    if (!verdicts_file.empty()) {
        verdicts = xfp::verdicts_from_json(xfp::load_json_file(verdicts_file));
    }
    const auto points =
        xfp::sweep(profile, grid, policy, xfp::default_quantizer_hook(), verdicts);
    std::fputs(xfp::format_sweep_table(points).c_str(), stdout);
    if (!json_file.empty()) {
        xfp::save_json_file(json_file, xfp::sweep_to_json(points));
    }
    return 0;
}

int cmd_breakeven(double bits_low, double bits_high, double cap, double bytes_per_outlier) {
    const double y = xfp::break_even_outlier_fraction(bits_low, bits_high, cap, bytes_per_outlier);
    std::printf("%.6f (%.2f%%)\n", y, 100.0 * y);
    return 0;
}

int cmd_geometry(int n_bits, std::size_t group_size) {
    const xfp::LaneGeometry g = xfp::v2a_lane_geometry(n_bits, group_size);
    if (g.admissible) {
        std::printf("admissible: lanes_per_group=%d cb_per_iter=%d\n", g.lanes_per_group,
                    g.cb_per_iter);
    } else {
        std::printf("inadmissible: group size %zu is not walkable at N=%d\n", group_size, n_bits);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"xfp: quality-targeted adaptive codebook quantization toolkit"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic weight matrix (.xwt)");
    std::string synth_profile = "glm_attn_k", synth_out = "out.xwt", profiles_file;
    std::size_t synth_rows = 256, synth_cols = 256;
    std::uint64_t synth_seed = 1;
    bool synth_list = false;
    synth->add_option("--profile", synth_profile, "distribution profile name");
    synth->add_option("--profiles-file", profiles_file, "JSON profile registry override");
    synth->add_option("--rows", synth_rows, "rows (output channels)");
    synth->add_option("--cols", synth_cols, "cols (input dim)");
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("-o,--out", synth_out, "output .xwt path");
    synth->add_flag("--list", synth_list, "list available profiles and exit");

    // quantize
    auto* quantize = app.add_subcommand("quantize", "quantize .xwt layers into a .xfpq container");
    std::vector<std::string> q_inputs;
    std::string q_class_map, q_class, q_mode = "v2", q_out = "model.xfpq", q_report,
                q_residual = "add";
    PolicyCli q_policy;
    quantize->add_option("inputs", q_inputs, "input .xwt files")->required();
    quantize->add_option("--class-map", q_class_map, "JSON map: file stem -> layer class");
    quantize->add_option("--class", q_class, "layer class for inputs not in the map");
    quantize->add_option("--mode", q_mode, "storage mode: v2 | v2a");
    quantize->add_option("--residual", q_residual, "outlier convention: add | overwrite");
    quantize->add_option("-o,--out", q_out, "output .xfpq path");
    quantize->add_option("--report", q_report, "write per-layer JSON report");
    q_policy.attach(quantize);

    // dequantize
    auto* dequantize = app.add_subcommand("dequantize", "decode a .xfpq container to .xwt files");
    std::string d_input, d_outdir = ".", d_dtype = "f32";
    dequantize->add_option("input", d_input, "input .xfpq")->required();
    dequantize->add_option("-o,--outdir", d_outdir, "output directory");
    dequantize->add_option("--dtype", d_dtype, "output dtype: f32 | f16");

    // report
    auto* report = app.add_subcommand("report", "effective bits and reconstruction quality");
    std::string r_input, r_json;
    std::vector<std::string> r_originals;
    report->add_option("input", r_input, "input .xfpq")->required();
    report->add_option("--originals", r_originals,
                       "original .xwt files, one per layer in container order");
    report->add_option("--json", r_json, "write machine-readable JSON report");

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "threshold sweep with memory estimates");
    std::string s_profile, s_grid, s_verdicts, s_json;
    bool s_preset = false;
    PolicyCli s_policy;
    sweep_cmd->add_option("--profile", s_profile, "model profile JSON")->required();
    sweep_cmd->add_option("--grid", s_grid, "grid JSON (list of {label, tau_strict, tau_lazy})");
    sweep_cmd->add_flag("--preset", s_preset, "use the built-in G/H1/H1.5/H1.7/H grid");
    sweep_cmd->add_option("--verdicts", s_verdicts, "external generation verdicts JSON");
    sweep_cmd->add_option("--json", s_json, "write machine-readable sweep report");
    s_policy.attach(sweep_cmd);

    // breakeven
    auto* breakeven = app.add_subcommand("breakeven", "bits-vs-outliers break-even fraction");
    double b_low = 3.0, b_high = 4.0, b_cap = 0.02, b_bytes = 18.0;
    breakeven->add_option("--bits-low", b_low, "lower bit width");
    breakeven->add_option("--bits-high", b_high, "higher bit width");
    breakeven->add_option("--cap", b_cap, "outlier cap of the higher-bit path");
    breakeven->add_option("--bytes-per-outlier", b_bytes, "storage per outlier triple");

    // geometry
    auto* geometry = app.add_subcommand("geometry", "v2a lane geometry admissibility");
    int g_bits = 4;
    std::size_t g_group = 128;
    geometry->add_option("--bits", g_bits, "bit width N");
    geometry->add_option("--group", g_group, "group size");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            return cmd_synth(synth_profile, profiles_file, synth_rows, synth_cols, synth_seed,
                             synth_out, synth_list);
        }
        if (quantize->parsed()) {
            return cmd_quantize(q_inputs, q_class_map, q_class, q_mode, q_out, q_report,
                                q_residual, q_policy);
        }
        if (dequantize->parsed()) {
            return cmd_dequantize(d_input, d_outdir, d_dtype);
        }
        if (report->parsed()) {
            return cmd_report(r_input, r_originals, r_json);
        }
        if (sweep_cmd->parsed()) {
            return cmd_sweep(s_profile, s_grid, s_preset, s_verdicts, s_json, s_policy);
        }
        if (breakeven->parsed()) {
            return cmd_breakeven(b_low, b_high, b_cap, b_bytes);
        }
        if (geometry->parsed()) {
            return cmd_geometry(g_bits, g_group);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
