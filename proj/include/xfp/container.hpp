#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "xfp/detail/bytes.hpp"
#include "xfp/detail/crc32.hpp"
#include "xfp/lloyd.hpp"
#include "xfp/outlier.hpp"
#include "xfp/packing.hpp"
#include "xfp/policy.hpp"
#include "xfp/tensor.hpp"
#include "xfp/v2a.hpp"

namespace xfp {

// One quantized weight matrix: packed indices, the codebook payload of the
// storage mode, and the sparse outlier set.
struct QuantizedLayer {
    StorageMode mode = StorageMode::v2;
    int n_bits = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    LayerClass cls = LayerClass::self_attention;
    ResidualConvention residual_convention = ResidualConvention::add;
    GroupOrientation orientation = GroupOrientation::rows;
    std::size_t group_size = 0; // V2a only; 0 under V2

    PackedIndices packed;
    ChannelCodebookSet channel_codebooks;     // V2 payload
    CodebookLibrary library;                  // V2a payload
    std::vector<GroupAssignment> assignments; // V2a payload
    OutlierSet outliers;

    std::size_t numel() const noexcept { return rows * cols; }

    friend bool operator==(const QuantizedLayer&, const QuantizedLayer&) = default;
};

namespace detail {

inline void check_layer_mode(StorageMode mode, int n_bits, std::size_t group_size) {
    scheme_for(n_bits); // throws on unsupported N
    if (mode == StorageMode::v2a) {
        if (n_bits != 2 && n_bits != 4) {
            throw std::invalid_argument("v2a supports only N in {2, 4}");
        }
        if (!v2a_lane_geometry(n_bits, group_size).admissible) {
            throw std::invalid_argument("v2a lane geometry inadmissible for this group size");
        }
    }
}

} // namespace detail

// Storage cost per parameter, split into its three parts. The headline
// accounting-with-outliers is `total`; `without_outliers` reports the
// index+codebook cost alone.
struct EffectiveBits {
    double index_bits_per_weight = 0.0;
    double codebook_overhead_bits_per_weight = 0.0;
    double outlier_bits_per_weight = 0.0;
    double total = 0.0;

    double without_outliers() const noexcept { return total - outlier_bits_per_weight; }
};

inline EffectiveBits effective_bits_formula(StorageMode mode, int n_bits, std::size_t rows,
                                            std::size_t cols, std::size_t group_size,
                                            std::size_t library_size,
                                            double outlier_fraction) {
    const PackingScheme& s = scheme_for(n_bits);
    const double numel = static_cast<double>(rows) * static_cast<double>(cols);
    EffectiveBits eb;
    eb.index_bits_per_weight = static_cast<double>(s.word_bits) / s.values_per_word;
    if (mode == StorageMode::v2) {
        eb.codebook_overhead_bits_per_weight =
            static_cast<double>(std::size_t{1} << n_bits) * 16.0 * static_cast<double>(rows) /
            numel;
    } else {
        // byte-aligned assignment + fp16 scale + fp16 mid per group, plus the
        // library amortized over the layer
        eb.codebook_overhead_bits_per_weight =
            (8.0 + 16.0 + 16.0) / static_cast<double>(group_size) +
            static_cast<double>(library_size) * static_cast<double>(std::size_t{1} << n_bits) *
                16.0 / numel;
    }
    eb.outlier_bits_per_weight = 144.0 * outlier_fraction; // 18 bytes per triple
    eb.total = eb.index_bits_per_weight + eb.codebook_overhead_bits_per_weight +
               eb.outlier_bits_per_weight;
    return eb;
}

inline EffectiveBits effective_bits(const QuantizedLayer& layer) {
    return effective_bits_formula(
        layer.mode, layer.n_bits, layer.rows, layer.cols,
        layer.mode == StorageMode::v2a ? layer.group_size : 1,
        layer.mode == StorageMode::v2a ? layer.library.size() : 0,
        static_cast<double>(layer.outliers.entries.size()) / static_cast<double>(layer.numel()));
}

// Scalar reference decode: unpack indices, gather codebook values, apply the
// outlier path per the layer's residual convention.
inline WeightMatrix decode_layer_bulk(const QuantizedLayer& layer) {
    detail::check_layer_mode(layer.mode, layer.n_bits, layer.group_size);
    const IndexMatrix indices = unpack(layer.packed);
    if (indices.rows != layer.rows || indices.cols != layer.cols) {
        throw std::runtime_error("decode_layer: packed shape mismatch");
    }
    if (layer.mode == StorageMode::v2) {
        return decode_channels(layer.channel_codebooks, indices);
    }
    return decode_groups(layer.library, layer.assignments, indices, layer.group_size,
                         layer.orientation);
}

inline WeightMatrix decode_layer(const QuantizedLayer& layer) {
    WeightMatrix recon = decode_layer_bulk(layer);
    apply_outliers(recon, layer.outliers, layer.residual_convention);
    return recon;
}

// Fixed-bit-width encode: outlier extraction, codebook fit, index assignment,
// residual finalization, packing. auto_select drives this per candidate.
struct EncodeArtifacts {
    QuantizedLayer layer;
    WeightMatrix bulk_recon;
    WeightMatrix full_recon;
};

inline EncodeArtifacts encode_with_bits(const WeightMatrix& w, LayerClass cls, int n_bits,
                                        const QualityPolicy& policy, StorageMode mode,
                                        GroupOrientation orientation = GroupOrientation::rows,
                                        ResidualConvention convention = ResidualConvention::add) {
    policy.validate();
    detail::check_layer_mode(mode, n_bits, policy.group_size);

    auto [bulk, outliers] = extract_outliers(w, policy.k, policy.cap_fraction);

    QuantizedLayer layer;
    layer.mode = mode;
    layer.n_bits = n_bits;
    layer.rows = w.rows();
    layer.cols = w.cols();
    layer.cls = cls;
    layer.residual_convention = convention;
    layer.orientation = orientation;

    IndexMatrix indices;
    WeightMatrix bulk_recon(1, 1);
    if (mode == StorageMode::v2) {
        layer.channel_codebooks = fit_channel_codebooks(bulk, n_bits, policy.lloyd_iters);
        indices = assign_indices(bulk, layer.channel_codebooks);
        bulk_recon = decode_channels(layer.channel_codebooks, indices);
    } else {
        const ChannelCodebookSet channel_cbs =
            fit_channel_codebooks(bulk, n_bits, policy.lloyd_iters);
        const int libfit_iters =
            cls == LayerClass::routed_expert ? policy.moe_lloyd_iters : policy.lloyd_iters;
        layer.library = libfit(channel_cbs, policy.library_size, libfit_iters).library;
        layer.group_size = policy.group_size;
        auto [assignments, im] = assign_groups(bulk, layer.library, policy.group_size, orientation);
        layer.assignments = std::move(assignments);
        indices = std::move(im);
        bulk_recon = decode_groups(layer.library, layer.assignments, indices, layer.group_size,
                                   orientation);
    }

    if (convention == ResidualConvention::add) {
        layer.outliers = finalize_residuals(std::move(outliers), w, bulk_recon);
    } else {
        layer.outliers = std::move(outliers); // raw values, scatter-overwrite at decode
    }
    layer.packed = pack(indices, n_bits);

    WeightMatrix full_recon = bulk_recon;
    apply_outliers(full_recon, layer.outliers, convention);
    return {std::move(layer), std::move(bulk_recon), std::move(full_recon)};
}

// ---------------------------------------------------------------------------
// ".xfpq" container: magic "XFPQ", u16 version, u16 layer count, then one
// self-checksummed record per layer. Little-endian throughout; layout pinned
// in docs/FORMAT.md.

inline constexpr char kXfpqMagic[4] = {'X', 'F', 'P', 'Q'};
inline constexpr std::uint16_t kXfpqVersion = 1;

namespace detail {

inline void write_layer_record(ByteWriter& out, const QuantizedLayer& layer) {
    ByteWriter rec;
    rec.u8(static_cast<std::uint8_t>(layer.mode));
    rec.u8(static_cast<std::uint8_t>(layer.n_bits));
    rec.u8(static_cast<std::uint8_t>(layer.cls));
    std::uint8_t flags = 0;
    if (layer.residual_convention == ResidualConvention::overwrite) {
        flags |= 0x01;
    }
    if (layer.orientation == GroupOrientation::cols) {
        flags |= 0x02;
    }
    rec.u8(flags);
    rec.u32(static_cast<std::uint32_t>(layer.rows));
    rec.u32(static_cast<std::uint32_t>(layer.cols));
    rec.u32(static_cast<std::uint32_t>(layer.group_size));
    rec.u32(static_cast<std::uint32_t>(layer.mode == StorageMode::v2
                                           ? layer.channel_codebooks.codebooks.size()
                                           : layer.library.size()));
    rec.u32(static_cast<std::uint32_t>(layer.assignments.size()));
    rec.u32(static_cast<std::uint32_t>(layer.packed.words.size()));
    rec.u32(static_cast<std::uint32_t>(layer.outliers.entries.size()));
    rec.f64(layer.outliers.k);
    rec.f64(layer.outliers.cap_fraction);
    rec.f64(layer.outliers.mu_used);
    rec.f64(layer.outliers.sigma_used);

    if (layer.mode == StorageMode::v2) {
        for (const ChannelCodebook& cb : layer.channel_codebooks.codebooks) {
            for (Half h : cb.entries) {
                rec.u16(h.bits());
            }
        }
    } else {
        for (const ChannelCodebook& cb : layer.library.entries) {
            for (Half h : cb.entries) {
                rec.u16(h.bits());
            }
        }
        for (const GroupAssignment& a : layer.assignments) {
            rec.u8(a.library_index);
            rec.u16(a.scale.bits());
            rec.u16(a.mid.bits());
        }
    }
    for (std::uint32_t word : layer.packed.words) {
        if (layer.packed.scheme.word_bits == 16) {
            rec.u16(static_cast<std::uint16_t>(word));
        } else {
            rec.u32(word);
        }
    }
    for (const OutlierEntry& e : layer.outliers.entries) {
        rec.i64(e.row);
        rec.i64(e.col);
        rec.u16(e.value.bits());
    }

    out.raw(rec.bytes().data(), rec.size());
    out.u32(crc32(rec.bytes().data(), rec.size()));
}

inline QuantizedLayer read_layer_record(ByteReader& in, const std::vector<std::uint8_t>& file) {
    const std::size_t start = in.pos();
    QuantizedLayer layer;
    const std::uint8_t mode_raw = in.u8();
    if (mode_raw > 1) {
        throw std::runtime_error("xfpq: bad storage mode");
    }
    layer.mode = static_cast<StorageMode>(mode_raw);
    layer.n_bits = in.u8();
    const std::uint8_t cls_raw = in.u8();
    if (cls_raw > 4) {
        throw std::runtime_error("xfpq: bad layer class");
    }
    layer.cls = static_cast<LayerClass>(cls_raw);
    const std::uint8_t flags = in.u8();
    if (flags & ~0x03u) {
        throw std::runtime_error("xfpq: unknown flag bits");
    }
    layer.residual_convention =
        (flags & 0x01) ? ResidualConvention::overwrite : ResidualConvention::add;
    layer.orientation = (flags & 0x02) ? GroupOrientation::cols : GroupOrientation::rows;
    layer.rows = in.u32();
    layer.cols = in.u32();
    layer.group_size = in.u32();
    const std::uint32_t codebook_count = in.u32();
    const std::uint32_t assignment_count = in.u32();
    const std::uint32_t word_count = in.u32();
    const std::uint32_t outlier_count = in.u32();
    layer.outliers.k = in.f64();
    layer.outliers.cap_fraction = in.f64();
    layer.outliers.mu_used = in.f64();
    layer.outliers.sigma_used = in.f64();

    if (layer.rows == 0 || layer.cols == 0) {
        throw std::runtime_error("xfpq: empty layer shape");
    }
    detail::check_layer_mode(layer.mode, layer.n_bits, layer.group_size);
    const PackingScheme& scheme = scheme_for(layer.n_bits);
    if (word_count != packed_word_count(layer.numel(), scheme)) {
        throw std::runtime_error("xfpq: word count inconsistent with shape");
    }

    const std::size_t entry_count = std::size_t{1} << layer.n_bits;
    if (layer.mode == StorageMode::v2) {
        if (codebook_count != layer.rows || assignment_count != 0) {
            throw std::runtime_error("xfpq: v2 payload counts inconsistent");
        }
        layer.channel_codebooks.n_bits = layer.n_bits;
        layer.channel_codebooks.codebooks.resize(codebook_count);
        for (auto& cb : layer.channel_codebooks.codebooks) {
            cb.entries.reserve(entry_count);
            for (std::size_t i = 0; i < entry_count; ++i) {
                cb.entries.push_back(Half::from_bits(in.u16()));
            }
        }
    } else {
        const detail::GroupLayout layout{layer.rows, layer.cols, layer.group_size,
                                         layer.orientation};
        if (assignment_count != layout.group_count()) {
            throw std::runtime_error("xfpq: v2a assignment count inconsistent");
        }
        layer.library.n_bits = layer.n_bits;
        layer.library.entries.resize(codebook_count);
        for (auto& cb : layer.library.entries) {
            cb.entries.reserve(entry_count);
            for (std::size_t i = 0; i < entry_count; ++i) {
                cb.entries.push_back(Half::from_bits(in.u16()));
            }
        }
        layer.assignments.resize(assignment_count);
        for (auto& a : layer.assignments) {
            a.library_index = in.u8();
            if (a.library_index >= codebook_count) {
                throw std::runtime_error("xfpq: library index out of range");
            }
            a.scale = Half::from_bits(in.u16());
            a.mid = Half::from_bits(in.u16());
        }
    }

    layer.packed.scheme = scheme;
    layer.packed.element_count = layer.numel();
    layer.packed.rows = layer.rows;
    layer.packed.cols = layer.cols;
    layer.packed.words.reserve(word_count);
    for (std::uint32_t i = 0; i < word_count; ++i) {
        layer.packed.words.push_back(scheme.word_bits == 16 ? in.u16() : in.u32());
    }

    layer.outliers.entries.resize(outlier_count);
    for (auto& e : layer.outliers.entries) {
        e.row = in.i64();
        e.col = in.i64();
        e.value = Half::from_bits(in.u16());
        if (e.row < 0 || e.col < 0 || static_cast<std::size_t>(e.row) >= layer.rows ||
            static_cast<std::size_t>(e.col) >= layer.cols) {
            throw std::runtime_error("xfpq: outlier position outside matrix");
        }
    }

    const std::size_t end = in.pos();
    const std::uint32_t stored_crc = in.u32();
    const std::uint32_t actual_crc = crc32(file.data() + start, end - start);
    if (stored_crc != actual_crc) {
        throw std::runtime_error("xfpq: layer checksum mismatch");
    }
    return layer;
}

} // namespace detail

inline void save_model(const std::string& path, const std::vector<QuantizedLayer>& layers) {
    detail::ByteWriter out;
    out.raw(kXfpqMagic, 4);
    out.u16(kXfpqVersion);
    out.u16(static_cast<std::uint16_t>(layers.size()));
    for (const QuantizedLayer& layer : layers) {
        detail::write_layer_record(out, layer);
    }
    detail::write_file(path, out.bytes());
}

inline std::vector<QuantizedLayer> load_model(const std::string& path) {
    const auto bytes = detail::read_file(path);
    detail::ByteReader in(bytes);
    char magic[4];
    for (char& c : magic) {
        c = static_cast<char>(in.u8());
    }
    if (std::memcmp(magic, kXfpqMagic, 4) != 0) {
        throw std::runtime_error("xfpq: bad magic: " + path);
    }
    const std::uint16_t version = in.u16();
    if (version != kXfpqVersion) {
        throw std::runtime_error("xfpq: unsupported version " + std::to_string(version));
    }
    const std::uint16_t count = in.u16();
    std::vector<QuantizedLayer> layers;
    layers.reserve(count);
    for (std::uint16_t i = 0; i < count; ++i) {
        layers.push_back(detail::read_layer_record(in, bytes));
    }
    if (in.remaining() != 0) {
        throw std::runtime_error("xfpq: trailing bytes: " + path);
    }
    return layers;
}

} // namespace xfp
