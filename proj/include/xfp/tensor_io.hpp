#pragma once

#include <cstdint>
#include <string>

#include "xfp/detail/bytes.hpp"
#include "xfp/tensor.hpp"

namespace xfp {

// Raw tensor file ".xwt": 16-byte header (magic "XWT0", u32 rows, u32 cols,
// u32 dtype tag), little-endian, followed by the row-major payload.

enum class XwtDtype : std::uint32_t {
    f32 = 0,
    f16 = 1,
};

inline constexpr char kXwtMagic[4] = {'X', 'W', 'T', '0'};

inline void write_xwt(const std::string& path, const WeightMatrix& w,
                      XwtDtype dtype = XwtDtype::f32) {
    detail::ByteWriter out;
    out.raw(kXwtMagic, 4);
    out.u32(static_cast<std::uint32_t>(w.rows()));
    out.u32(static_cast<std::uint32_t>(w.cols()));
    out.u32(static_cast<std::uint32_t>(dtype));
    if (dtype == XwtDtype::f32) {
        for (float v : w.values()) {
            out.f32(v);
        }
    } else {
        for (float v : w.values()) {
            const Half h = Half::from_float(v);
            if (!std::isfinite(h.to_float())) {
                throw std::invalid_argument("write_xwt: value not representable in binary16");
            }
            out.u16(h.bits());
        }
    }
    detail::write_file(path, out.bytes());
}

inline WeightMatrix read_xwt(const std::string& path) {
    const auto bytes = detail::read_file(path);
    detail::ByteReader in(bytes);
    char magic[4];
    for (char& c : magic) {
        c = static_cast<char>(in.u8());
    }
    if (std::memcmp(magic, kXwtMagic, 4) != 0) {
        throw std::runtime_error("read_xwt: bad magic: " + path);
    }
    const std::uint32_t rows = in.u32();
    const std::uint32_t cols = in.u32();
    const std::uint32_t dtype = in.u32();
    if (rows == 0 || cols == 0) {
        throw std::runtime_error("read_xwt: empty shape: " + path);
    }
    std::vector<float> data;
    data.reserve(static_cast<std::size_t>(rows) * cols);
    if (dtype == static_cast<std::uint32_t>(XwtDtype::f32)) {
        for (std::size_t i = 0; i < static_cast<std::size_t>(rows) * cols; ++i) {
            data.push_back(in.f32());
        }
    } else if (dtype == static_cast<std::uint32_t>(XwtDtype::f16)) {
        for (std::size_t i = 0; i < static_cast<std::size_t>(rows) * cols; ++i) {
            data.push_back(Half::from_bits(in.u16()).to_float());
        }
    } else {
        throw std::runtime_error("read_xwt: unknown dtype tag: " + path);
    }
    if (in.remaining() != 0) {
        throw std::runtime_error("read_xwt: trailing bytes: " + path);
    }
    return WeightMatrix(rows, cols, std::move(data));
}

} // namespace xfp
