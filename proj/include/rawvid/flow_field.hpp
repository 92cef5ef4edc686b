#pragma once

#include <cstdint>
#include <filesystem>

#include "rawvid/image.hpp"

namespace rawvid {

/// Dense displacement: pixel (x, y) of the target corresponds to (x + u, y + v) in the reference.
struct FlowField {
    Plane u;
    Plane v;

    FlowField() = default;
    FlowField(int width, int height, double fu = 0.0, double fv = 0.0)
        : u(width, height, fu), v(width, height, fv) {}

    int width() const { return u.width(); }
    int height() const { return u.height(); }
    bool all_finite() const;
};

/// 1 = trusted, 0 = occluded or unreliable.
using OcclusionMask = Grid<std::uint8_t>;

/// Middlebury .flo: "PIEH", int32 width, int32 height, then interleaved float32 (u, v), all little-endian.
void write_flo(const std::filesystem::path& path, const FlowField& flow);
FlowField read_flo(const std::filesystem::path& path);

/// 8-bit PGM with 0 / 255.
void write_mask_pgm(const std::filesystem::path& path, const OcclusionMask& mask);
OcclusionMask read_mask_pgm(const std::filesystem::path& path);

}  // namespace rawvid
