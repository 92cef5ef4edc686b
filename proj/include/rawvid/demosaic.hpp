#pragma once

#include <string_view>

#include "rawvid/image.hpp"

namespace rawvid {

enum class DemosaicMethod { hamilton_adams, bilinear };

DemosaicMethod parse_demosaic_method(std::string_view name);

/// Hamilton-Adams. Green at red/blue sites follows the direction with the smaller
/// gradient |G_w - G_e| + |2C - C_ww - C_ee| (ties average both), estimated as the mean
/// of the two green neighbours plus (2C - C_ww - C_ee) / 4. Red and blue are then
/// interpolated bilinearly on the R-G and B-G difference planes. Borders reflect
/// without repeating the edge sample, which keeps the CFA phase. Measured samples are
/// copied through unchanged and nothing is clipped.
RgbFrame demosaic_ha(const RawFrame& raw);

/// Each missing channel is the mean of its nearest same-colour neighbours.
RgbFrame demosaic_bilinear(const RawFrame& raw);

RgbFrame demosaic(const RawFrame& raw, DemosaicMethod method);

/// Luminance 0.299 R + 0.587 G + 0.114 B.
Plane luminance(const RgbFrame& rgb);

/// Reflect index into [0, n): -1 -> 1, n -> n-2.
inline int reflect_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

}  // namespace rawvid
