#pragma once

#include <string_view>

#include "rawvid/demosaic.hpp"
#include "rawvid/flow_field.hpp"
#include "rawvid/image.hpp"

namespace rawvid {

enum class Interpolation { bicubic, bilinear };

Interpolation parse_interpolation(std::string_view name);

/// Catmull-Rom (Keys, a = -0.5) sample at real position (x, y) with reflected borders.
double sample_bicubic(const Plane& plane, double x, double y);
double sample_bilinear(const Plane& plane, double x, double y);

struct WarpedPlane {
    Plane values;
    OcclusionMask valid;  // 0 where x + flow(x) falls outside the frame
};

/// output(x) = input(x + flow(x)). Integer-valued displacements reproduce the input samples exactly.
WarpedPlane warp_plane(const Plane& input, const FlowField& flow, Interpolation interp = Interpolation::bicubic);

struct WarpedRgb {
    RgbFrame values;
    OcclusionMask valid;
};

WarpedRgb warp_rgb(const RgbFrame& input, const FlowField& flow, Interpolation interp = Interpolation::bicubic);

/// mosaic(warp_rgb(demosaic(raw), flow)). Zero flow returns the input exactly.
RawFrame demosaic_warp_remosaic(const RawFrame& raw, const FlowField& flow,
                                DemosaicMethod method = DemosaicMethod::hamilton_adams,
                                Interpolation interp = Interpolation::bicubic);

/// Raw-domain warp used by the losses; same as demosaic_warp_remosaic.
RawFrame warp_raw(const RawFrame& raw, const FlowField& flow, DemosaicMethod method = DemosaicMethod::hamilton_adams,
                  Interpolation interp = Interpolation::bicubic);

}  // namespace rawvid
