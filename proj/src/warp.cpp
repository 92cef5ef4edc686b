#include "rawvid/warp.hpp"

#include <cmath>

namespace rawvid {

Interpolation parse_interpolation(std::string_view name) {
    if (name == "bicubic") return Interpolation::bicubic;
    if (name == "bilinear") return Interpolation::bilinear;
    throw Error("unknown interpolation '" + std::string(name) + "'");
}

namespace {

void cubic_weights(double t, double w[4]) {
    const double t2 = t * t;
    const double t3 = t2 * t;
    w[0] = -0.5 * t3 + t2 - 0.5 * t;
    w[1] = 1.5 * t3 - 2.5 * t2 + 1.0;
    w[2] = -1.5 * t3 + 2.0 * t2 + 0.5 * t;
    w[3] = 0.5 * t3 - 0.5 * t2;
}

}  // namespace

double sample_bicubic(const Plane& p, double x, double y) {
    const double fx = std::floor(x);
    const double fy = std::floor(y);
    const int ix = static_cast<int>(fx);
    const int iy = static_cast<int>(fy);
    const double tx = x - fx;
    const double ty = y - fy;
    const int w = p.width();
    const int h = p.height();
    if (tx == 0.0 && ty == 0.0) return p(reflect_index(ix, w), reflect_index(iy, h));
    double wx[4], wy[4];
    cubic_weights(tx, wx);
    cubic_weights(ty, wy);
    int xs[4];
    for (int k = 0; k < 4; ++k) xs[k] = reflect_index(ix - 1 + k, w);
    double sum = 0.0;
    for (int j = 0; j < 4; ++j) {
        if (wy[j] == 0.0) continue;
        auto row = p.row(reflect_index(iy - 1 + j, h));
        double s = 0.0;
        for (int k = 0; k < 4; ++k) s += wx[k] * row[xs[k]];
        sum += wy[j] * s;
    }
    return sum;
}

double sample_bilinear(const Plane& p, double x, double y) {
    const double fx = std::floor(x);
    const double fy = std::floor(y);
    const int ix = static_cast<int>(fx);
    const int iy = static_cast<int>(fy);
    const double tx = x - fx;
    const double ty = y - fy;
    const int w = p.width();
    const int h = p.height();
    const int x0 = reflect_index(ix, w), x1 = reflect_index(ix + 1, w);
    const int y0 = reflect_index(iy, h), y1 = reflect_index(iy + 1, h);
    if (tx == 0.0 && ty == 0.0) return p(x0, y0);
    return (1.0 - ty) * ((1.0 - tx) * p(x0, y0) + tx * p(x1, y0)) + ty * ((1.0 - tx) * p(x0, y1) + tx * p(x1, y1));
}

namespace {

void check_flow(const FlowField& flow, int width, int height, const char* what) {
    if (flow.width() != width || flow.height() != height || !flow.v.same_shape(flow.u)) {
        throw Error(std::string(what) + ": flow dimensions do not match the frame");
    }
    if (!flow.all_finite()) throw Error(std::string(what) + ": non-finite flow");
}

OcclusionMask validity(const FlowField& flow) {
    const int w = flow.width();
    const int h = flow.height();
    OcclusionMask valid(w, h, 1);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double px = x + flow.u(x, y);
            const double py = y + flow.v(x, y);
            if (px < 0.0 || px > w - 1 || py < 0.0 || py > h - 1) valid(x, y) = 0;
        }
    }
    return valid;
}

Plane warp_values(const Plane& input, const FlowField& flow, Interpolation interp) {
    const int w = input.width();
    const int h = input.height();
    Plane out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double du = flow.u(x, y);
            const double dv = flow.v(x, y);
            if (du == 0.0 && dv == 0.0) {
                out(x, y) = input(x, y);
                continue;
            }
            const double px = x + du;
            const double py = y + dv;
            out(x, y) = interp == Interpolation::bicubic ? sample_bicubic(input, px, py)
                                                          : sample_bilinear(input, px, py);
        }
    }
    return out;
}

}  // namespace

WarpedPlane warp_plane(const Plane& input, const FlowField& flow, Interpolation interp) {
    check_flow(flow, input.width(), input.height(), "warp");
    return {warp_values(input, flow, interp), validity(flow)};
}

WarpedRgb warp_rgb(const RgbFrame& input, const FlowField& flow, Interpolation interp) {
    check_flow(flow, input.width(), input.height(), "warp_rgb");
    WarpedRgb out;
    for (int c = 0; c < 3; ++c) out.values.channels[c] = warp_values(input.channels[c], flow, interp);
    out.valid = validity(flow);
    return out;
}

RawFrame demosaic_warp_remosaic(const RawFrame& raw, const FlowField& flow, DemosaicMethod method,
                                Interpolation interp) {
    check_flow(flow, raw.width(), raw.height(), "demosaic_warp_remosaic");
    const RgbFrame rgb = demosaic(raw, method);
    RawFrame out = mosaic(warp_rgb(rgb, flow, interp).values, raw.cfa);
    out.black_level = raw.black_level;
    out.white_level = raw.white_level;
    return out;
}

RawFrame warp_raw(const RawFrame& raw, const FlowField& flow, DemosaicMethod method, Interpolation interp) {
    return demosaic_warp_remosaic(raw, flow, method, interp);
}

}  // namespace rawvid
