#include "rawvid/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rawvid/demosaic.hpp"
#include "rawvid/warp.hpp"

namespace rawvid {

namespace {

constexpr double kPresmoothSigma = 0.8;
constexpr double kGradIsZero = 1e-10;
constexpr int kMinCoarsestSize = 16;

void gaussian_blur(Plane& img, double sigma) {
    if (sigma <= 0.0) return;
    const int radius = std::max(1, static_cast<int>(std::ceil(5.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[i + radius];
    }
    for (double& v : k) v /= sum;
    const int w = img.width();
    const int h = img.height();
    Plane tmp(w, h);
    for (int y = 0; y < h; ++y) {
        auto row = img.row(y);
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int i = -radius; i <= radius; ++i) s += k[i + radius] * row[reflect_index(x + i, w)];
            tmp(x, y) = s;
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int i = -radius; i <= radius; ++i) s += k[i + radius] * tmp(x, reflect_index(y + i, h));
            img(x, y) = s;
        }
    }
}

Plane zoom_out(const Plane& in, double factor) {
    const int w = static_cast<int>(in.width() * factor + 0.5);
    const int h = static_cast<int>(in.height() * factor + 0.5);
    Plane smoothed = in;
    gaussian_blur(smoothed, 0.6 * std::sqrt(1.0 / (factor * factor) - 1.0));
    Plane out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) out(x, y) = sample_bicubic(smoothed, x / factor, y / factor);
    }
    return out;
}

Plane zoom_in(const Plane& in, int width, int height) {
    const double fx = static_cast<double>(in.width()) / width;
    const double fy = static_cast<double>(in.height()) / height;
    Plane out(width, height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) out(x, y) = sample_bicubic(in, x * fx, y * fy);
    }
    return out;
}

void centered_gradient(const Plane& img, Plane& gx, Plane& gy) {
    const int w = img.width();
    const int h = img.height();
    gx = Plane(w, h);
    gy = Plane(w, h);
    for (int y = 0; y < h; ++y) {
        const int ym = std::max(y - 1, 0), yp = std::min(y + 1, h - 1);
        for (int x = 0; x < w; ++x) {
            const int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
            gx(x, y) = 0.5 * (img(xp, y) - img(xm, y));
            gy(x, y) = 0.5 * (img(x, yp) - img(x, ym));
        }
    }
}

// Forward differences with zero at the last column/row.
void forward_gradient(const Plane& f, Plane& fx, Plane& fy) {
    const int w = f.width();
    const int h = f.height();
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            fx(x, y) = x + 1 < w ? f(x + 1, y) - f(x, y) : 0.0;
            fy(x, y) = y + 1 < h ? f(x, y + 1) - f(x, y) : 0.0;
        }
    }
}

// Negative adjoint of forward_gradient.
void backward_divergence(const Plane& p1, const Plane& p2, Plane& div) {
    const int w = p1.width();
    const int h = p1.height();
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double dx, dy;
            if (w == 1) dx = 0.0;
            else if (x == 0) dx = p1(x, y);
            else if (x == w - 1) dx = -p1(x - 1, y);
            else dx = p1(x, y) - p1(x - 1, y);
            if (h == 1) dy = 0.0;
            else if (y == 0) dy = p2(x, y);
            else if (y == h - 1) dy = -p2(x, y - 1);
            else dy = p2(x, y) - p2(x, y - 1);
            div(x, y) = dx + dy;
        }
    }
}

double relaxed_energy(const Plane& u1, const Plane& u2, const Plane& v1, const Plane& v2, const Plane& rho_c,
                      const Plane& i1wx, const Plane& i1wy, const TvL1Params& params) {
    const int w = u1.width();
    const int h = u1.height();
    double tv = 0.0, coupling = 0.0, data = 0.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double a1 = x + 1 < w ? u1(x + 1, y) - u1(x, y) : 0.0;
            const double b1 = y + 1 < h ? u1(x, y + 1) - u1(x, y) : 0.0;
            const double a2 = x + 1 < w ? u2(x + 1, y) - u2(x, y) : 0.0;
            const double b2 = y + 1 < h ? u2(x, y + 1) - u2(x, y) : 0.0;
            tv += std::hypot(a1, b1) + std::hypot(a2, b2);
            const double d1 = u1(x, y) - v1(x, y);
            const double d2 = u2(x, y) - v2(x, y);
            coupling += d1 * d1 + d2 * d2;
            data += std::abs(rho_c(x, y) + i1wx(x, y) * v1(x, y) + i1wy(x, y) * v2(x, y));
        }
    }
    return tv + coupling / (2.0 * params.theta) + params.lambda * data;
}

void tvl1_single_scale(const Plane& i0, const Plane& i1, Plane& u1, Plane& u2, const TvL1Params& params, int scale,
                       const TvL1EnergyObserver& observer) {
    const int w = i0.width();
    const int h = i0.height();
    const double l_t = params.lambda * params.theta;
    const double taut = params.tau / params.theta;
    const std::size_t size = static_cast<std::size_t>(w) * h;

    Plane i1x, i1y;
    centered_gradient(i1, i1x, i1y);
    Plane p11(w, h), p12(w, h), p21(w, h), p22(w, h);
    Plane v1(w, h), v2(w, h), rho_c(w, h), grad(w, h);
    Plane div1(w, h), div2(w, h), u1x(w, h), u1y(w, h), u2x(w, h), u2y(w, h);

    for (int warp = 0; warp < params.warps; ++warp) {
        FlowField current;
        current.u = u1;
        current.v = u2;
        const Plane i1w = warp_plane(i1, current).values;
        const Plane i1wx = warp_plane(i1x, current).values;
        const Plane i1wy = warp_plane(i1y, current).values;
        for (std::size_t i = 0; i < size; ++i) {
            const double gx = i1wx.values()[i], gy = i1wy.values()[i];
            grad.values()[i] = gx * gx + gy * gy;
            rho_c.values()[i] = i1w.values()[i] - gx * u1.values()[i] - gy * u2.values()[i] - i0.values()[i];
        }

        double error = std::numeric_limits<double>::infinity();
        for (int n = 0; n < params.max_iterations && error > params.epsilon * params.epsilon; ++n) {
            // pointwise thresholding of the linearized residual
            for (std::size_t i = 0; i < size; ++i) {
                const double gx = i1wx.values()[i], gy = i1wy.values()[i];
                const double g2 = grad.values()[i];
                const double rho = rho_c.values()[i] + gx * u1.values()[i] + gy * u2.values()[i];
                double d1, d2;
                if (rho < -l_t * g2) {
                    d1 = l_t * gx;
                    d2 = l_t * gy;
                } else if (rho > l_t * g2) {
                    d1 = -l_t * gx;
                    d2 = -l_t * gy;
                } else if (g2 < kGradIsZero) {
                    d1 = d2 = 0.0;
                } else {
                    const double fi = -rho / g2;
                    d1 = fi * gx;
                    d2 = fi * gy;
                }
                v1.values()[i] = u1.values()[i] + d1;
                v2.values()[i] = u2.values()[i] + d2;
            }

            backward_divergence(p11, p12, div1);
            backward_divergence(p21, p22, div2);
            error = 0.0;
            for (std::size_t i = 0; i < size; ++i) {
                const double a = u1.values()[i], b = u2.values()[i];
                u1.values()[i] = v1.values()[i] + params.theta * div1.values()[i];
                u2.values()[i] = v2.values()[i] + params.theta * div2.values()[i];
                error += (u1.values()[i] - a) * (u1.values()[i] - a) + (u2.values()[i] - b) * (u2.values()[i] - b);
            }
            error /= static_cast<double>(size);

            // dual ascent on the TV term (Jacobi update, every pixel from the previous iterate)
            forward_gradient(u1, u1x, u1y);
            forward_gradient(u2, u2x, u2y);
            for (std::size_t i = 0; i < size; ++i) {
                const double ng1 = 1.0 + taut * std::hypot(u1x.values()[i], u1y.values()[i]);
                const double ng2 = 1.0 + taut * std::hypot(u2x.values()[i], u2y.values()[i]);
                p11.values()[i] = (p11.values()[i] + taut * u1x.values()[i]) / ng1;
                p12.values()[i] = (p12.values()[i] + taut * u1y.values()[i]) / ng1;
                p21.values()[i] = (p21.values()[i] + taut * u2x.values()[i]) / ng2;
                p22.values()[i] = (p22.values()[i] + taut * u2y.values()[i]) / ng2;
            }

            if (observer) {
                observer(TvL1EnergySample{scale, warp, n,
                                          relaxed_energy(u1, u2, v1, v2, rho_c, i1wx, i1wy, params)});
            }
        }
    }
}

}  // namespace

void TvL1Params::validate() const {
    if (!(tau > 0.0 && tau <= 0.25)) throw Error("tvl1: tau must be in (0, 0.25]");
    if (!(zoom > 0.0 && zoom < 1.0)) throw Error("tvl1: zoom factor must be in (0, 1)");
    if (!(lambda > 0.0) || !(theta > 0.0)) throw Error("tvl1: lambda and theta must be positive");
    if (scales < 0) throw Error("tvl1: scales must be >= 1 (or 0 for automatic)");
    if (warps < 1 || max_iterations < 1) throw Error("tvl1: warps and max_iterations must be >= 1");
    if (!(epsilon > 0.0)) throw Error("tvl1: epsilon must be positive");
}

int tvl1_scale_count(int width, int height, const TvL1Params& params) {
    const double diag = std::hypot(width, height);
    int n = 1 + static_cast<int>(std::log(diag / kMinCoarsestSize) / std::log(1.0 / params.zoom));
    if (params.scales > 0) n = std::min(n, params.scales);
    n = std::max(n, 1);
    // keep the coarsest level at least 16 px on its short side
    while (n > 1 && std::min(width, height) * std::pow(params.zoom, n - 1) < kMinCoarsestSize) --n;
    return n;
}

FlowField tvl1_flow(const Plane& target, const Plane& reference, const TvL1Params& params,
                    const TvL1EnergyObserver& observer) {
    params.validate();
    require_same_shape(target, reference, "tvl1_flow");
    if (target.empty()) throw Error("tvl1_flow: empty frames");

    // joint normalization to [0, 255]
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const Plane* p : {&target, &reference}) {
        for (double v : p->values()) {
            if (!std::isfinite(v)) throw Error("tvl1_flow: non-finite input");
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    Plane i0 = target, i1 = reference;
    if (hi > lo) {
        const double s = 255.0 / (hi - lo);
        for (double& v : i0.values()) v = (v - lo) * s;
        for (double& v : i1.values()) v = (v - lo) * s;
    }
    gaussian_blur(i0, kPresmoothSigma);
    gaussian_blur(i1, kPresmoothSigma);

    const int n = tvl1_scale_count(target.width(), target.height(), params);
    std::vector<Plane> p0{i0}, p1{i1};
    for (int s = 1; s < n; ++s) {
        p0.push_back(zoom_out(p0.back(), params.zoom));
        p1.push_back(zoom_out(p1.back(), params.zoom));
    }

    Plane u1(p0.back().width(), p0.back().height());
    Plane u2(p0.back().width(), p0.back().height());
    for (int s = n - 1; s >= 0; --s) {
        tvl1_single_scale(p0[s], p1[s], u1, u2, params, s, observer);
        if (s == 0) break;
        const int w = p0[s - 1].width();
        const int h = p0[s - 1].height();
        u1 = zoom_in(u1, w, h);
        u2 = zoom_in(u2, w, h);
        for (double& v : u1.values()) v /= params.zoom;
        for (double& v : u2.values()) v /= params.zoom;
    }
    FlowField flow;
    flow.u = std::move(u1);
    flow.v = std::move(u2);
    return flow;
}

Plane flow_input(const RawFrame& raw) { return luminance(demosaic_ha(raw)); }

Plane divergence(const FlowField& flow) {
    const int w = flow.width();
    const int h = flow.height();
    Plane div(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
            const int ym = std::max(y - 1, 0), yp = std::min(y + 1, h - 1);
            const double dx = xp > xm ? (flow.u(xp, y) - flow.u(xm, y)) / (xp - xm) : 0.0;
            const double dy = yp > ym ? (flow.v(x, yp) - flow.v(x, ym)) / (yp - ym) : 0.0;
            div(x, y) = dx + dy;
        }
    }
    return div;
}

OcclusionMask occlusion_mask(const FlowField& forward, const FlowField& backward, const OcclusionParams& params) {
    if (forward.width() != backward.width() || forward.height() != backward.height()) {
        throw Error("occlusion_mask: flow dimensions differ");
    }
    const int w = forward.width();
    const int h = forward.height();
    const Plane div = divergence(forward);
    OcclusionMask mask(w, h, 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double fu = forward.u(x, y), fv = forward.v(x, y);
            const double bu = sample_bilinear(backward.u, x + fu, y + fv);
            const double bv = sample_bilinear(backward.v, x + fu, y + fv);
            const double su = fu + bu, sv = fv + bv;
            const double lhs = su * su + sv * sv;
            const double rhs = params.alpha * (fu * fu + fv * fv + bu * bu + bv * bv) + params.beta;
            mask(x, y) = (lhs < rhs && div(x, y) > -params.div_threshold) ? 1 : 0;
        }
    }
    return mask;
}

}  // namespace rawvid
