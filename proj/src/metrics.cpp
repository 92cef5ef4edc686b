#include "rawvid/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace rawvid {

double psnr(const Plane& a, const Plane& b, double peak) {
    require_same_shape(a, b, "psnr");
    if (!(peak > 0.0)) throw Error("psnr: peak must be positive");
    if (a.empty()) throw Error("psnr: empty images");
    auto va = a.values();
    auto vb = b.values();
    double sum = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) {
        const double d = va[i] - vb[i];
        sum += d * d;
    }
    const double mse = sum / static_cast<double>(va.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

namespace {

std::array<double, kSsimWindow> gaussian_window() {
    std::array<double, kSsimWindow> w{};
    double sum = 0.0;
    const int r = kSsimWindow / 2;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double d = i - r;
        w[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
        sum += w[i];
    }
    for (double& v : w) v /= sum;
    return w;
}

// Separable 'valid' filtering with the normalized Gaussian window.
Plane filter_valid(const Plane& in) {
    static const auto w = gaussian_window();
    const int ow = in.width() - kSsimWindow + 1;
    const int oh = in.height() - kSsimWindow + 1;
    Plane tmp(ow, in.height());
    for (int y = 0; y < in.height(); ++y) {
        auto row = in.row(y);
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int k = 0; k < kSsimWindow; ++k) s += w[k] * row[x + k];
            tmp(x, y) = s;
        }
    }
    Plane out(ow, oh);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int k = 0; k < kSsimWindow; ++k) s += w[k] * tmp(x, y + k);
            out(x, y) = s;
        }
    }
    return out;
}

Plane product(const Plane& a, const Plane& b) {
    Plane out(a.width(), a.height());
    auto va = a.values();
    auto vb = b.values();
    auto vo = out.values();
    for (std::size_t i = 0; i < va.size(); ++i) vo[i] = va[i] * vb[i];
    return out;
}

}  // namespace

double ssim(const Plane& a, const Plane& b, double dynamic_range) {
    require_same_shape(a, b, "ssim");
    if (a.width() < kSsimWindow || a.height() < kSsimWindow) {
        throw Error("ssim: images smaller than the 11x11 window");
    }
    if (!(dynamic_range > 0.0)) throw Error("ssim: dynamic range must be positive");
    const double c1 = (0.01 * dynamic_range) * (0.01 * dynamic_range);
    const double c2 = (0.03 * dynamic_range) * (0.03 * dynamic_range);

    const Plane mu_a = filter_valid(a);
    const Plane mu_b = filter_valid(b);
    const Plane aa = filter_valid(product(a, a));
    const Plane bb = filter_valid(product(b, b));
    const Plane ab = filter_valid(product(a, b));

    double total = 0.0;
    auto ma = mu_a.values();
    auto mb = mu_b.values();
    auto saa = aa.values();
    auto sbb = bb.values();
    auto sab = ab.values();
    for (std::size_t i = 0; i < ma.size(); ++i) {
        const double var_a = saa[i] - ma[i] * ma[i];
        const double var_b = sbb[i] - mb[i] * mb[i];
        const double cov = sab[i] - ma[i] * mb[i];
        const double num = (2.0 * ma[i] * mb[i] + c1) * (2.0 * cov + c2);
        const double den = (ma[i] * ma[i] + mb[i] * mb[i] + c1) * (var_a + var_b + c2);
        total += num / den;
    }
    return total / static_cast<double>(ma.size());
}

double ssim_raw(const Plane& a, const Plane& b, double dynamic_range) {
    require_same_shape(a, b, "ssim_raw");
    const auto pa = pack_planes(a);
    const auto pb = pack_planes(b);
    double sum = 0.0;
    for (int i = 0; i < 4; ++i) sum += ssim(pa[i], pb[i], dynamic_range);
    return sum / 4.0;
}

RgbFrame gamma_display(const RgbFrame& rgb, double gamma, std::array<double, 3> gains) {
    if (!(gamma > 0.0)) throw Error("gamma_display: gamma must be positive");
    RgbFrame out(rgb.width(), rgb.height());
    const double inv = 1.0 / gamma;
    for (int c = 0; c < 3; ++c) {
        auto src = rgb.channels[c].values();
        auto dst = out.channels[c].values();
        for (std::size_t i = 0; i < src.size(); ++i) {
            const double v = std::clamp(src[i] * gains[c], 0.0, 1.0);
            dst[i] = std::pow(v, inv);
        }
    }
    return out;
}

}  // namespace rawvid
