#pragma once

#include <array>
#include <limits>

#include "rawvid/image.hpp"

namespace rawvid {

/// 10*log10(peak^2 / MSE). Returns +infinity when the images are identical.
double psnr(const Plane& a, const Plane& b, double peak = 1.0);

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

/// Mean local SSIM over all fully contained 11x11 Gaussian windows (sigma 1.5),
/// C1 = (0.01 L)^2, C2 = (0.03 L)^2. Images smaller than the window are rejected.
double ssim(const Plane& a, const Plane& b, double dynamic_range = 1.0);

/// SSIM of two mosaicked frames: computed on each of the four packed planes and averaged.
double ssim_raw(const Plane& a, const Plane& b, double dynamic_range = 1.0);

/// Display rendering: per-channel gain, clamp to [0,1], then x^(1/gamma).
RgbFrame gamma_display(const RgbFrame& rgb, double gamma = 2.2, std::array<double, 3> gains = {1.0, 1.0, 1.0});

}  // namespace rawvid
