#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "rawvid/image.hpp"
#include "rawvid/random.hpp"
#include "rawvid/tonemap.hpp"

namespace rawvid {

using Matrix3 = std::array<std::array<double, 3>, 3>;

Matrix3 invert(const Matrix3& m);
double determinant(const Matrix3& m);

/// Colour correction matrix (camera RGB -> linear sRGB, rows summing to one) and CFA
/// of the simulated camera. Unprocessing multiplies by the inverse of ccm.
struct CameraProfile {
    Matrix3 ccm{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    CfaPattern cfa = CfaPattern::RGGB;

    /// Throws unless |det| > 1e-8 and every row sums to 1 within 1e-6.
    void validate() const;
};

/// The built-in single-camera profile.
CameraProfile default_camera_profile();
CameraProfile read_camera_profile(const std::filesystem::path& path);
void write_camera_profile(const std::filesystem::path& path, const CameraProfile& profile);

inline constexpr double kRedGainMin = 1.9;
inline constexpr double kRedGainMax = 2.4;
inline constexpr double kBlueGainMin = 1.5;
inline constexpr double kBlueGainMax = 1.9;
inline constexpr double kGlobalGainMean = 0.8;
inline constexpr double kGlobalGainStd = 0.1;

struct GainSample {
    double red = 1.0;
    double blue = 1.0;
    double global = 1.0;
    static constexpr double green = 1.0;

    /// Total multiplicative gain applied to channel c while unprocessing: global / g_c.
    double channel_factor(Channel c) const;
};

/// Red ~ U[1.9, 2.4], blue ~ U[1.5, 1.9], global ~ N(0.8, 0.1) clipped to at most 1.
GainSample sample_gains(RngStream& rng);

/// (code + U[-1/2, 1/2)) / 255 per pixel.
Plane dequantize(const Grid<int>& srgb8, RngStream& rng);

double srgb_to_linear(double v);
double linear_to_srgb(double v);
void srgb_to_linear(Plane& plane);
void linear_to_srgb(Plane& plane);

RgbFrame apply_ccm(const RgbFrame& rgb, const Matrix3& m);
RgbFrame apply_inverse_ccm(const RgbFrame& rgb, const CameraProfile& profile);
RgbFrame apply_inverse_whitebalance(const RgbFrame& rgb, const GainSample& gains);

struct UnprocessOptions {
    bool dequantize = true;
    bool clip_unit = true;  // clip to [0,1] after inverting white balance
    // sensor levels stamped on the produced frames; the gap leaves room for noise excursions
    int black_level = 4096;
    int white_level = 61439;
};

/// One 8-bit sRGB frame as three code grids.
using Srgb8Frame = std::array<Grid<int>, 3>;

struct Srgb8Sequence {
    std::string id;
    double frame_rate = 0.0;
    std::vector<Srgb8Frame> frames;
};

/// Everything up to and including mosaicing, before tone mapping. The gain draw
/// comes from the "gains" stage stream of the sequence and is shared by all its frames;
/// dither noise uses one "dither" stream per frame.
RawSequence unprocess_sequence_linear(const Srgb8Sequence& video, const CameraProfile& profile,
                                      std::uint64_t seed, const UnprocessOptions& options = {},
                                      GainSample* gains_out = nullptr);

/// Pools all mosaiced values of the given sequences.
std::vector<double> pooled_values(const std::vector<RawSequence>& sequences);

void apply_tonemap(const AffineToneMap& map, std::vector<RawSequence>& sequences);

/// Full single-sequence unprocessing: linear unprocessing followed by the affine
/// tone map matching the sequence's 1%/99% percentiles to `target`.
RawSequence unprocess_sequence(const Srgb8Sequence& video, const CameraProfile& profile, std::uint64_t seed,
                               const PercentilePair& target, const UnprocessOptions& options = {});

/// Unprocesses a set of sequences and tone maps them jointly so that the 1%/99%
/// percentiles pooled over all sequences match `target`. Sequences are processed
/// on `jobs` worker threads; the result does not depend on `jobs`.
std::vector<RawSequence> unprocess_dataset(const std::vector<Srgb8Sequence>& videos, const CameraProfile& profile,
                                           std::uint64_t seed, const PercentilePair& target,
                                           const UnprocessOptions& options = {}, int jobs = 1,
                                           AffineToneMap* map_out = nullptr);

}  // namespace rawvid
