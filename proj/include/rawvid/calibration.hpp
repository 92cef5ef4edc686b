#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "rawvid/image.hpp"
#include "rawvid/noise.hpp"
#include "rawvid/random.hpp"

namespace rawvid {

struct NlfPoint {
    double intensity = 0.0;
    double variance = 0.0;
    double weight = 1.0;
};

struct NlfPointCloud {
    std::vector<NlfPoint> points;
};

/// sigma^2(u) = a u + b, plus the RMS residual of the fit that produced it.
struct AffineNlf {
    double a = 0.0;
    double b = 0.0;
    double fit_residual = 0.0;

    double variance(double u) const { return a * u + b; }
    HeteroGaussianParams as_params() const { return {a, b}; }
};

enum class FitWeighting {
    none,        // ordinary least squares
    population,  // weight = point weight (e.g. number of blocks behind an NLF point)
    // population / sigma^4(u), iterated on the fitted curve; suits flat-field clouds where
    // each point is a sample variance whose spread scales with the variance
    inverse_variance,
};

/// Least squares line through (intensity, variance). Needs two distinct intensities.
AffineNlf fit_affine_nlf(const NlfPointCloud& cloud, FitWeighting weighting = FitWeighting::none);

/// Adds noise to a clean patch.
using FrameNoiser = std::function<Plane(const Plane& clean, RngStream& rng)>;

FrameNoiser noiser_for(const NoiseModel& model);

inline constexpr int kFlatfieldMinPatch = 128;

struct FlatfieldOptions {
    std::vector<double> levels;  // empty: 64 levels spanning [0.01, 0.99]
    int patch_size = 256;
    int jobs = 1;
};

std::vector<double> default_flatfield_levels(int count = 64, double lo = 0.01, double hi = 0.99);

/// Noises a constant patch per level and records (level, sample variance).
/// Level i draws from derive_stream(seed, "flatfield", "level", i).
NlfPointCloud flatfield_calibrate(const FrameNoiser& noiser, const FlatfieldOptions& options, std::uint64_t seed);

// Block-DCT noise level estimator constants.
inline constexpr int kNlfBlock = 8;
inline constexpr int kNlfHighFreqCutoff = 12;  // DCT coefficients with i + j >= cutoff
inline constexpr int kNlfLowFreqMax = 3;       // texture statistic: 1 <= i + j <= 3
inline constexpr int kNlfBins = 16;
inline constexpr double kNlfPercentile = 0.005;
inline constexpr int kNlfMinBlocks = 5;
inline constexpr int kNlfMinFrame = 64;

struct NlfOptions {
    int bins = kNlfBins;
    double percentile = kNlfPercentile;
    int min_blocks = kNlfMinBlocks;
    int stride = 1;
};

/// Noise level points of one mosaicked frame. Each CFA plane is cut into
/// overlapping 8x8 blocks; blocks are split into equal-count intensity bins; within a
/// bin the `percentile` fraction (at least min_blocks) with the least low-frequency DCT
/// energy is kept and their mean high-frequency DCT energy is the variance estimate,
/// reported at the median mean intensity of the kept blocks. Weight = kept block count.
NlfPointCloud estimate_nlf_frame(const RawFrame& frame, const NlfOptions& options = {});

struct CameraNlf {
    AffineNlf fit;
    NlfPointCloud cloud;
};

/// Pools per-frame clouds over every frame of every sequence and fits the affine NLF.
CameraNlf estimate_camera_nlf(const std::vector<RawSequence>& dataset, const NlfOptions& options = {},
                              FitWeighting weighting = FitWeighting::none, int jobs = 1);

/// CSV `intensity,variance,weight` with a header line.
void write_cloud_csv(const std::filesystem::path& path, const NlfPointCloud& cloud);
NlfPointCloud read_cloud_csv(const std::filesystem::path& path);

/// CSV `intensity,variance,fitted` for plotting the cloud against the fitted line.
void write_fit_plot_csv(const std::filesystem::path& path, const NlfPointCloud& cloud, const AffineNlf& fit);

}  // namespace rawvid
