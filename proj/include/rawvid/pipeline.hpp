#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "rawvid/calibration.hpp"
#include "rawvid/image.hpp"
#include "rawvid/noise.hpp"
#include "rawvid/tonemap.hpp"
#include "rawvid/unprocess.hpp"

namespace rawvid {

namespace fs = std::filesystem;

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr const char* kManifestFile = "manifest.json";

/// Parameters of one run, flattened to strings in the order they were resolved.
using ConfigMap = std::map<std::string, std::string>;

struct RunManifest {
    std::string tool_version = kToolVersion;
    std::string command;
    std::uint64_t seed = 0;
    ConfigMap config;
    std::map<std::string, std::string> inputs;   // name -> digest
    std::map<std::string, std::string> outputs;  // name -> digest
    std::map<std::string, std::string> results;  // derived values, e.g. fitted parameters
    std::vector<std::pair<std::string, double>> timings;  // stage -> seconds
};

void write_manifest(const fs::path& path, const RunManifest& manifest);
RunManifest read_manifest(const fs::path& path);

/// Output written to a hidden sibling first and moved into place by commit().
/// Anything left uncommitted is removed on destruction.
class StagedOutput {
public:
    explicit StagedOutput(fs::path target, bool directory);
    ~StagedOutput();
    StagedOutput(const StagedOutput&) = delete;
    StagedOutput& operator=(const StagedOutput&) = delete;

    const fs::path& path() const { return staging_; }
    const fs::path& target() const { return target_; }
    void commit();

private:
    fs::path target_;
    fs::path staging_;
    bool committed_ = false;
};

/// sRGB input: each subdirectory holding .ppm files is one sequence (named after it,
/// frames in file-name order); .ppm files directly in `root` form a sequence "seq".
std::vector<Srgb8Sequence> load_srgb_dataset(const fs::path& root, double frame_rate);

/// Pooled 1%/99% percentiles of the normalized values of a raw dataset.
PercentilePair dataset_percentiles(const std::vector<RawSequence>& dataset);

struct MakeSyntheticOptions {
    UnprocessOptions unprocess;
    SynthesisOptions synthesis;
    NlfOptions nlf;
    FitWeighting weighting = FitWeighting::none;
    int jobs = 1;
};

struct MakeSyntheticResult {
    std::vector<RawSequence> clean;  // on the code grid of the output levels
    std::vector<RawSequence> noisy;
    AffineToneMap tonemap;
    NoiseModel model;
    std::optional<CameraNlf> calibration;
};

/// Noise model given directly, or a real dataset to calibrate a heteroscedastic model from.
using NoiseSource = std::variant<NoiseModel, std::vector<RawSequence>>;

/// unprocess_dataset -> quantize to codes -> (estimate_camera_nlf) -> synthesize_noisy_dataset.
/// Equivalent to running the unprocess, fit and add-noise steps one after the other.
MakeSyntheticResult make_synthetic(const std::vector<Srgb8Sequence>& videos, const CameraProfile& profile,
                                   const PercentilePair& target, const NoiseSource& noise, std::uint64_t seed,
                                   const MakeSyntheticOptions& options = {});

/// Snaps every frame to the code grid of its levels.
std::vector<RawSequence> quantize_dataset(std::vector<RawSequence> sequences);

struct FrameScore {
    std::string sequence;
    std::size_t frame = 0;
    double psnr = 0.0;
    double ssim = 0.0;
};

struct SequenceScore {
    std::string sequence;
    double psnr = 0.0;
    double ssim = 0.0;
};

struct EvalReport {
    std::vector<FrameScore> frames;
    std::vector<SequenceScore> sequences;  // sorted by sequence id
    double psnr = 0.0;
    double ssim = 0.0;
};

/// Sequences are matched by id. Scores are averaged over frames, then over
/// sequences. PSNR of identical frames is +infinity and stays so through the means.
EvalReport evaluate(const std::vector<RawSequence>& denoised, const std::vector<RawSequence>& reference, int jobs = 1);

/// "inf" for +infinity, fixed 6-decimal otherwise.
std::string format_score(double value);
void write_eval_csv(const fs::path& path, const EvalReport& report);

/// Keeps frames whose index is a multiple of `stride`; frame rate is divided by `stride`.
RawSequence temporal_subsample(const RawSequence& sequence, int stride);

struct AveragedGroundTruth {
    RawFrame frame;
    RawSequence video;  // `frame` repeated for the length of the input
};

/// Pixelwise temporal mean of a static sequence of at least two frames.
AveragedGroundTruth frame_average_gt(const RawSequence& sequence);

}  // namespace rawvid
