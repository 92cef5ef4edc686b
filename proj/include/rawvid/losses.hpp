#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "rawvid/demosaic.hpp"
#include "rawvid/flow.hpp"
#include "rawvid/image.hpp"
#include "rawvid/random.hpp"
#include "rawvid/warp.hpp"

namespace rawvid {

inline constexpr std::size_t kStackSize = 5;
using StackOffsets = std::array<int, kStackSize>;

inline constexpr StackOffsets kMf2fOffsets{-4, -2, 0, 2, 4};
inline constexpr StackOffsets kContiguousOffsets{-2, -1, 0, 1, 2};

/// Index reflected into [0, n) without repeating the end frames: -1 -> 1, n -> n-2.
std::size_t mirror_frame_index(long long index, std::size_t length);

struct FrameStack {
    std::vector<RawFrame> frames;          // kStackSize frames, in offset order
    std::size_t center = 0;                // t
    StackOffsets offsets{};
    std::array<std::size_t, kStackSize> indices{};  // sequence indices after mirroring
    std::size_t target_index = 0;          // mirrored t-1 (MF2F stacks only)

    const RawFrame& center_frame() const { return frames[kStackSize / 2]; }
};

/// Frames t + offset, mirrored at the sequence ends. Offsets must be symmetric around 0.
FrameStack build_stack(const RawSequence& sequence, std::size_t t, const StackOffsets& offsets);

/// MF2F input stack; also resolves the target t-1 and checks it is not part of the stack.
FrameStack build_mf2f_stack(const RawSequence& sequence, std::size_t t, const StackOffsets& offsets = kMf2fOffsets);

/// Black-box denoiser: stack -> prediction of the centre frame.
struct Denoiser {
    std::string name;
    std::function<Plane(const FrameStack&)> fn;
    bool thread_safe = true;

    /// Runs fn and checks the prediction has the centre frame's dimensions.
    RawFrame operator()(const FrameStack& stack) const;
};

Denoiser identity_denoiser();
Denoiser temporal_mean_denoiser();
/// Gaussian blur of the centre frame applied per CFA plane.
Denoiser gaussian_blur_denoiser(double sigma = 1.0);

struct Mf2fOptions {
    TvL1Params flow;
    OcclusionParams occlusion;
    DemosaicMethod demosaic = DemosaicMethod::hamilton_adams;
    Interpolation interpolation = Interpolation::bicubic;
    StackOffsets offsets = kMf2fOffsets;
};

/// Alignment of frame t onto frame t-1, estimated on the noisy frames.
struct Mf2fAlignment {
    FlowField flow;      // (t-1) pixel -> position in frame t
    OcclusionMask mask;  // kappa: consistency mask and in-bounds warp
};

struct Mf2fResult {
    double loss = 0.0;
    double mask_coverage = 0.0;  // trusted fraction of pixels
    Plane residual;              // warped prediction - f_{t-1}
    OcclusionMask mask;
    std::size_t target_index = 0;
};

/// Computes the alignment between f_t and f_{t-1} from the flow inputs of both frames.
Mf2fAlignment estimate_alignment(const RawFrame& frame_t, const RawFrame& frame_prev, const Mf2fOptions& options);

/// Masked mean absolute deviation between warp_raw(prediction) and the target frame.
/// Throws when no pixel is trusted.
Mf2fResult mf2f_loss_from_prediction(const RawFrame& prediction, const RawFrame& target, const Mf2fAlignment& alignment,
                                     const Mf2fOptions& options = {});

/// MF2F evaluator with a per (sequence, t, t-1) alignment cache. Safe to share across threads.
class Mf2fEvaluator {
public:
    explicit Mf2fEvaluator(Mf2fOptions options = {}) : options_(std::move(options)) {}

    Mf2fResult evaluate(const Denoiser& denoiser, const RawSequence& sequence, std::size_t t);
    std::shared_ptr<const Mf2fAlignment> alignment(const RawSequence& sequence, std::size_t t, std::size_t target);

    const Mf2fOptions& options() const { return options_; }
    std::size_t cached_alignments() const;

private:
    Mf2fOptions options_;
    mutable std::mutex mutex_;
    std::map<std::tuple<std::string, std::size_t, std::size_t>, std::shared_ptr<const Mf2fAlignment>> cache_;
};

Mf2fResult mf2f_loss(const Denoiser& denoiser, const RawSequence& sequence, std::size_t t,
                     const Mf2fOptions& options = {});

/// Mean squared deviation between the prediction from the contiguous stack [t-2, t+2] and f_t.
double blindspot_loss(const Denoiser& denoiser, const RawSequence& sequence, std::size_t t);

/// Reference blind-spot network with fixed random weights. Each of the four input
/// rotations is shifted down by one pixel and passed through `depth` bias-free 3x3
/// convolutions whose bottom kernel row is zero (leaky ReLU between layers); the
/// branches are rotated back and merged by a 1x1 combination. Without the shift
/// (remove_blindspot) the centre pixel re-enters the receptive field.
struct BlindSpotNetConfig {
    int depth = 2;
    int channels = 4;
    bool remove_blindspot = false;
    double leak = 0.1;
};

Denoiser reference_blindspot_net(const BlindSpotNetConfig& config, RngStream& rng);

struct RfProbeReport {
    int x = 0;
    int y = 0;
    std::vector<std::pair<int, int>> influential;  // absolute input coordinates
    bool has_blind_spot = false;                    // centre not influential
    double center_delta = 0.0;                      // |output change| when the probed pixel itself is perturbed
    double threshold = 0.0;
};

inline constexpr double kProbeThreshold = 1e-9;
inline constexpr double kProbeMinEpsilon = 1e-7;

/// Perturbs each pixel of the (2r+1)^2 window of frame `slot` of `base` by eps and
/// records which ones change the output at (x, y) by more than `threshold`.
RfProbeReport probe_receptive_field(const Denoiser& denoiser, const FrameStack& base, int x, int y, int radius,
                                    double eps = 1e-3, std::size_t slot = kStackSize / 2,
                                    double threshold = kProbeThreshold);

/// Deterministic pseudo-random stack of size width x height, for probing.
FrameStack random_probe_stack(int width, int height, std::uint64_t seed);

}  // namespace rawvid
