#pragma once

#include <functional>
#include <vector>

#include "rawvid/flow_field.hpp"
#include "rawvid/image.hpp"

namespace rawvid {

/// Duality-based TV-L1 parameters. Defaults follow the usual IPOL settings.
struct TvL1Params {
    double lambda = 0.15;   // data term weight
    double theta = 0.3;     // coupling between u and v
    double tau = 0.25;      // dual step, <= 0.25
    int scales = 0;         // 0: as many as the frame size allows
    double zoom = 0.5;      // pyramid factor in (0,1)
    int warps = 5;          // re-linearizations per scale
    double epsilon = 0.01;  // stop when mean squared update < epsilon^2
    int max_iterations = 300;

    void validate() const;
};

/// Energy of the relaxed functional at fixed linearization, reported after each inner iteration.
struct TvL1EnergySample {
    int scale;
    int warp;
    int iteration;
    double energy;
};

using TvL1EnergyObserver = std::function<void(const TvL1EnergySample&)>;

/// Number of pyramid levels actually used for a frame of this size.
int tvl1_scale_count(int width, int height, const TvL1Params& params);

/// Flow u such that target(x) ~ reference(x + u(x)). Inputs are single-channel and are
/// jointly rescaled to [0,255] before pre-smoothing (sigma 0.8).
FlowField tvl1_flow(const Plane& target, const Plane& reference, const TvL1Params& params = {},
                    const TvL1EnergyObserver& observer = {});

/// Single-channel flow input for a raw frame: luminance of its Hamilton-Adams demosaic.
Plane flow_input(const RawFrame& raw);

struct OcclusionParams {
    double alpha = 0.01;
    double beta = 0.5;
    double div_threshold = 0.5;
};

/// Trusted iff |f(x) + b(x + f(x))|^2 < alpha (|f(x)|^2 + |b(x + f(x))|^2) + beta and
/// div f(x) > -div_threshold. `backward` is sampled bilinearly.
OcclusionMask occlusion_mask(const FlowField& forward, const FlowField& backward, const OcclusionParams& params = {});

/// Central-difference divergence of a flow field.
Plane divergence(const FlowField& flow);

}  // namespace rawvid
