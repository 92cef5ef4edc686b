#pragma once

#include <span>
#include <vector>

#include "rawvid/image.hpp"

namespace rawvid {

/// Linearly interpolated order statistic at fraction p in [0,1]
/// (position p*(n-1) in the sorted sample). Does not modify the input.
double percentile(std::span<const double> sample, double p);

/// Several percentiles of the same sample with one copy of the data.
std::vector<double> percentiles(std::span<const double> sample, std::span<const double> ps);

struct PercentilePair {
    double low = 0.0;
    double high = 0.0;
};

PercentilePair percentile_pair(std::span<const double> sample, double p_low = 0.01, double p_high = 0.99);

/// value -> scale * value + offset
struct AffineToneMap {
    double scale = 1.0;
    double offset = 0.0;

    double operator()(double v) const { return scale * v + offset; }
};

/// Affine map sending the source low/high percentiles onto the target ones.
AffineToneMap percentile_tonemap_fit(const PercentilePair& source, const PercentilePair& target);
AffineToneMap percentile_tonemap_fit(std::span<const double> source, std::span<const double> target,
                                     double p_low = 0.01, double p_high = 0.99);

void percentile_tonemap_apply(const AffineToneMap& map, Plane& plane);
void percentile_tonemap_apply(const AffineToneMap& map, std::span<double> values);

}  // namespace rawvid
