#include "rawvid/tonemap.hpp"

#include <algorithm>
#include <cmath>

namespace rawvid {

std::vector<double> percentiles(std::span<const double> sample, std::span<const double> ps) {
    if (sample.empty()) throw Error("percentile: empty sample");
    std::vector<double> work(sample.begin(), sample.end());
    std::vector<double> out;
    out.reserve(ps.size());
    const std::size_t n = work.size();
    for (double p : ps) {
        if (!(p >= 0.0 && p <= 1.0)) throw Error("percentile: fraction outside [0,1]");
        const double pos = p * static_cast<double>(n - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, n - 1);
        const double frac = pos - static_cast<double>(lo);
        std::nth_element(work.begin(), work.begin() + static_cast<std::ptrdiff_t>(lo), work.end());
        const double v_lo = work[lo];
        double v_hi = v_lo;
        if (hi != lo) {
            // after nth_element everything right of lo is >= v_lo; the next order statistic is their minimum
            v_hi = *std::min_element(work.begin() + static_cast<std::ptrdiff_t>(hi), work.end());
        }
        out.push_back(frac == 0.0 ? v_lo : v_lo + frac * (v_hi - v_lo));
    }
    return out;
}

double percentile(std::span<const double> sample, double p) {
    const double ps[] = {p};
    return percentiles(sample, ps).front();
}

PercentilePair percentile_pair(std::span<const double> sample, double p_low, double p_high) {
    const double ps[] = {p_low, p_high};
    const auto v = percentiles(sample, ps);
    return {v[0], v[1]};
}

AffineToneMap percentile_tonemap_fit(const PercentilePair& source, const PercentilePair& target) {
    if (!(source.high != source.low) || !std::isfinite(source.low) || !std::isfinite(source.high)) {
        throw Error("percentile_tonemap_fit: degenerate source (low and high percentiles coincide)");
    }
    AffineToneMap map;
    map.scale = (target.high - target.low) / (source.high - source.low);
    map.offset = target.low - map.scale * source.low;
    return map;
}

AffineToneMap percentile_tonemap_fit(std::span<const double> source, std::span<const double> target,
                                     double p_low, double p_high) {
    return percentile_tonemap_fit(percentile_pair(source, p_low, p_high), percentile_pair(target, p_low, p_high));
}

void percentile_tonemap_apply(const AffineToneMap& map, std::span<double> values) {
    for (double& v : values) v = map(v);
}

void percentile_tonemap_apply(const AffineToneMap& map, Plane& plane) {
    percentile_tonemap_apply(map, plane.values());
}

}  // namespace rawvid
