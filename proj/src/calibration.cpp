#include "rawvid/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "rawvid/parallel.hpp"

namespace rawvid {

namespace {

AffineNlf weighted_line(const NlfPointCloud& cloud, const std::vector<double>& weights) {
    double sw = 0.0, sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        sw += weights[i];
        sx += weights[i] * cloud.points[i].intensity;
        sy += weights[i] * cloud.points[i].variance;
    }
    if (!(sw > 0.0)) throw Error("fit_affine_nlf: weights sum to zero");
    const double mx = sx / sw;
    const double my = sy / sw;
    // centred sums for numerical stability
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        const double dx = cloud.points[i].intensity - mx;
        sxx += weights[i] * dx * dx;
        sxy += weights[i] * dx * (cloud.points[i].variance - my);
    }
    const double spread = std::max(std::abs(mx), 1.0);
    if (!(sxx > 1e-24 * spread * spread * sw)) {
        throw Error("fit_affine_nlf: degenerate cloud (all intensities identical)");
    }
    AffineNlf fit;
    fit.a = sxy / sxx;
    fit.b = my - fit.a * mx;
    return fit;
}

}  // namespace

AffineNlf fit_affine_nlf(const NlfPointCloud& cloud, FitWeighting weighting) {
    if (cloud.points.size() < 2) throw Error("fit_affine_nlf: need at least two points");
    std::vector<double> weights(cloud.points.size(), 1.0);
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        const NlfPoint& p = cloud.points[i];
        if (p.variance < 0.0) throw Error("fit_affine_nlf: negative variance in cloud");
        if (weighting != FitWeighting::none) {
            if (!(p.weight >= 0.0)) throw Error("fit_affine_nlf: negative weight");
            weights[i] = p.weight;
        }
    }
    AffineNlf fit = weighted_line(cloud, weights);
    if (weighting == FitWeighting::inverse_variance) {
        // a sample variance has standard deviation proportional to the variance itself,
        // so reweight by the square of the fitted curve until the line settles
        for (int pass = 0; pass < 4; ++pass) {
            double top = 0.0;
            for (const NlfPoint& p : cloud.points) top = std::max(top, fit.variance(p.intensity));
            if (!(top > 0.0)) break;
            std::vector<double> w(cloud.points.size());
            for (std::size_t i = 0; i < w.size(); ++i) {
                const double v = std::max(fit.variance(cloud.points[i].intensity), 1e-6 * top);
                w[i] = weights[i] / (v * v);
            }
            fit = weighted_line(cloud, w);
        }
    }
    double ss = 0.0;
    for (const NlfPoint& p : cloud.points) {
        const double r = p.variance - fit.variance(p.intensity);
        ss += r * r;
    }
    fit.fit_residual = std::sqrt(ss / static_cast<double>(cloud.points.size()));
    return fit;
}

FrameNoiser noiser_for(const NoiseModel& model) {
    validate(model);
    return [model](const Plane& clean, RngStream& rng) { return apply_noise(clean, model, rng); };
}

std::vector<double> default_flatfield_levels(int count, double lo, double hi) {
    if (count < 2) throw Error("flatfield: need at least two levels");
    std::vector<double> levels(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) levels[i] = lo + (hi - lo) * i / (count - 1);
    return levels;
}

NlfPointCloud flatfield_calibrate(const FrameNoiser& noiser, const FlatfieldOptions& options, std::uint64_t seed) {
    const std::vector<double> levels = options.levels.empty() ? default_flatfield_levels() : options.levels;
    if (levels.size() < 2) throw Error("flatfield: need at least two levels");
    if (options.patch_size < kFlatfieldMinPatch) {
        throw Error("flatfield: patch size below " + std::to_string(kFlatfieldMinPatch) +
                    " gives variance estimates worse than 1%");
    }
    NlfPointCloud cloud;
    cloud.points.resize(levels.size());
    parallel_for(levels.size(), options.jobs, [&](std::size_t i) {
        const Plane patch(options.patch_size, options.patch_size, levels[i]);
        RngStream rng = derive_stream(seed, "flatfield", "level", i);
        const Plane noisy = noiser(patch, rng);
        if (!noisy.same_shape(patch)) throw Error("flatfield: sampler changed the patch size");
        double mean = 0.0;
        for (double v : noisy.values()) mean += v;
        mean /= static_cast<double>(noisy.size());
        double ss = 0.0;
        for (double v : noisy.values()) ss += (v - mean) * (v - mean);
        const double n = static_cast<double>(noisy.size());
        cloud.points[i] = NlfPoint{levels[i], ss / (n - 1.0), n};
    });
    return cloud;
}

namespace {

struct DctBasis {
    double c[kNlfBlock][kNlfBlock];  // c[k][n]
    DctBasis() {
        for (int k = 0; k < kNlfBlock; ++k) {
            const double alpha = k == 0 ? std::sqrt(1.0 / kNlfBlock) : std::sqrt(2.0 / kNlfBlock);
            for (int n = 0; n < kNlfBlock; ++n) {
                c[k][n] = alpha * std::cos(std::numbers::pi * (2 * n + 1) * k / (2.0 * kNlfBlock));
            }
        }
    }
};

struct BlockStat {
    double mean;
    double low;   // texture energy
    double high;  // noise energy
};

// Coefficient (kx, ky) membership.
struct CoefSets {
    std::vector<std::pair<int, int>> low, high;
    CoefSets() {
        for (int ky = 0; ky < kNlfBlock; ++ky) {
            for (int kx = 0; kx < kNlfBlock; ++kx) {
                const int s = kx + ky;
                if (s >= 1 && s <= kNlfLowFreqMax) low.emplace_back(kx, ky);
                if (s >= kNlfHighFreqCutoff) high.emplace_back(kx, ky);
            }
        }
    }
};

std::vector<BlockStat> block_stats(const Plane& plane, int stride) {
    static const DctBasis basis;
    static const CoefSets sets;
    const int bw = plane.width() - kNlfBlock + 1;
    const int bh = plane.height() - kNlfBlock + 1;
    std::vector<BlockStat> stats;
    if (bw <= 0 || bh <= 0) return stats;
    stats.reserve(static_cast<std::size_t>((bw + stride - 1) / stride) * ((bh + stride - 1) / stride));

    // Horizontal 8-point DCT of every window start x in a row, kept for the last 8 rows.
    const std::size_t row_len = static_cast<std::size_t>(bw) * kNlfBlock;
    std::vector<double> ring(row_len * kNlfBlock);
    auto horizontal = [&](int y) {
        double* dst = ring.data() + static_cast<std::size_t>(y % kNlfBlock) * row_len;
        auto src = plane.row(y);
        for (int x = 0; x < bw; ++x) {
            for (int k = 0; k < kNlfBlock; ++k) {
                double s = 0.0;
                for (int n = 0; n < kNlfBlock; ++n) s += basis.c[k][n] * src[x + n];
                dst[static_cast<std::size_t>(x) * kNlfBlock + k] = s;
            }
        }
    };
    for (int y = 0; y < kNlfBlock - 1; ++y) horizontal(y);
    for (int by = 0; by < bh; ++by) {
        horizontal(by + kNlfBlock - 1);
        if (by % stride != 0) continue;
        for (int bx = 0; bx < bw; bx += stride) {
            auto coef = [&](int kx, int ky) {
                double s = 0.0;
                for (int n = 0; n < kNlfBlock; ++n) {
                    const double* row = ring.data() + static_cast<std::size_t>((by + n) % kNlfBlock) * row_len;
                    s += basis.c[ky][n] * row[static_cast<std::size_t>(bx) * kNlfBlock + kx];
                }
                return s;
            };
            BlockStat st{};
            st.mean = coef(0, 0) / kNlfBlock;
            for (auto [kx, ky] : sets.low) {
                const double v = coef(kx, ky);
                st.low += v * v;
            }
            st.low /= static_cast<double>(sets.low.size());
            for (auto [kx, ky] : sets.high) {
                const double v = coef(kx, ky);
                st.high += v * v;
            }
            st.high /= static_cast<double>(sets.high.size());
            stats.push_back(st);
        }
    }
    return stats;
}

double median_of(std::vector<double> v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

}  // namespace

NlfPointCloud estimate_nlf_frame(const RawFrame& frame, const NlfOptions& options) {
    if (frame.width() < kNlfMinFrame || frame.height() < kNlfMinFrame) {
        throw Error("estimate_nlf_frame: frame must be at least 64x64");
    }
    if (options.bins < 1 || options.min_blocks < 1 || options.stride < 1 ||
        !(options.percentile > 0.0 && options.percentile <= 1.0)) {
        throw Error("estimate_nlf_frame: invalid options");
    }
    NlfPointCloud cloud;
    for (const Plane& plane : pack_planes(frame.data)) {
        std::vector<BlockStat> stats = block_stats(plane, options.stride);
        std::sort(stats.begin(), stats.end(), [](const BlockStat& l, const BlockStat& r) {
            return l.mean < r.mean || (l.mean == r.mean && l.low < r.low);
        });
        const std::size_t n = stats.size();
        for (int b = 0; b < options.bins; ++b) {
            const std::size_t first = n * b / options.bins;
            const std::size_t last = n * (b + 1) / options.bins;
            const std::size_t count = last - first;
            if (count < static_cast<std::size_t>(options.min_blocks)) continue;
            const auto begin = stats.begin() + static_cast<std::ptrdiff_t>(first);
            const auto end = stats.begin() + static_cast<std::ptrdiff_t>(last);
            const std::size_t keep = std::min(
                count, std::max<std::size_t>(options.min_blocks,
                                             static_cast<std::size_t>(std::ceil(options.percentile * count))));
            std::nth_element(begin, begin + static_cast<std::ptrdiff_t>(keep - 1), end,
                             [](const BlockStat& l, const BlockStat& r) { return l.low < r.low; });
            double energy = 0.0;
            std::vector<double> means;
            means.reserve(keep);
            for (auto it = begin; it != begin + static_cast<std::ptrdiff_t>(keep); ++it) {
                energy += it->high;
                means.push_back(it->mean);
            }
            cloud.points.push_back(
                NlfPoint{median_of(std::move(means)), energy / static_cast<double>(keep), static_cast<double>(keep)});
        }
    }
    if (cloud.points.empty()) throw Error("estimate_nlf_frame: frame too small to populate any intensity bin");
    return cloud;
}

CameraNlf estimate_camera_nlf(const std::vector<RawSequence>& dataset, const NlfOptions& options,
                              FitWeighting weighting, int jobs) {
    std::vector<const RawFrame*> frames;
    for (const auto& seq : dataset) {
        for (const auto& f : seq.frames) frames.push_back(&f);
    }
    if (frames.empty()) throw Error("estimate_camera_nlf: empty dataset");
    std::vector<NlfPointCloud> clouds(frames.size());
    parallel_for(frames.size(), jobs, [&](std::size_t i) { clouds[i] = estimate_nlf_frame(*frames[i], options); });
    CameraNlf result;
    for (const auto& c : clouds) result.cloud.points.insert(result.cloud.points.end(), c.points.begin(), c.points.end());
    result.fit = fit_affine_nlf(result.cloud, weighting);
    return result;
}

void write_cloud_csv(const std::filesystem::path& path, const NlfPointCloud& cloud) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out.precision(17);
    out << "intensity,variance,weight\n";
    for (const NlfPoint& p : cloud.points) out << p.intensity << ',' << p.variance << ',' << p.weight << '\n';
}

NlfPointCloud read_cloud_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    NlfPointCloud cloud;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        if (line_no == 1 && line.find("intensity") != std::string::npos) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<double> values;
        while (std::getline(ss, field, ',')) {
            try {
                values.push_back(std::stod(field));
            } catch (const std::exception&) {
                throw Error(path.string() + ":" + std::to_string(line_no) + ": not a number");
            }
        }
        if (values.size() < 2 || values.size() > 3) {
            throw Error(path.string() + ":" + std::to_string(line_no) + ": expected intensity,variance[,weight]");
        }
        if (values[1] < 0.0) throw Error(path.string() + ":" + std::to_string(line_no) + ": negative variance");
        cloud.points.push_back(NlfPoint{values[0], values[1], values.size() == 3 ? values[2] : 1.0});
    }
    return cloud;
}

void write_fit_plot_csv(const std::filesystem::path& path, const NlfPointCloud& cloud, const AffineNlf& fit) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out.precision(17);
    out << "intensity,variance,fitted\n";
    for (const NlfPoint& p : cloud.points) {
        out << p.intensity << ',' << p.variance << ',' << fit.variance(p.intensity) << '\n';
    }
}

}  // namespace rawvid
