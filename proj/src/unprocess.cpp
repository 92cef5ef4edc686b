#include "rawvid/unprocess.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "rawvid/parallel.hpp"

namespace rawvid {

double determinant(const Matrix3& m) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

Matrix3 invert(const Matrix3& m) {
    const double det = determinant(m);
    if (!(std::abs(det) > 1e-8)) throw Error("colour matrix is singular");
    Matrix3 inv;
    inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
    inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
    inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
    inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
    inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
    inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
    inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
    inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
    inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
    return inv;
}

void CameraProfile::validate() const {
    if (!(std::abs(determinant(ccm)) > 1e-8)) throw Error("camera profile: ccm is not invertible");
    for (const auto& row : ccm) {
        if (std::abs(row[0] + row[1] + row[2] - 1.0) > 1e-6) {
            throw Error("camera profile: ccm rows must sum to 1");
        }
    }
}

CameraProfile default_camera_profile() {
    // Typical camera->sRGB matrix shape: strong diagonal, negative cross terms, unit row sums.
    CameraProfile p;
    p.ccm = {{{1.60, -0.45, -0.15}, {-0.25, 1.45, -0.20}, {0.00, -0.50, 1.50}}};
    p.cfa = CfaPattern::RGGB;
    return p;
}

CameraProfile read_camera_profile(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open camera profile " + path.string());
    try {
        nlohmann::json j;
        in >> j;
        CameraProfile p;
        const auto rows = j.at("ccm").get<std::vector<std::vector<double>>>();
        if (rows.size() != 3) throw Error("camera profile: ccm must be 3x3");
        for (int r = 0; r < 3; ++r) {
            if (rows[r].size() != 3) throw Error("camera profile: ccm must be 3x3");
            for (int c = 0; c < 3; ++c) p.ccm[r][c] = rows[r][c];
        }
        p.cfa = parse_cfa(j.at("cfa").get<std::string>());
        p.validate();
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

void write_camera_profile(const std::filesystem::path& path, const CameraProfile& profile) {
    nlohmann::json j;
    j["ccm"] = profile.ccm;
    j["cfa"] = std::string(to_string(profile.cfa));
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

double GainSample::channel_factor(Channel c) const {
    switch (c) {
        case Channel::Red: return global / red;
        case Channel::Green: return global / green;
        case Channel::Blue: return global / blue;
    }
    return global;
}

GainSample sample_gains(RngStream& rng) {
    GainSample g;
    g.red = rng.uniform(kRedGainMin, kRedGainMax);
    g.blue = rng.uniform(kBlueGainMin, kBlueGainMax);
    // Truncated at one so no channel is ever amplified; the lower tail (8 sigma from 0) is redrawn.
    do {
        g.global = std::min(rng.normal(kGlobalGainMean, kGlobalGainStd), 1.0);
    } while (g.global <= 0.0);
    return g;
}

Plane dequantize(const Grid<int>& srgb8, RngStream& rng) {
    Plane out(srgb8.width(), srgb8.height());
    auto src = srgb8.values();
    auto dst = out.values();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = (src[i] + (rng.uniform() - 0.5)) / 255.0;
    }
    return out;
}

double srgb_to_linear(double v) {
    v = std::clamp(v, 0.0, 1.0);
    return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double v) {
    v = std::clamp(v, 0.0, 1.0);
    return v <= 0.0031308 ? v * 12.92 : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

void srgb_to_linear(Plane& plane) {
    for (double& v : plane.values()) v = srgb_to_linear(v);
}

void linear_to_srgb(Plane& plane) {
    for (double& v : plane.values()) v = linear_to_srgb(v);
}

RgbFrame apply_ccm(const RgbFrame& rgb, const Matrix3& m) {
    RgbFrame out(rgb.width(), rgb.height());
    const std::size_t n = rgb.channels[0].size();
    auto r = rgb.channels[0].values();
    auto g = rgb.channels[1].values();
    auto b = rgb.channels[2].values();
    for (int c = 0; c < 3; ++c) {
        auto dst = out.channels[c].values();
        for (std::size_t i = 0; i < n; ++i) dst[i] = m[c][0] * r[i] + m[c][1] * g[i] + m[c][2] * b[i];
    }
    return out;
}

RgbFrame apply_inverse_ccm(const RgbFrame& rgb, const CameraProfile& profile) {
    return apply_ccm(rgb, invert(profile.ccm));
}

RgbFrame apply_inverse_whitebalance(const RgbFrame& rgb, const GainSample& gains) {
    RgbFrame out = rgb;
    for (int c = 0; c < 3; ++c) {
        const double factor = gains.channel_factor(static_cast<Channel>(c));
        for (double& v : out.channels[c].values()) v *= factor;
    }
    return out;
}

RawSequence unprocess_sequence_linear(const Srgb8Sequence& video, const CameraProfile& profile, std::uint64_t seed,
                                      const UnprocessOptions& options, GainSample* gains_out) {
    profile.validate();
    const Matrix3 inverse_ccm = invert(profile.ccm);
    RngStream gain_rng = derive_stream(seed, video.id, "gains");
    const GainSample gains = sample_gains(gain_rng);
    if (gains_out) *gains_out = gains;

    RawSequence out{video.id, video.frame_rate, {}};
    out.frames.reserve(video.frames.size());
    for (std::size_t f = 0; f < video.frames.size(); ++f) {
        const Srgb8Frame& codes = video.frames[f];
        RngStream dither = derive_stream(seed, video.id, "dither", f);
        RgbFrame rgb(codes[0].width(), codes[0].height());
        for (int c = 0; c < 3; ++c) {
            if (!codes[c].same_shape(codes[0])) throw Error("unprocess: channel size mismatch");
            if (options.dequantize) {
                rgb.channels[c] = dequantize(codes[c], dither);
            } else {
                auto src = codes[c].values();
                auto dst = rgb.channels[c].values();
                for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] / 255.0;
            }
            srgb_to_linear(rgb.channels[c]);
        }
        rgb = apply_ccm(rgb, inverse_ccm);
        rgb = apply_inverse_whitebalance(rgb, gains);
        if (options.clip_unit) {
            for (auto& ch : rgb.channels) {
                for (double& v : ch.values()) v = std::clamp(v, 0.0, 1.0);
            }
        }
        RawFrame raw = mosaic(rgb, profile.cfa);
        raw.black_level = options.black_level;
        raw.white_level = options.white_level;
        out.frames.push_back(std::move(raw));
    }
    validate_sequence(out);
    return out;
}

std::vector<double> pooled_values(const std::vector<RawSequence>& sequences) {
    std::size_t total = 0;
    for (const auto& s : sequences) {
        for (const auto& f : s.frames) total += f.data.size();
    }
    std::vector<double> pool;
    pool.reserve(total);
    for (const auto& s : sequences) {
        for (const auto& f : s.frames) pool.insert(pool.end(), f.data.values().begin(), f.data.values().end());
    }
    return pool;
}

void apply_tonemap(const AffineToneMap& map, std::vector<RawSequence>& sequences) {
    for (auto& s : sequences) {
        for (auto& f : s.frames) percentile_tonemap_apply(map, f.data);
    }
}

RawSequence unprocess_sequence(const Srgb8Sequence& video, const CameraProfile& profile, std::uint64_t seed,
                               const PercentilePair& target, const UnprocessOptions& options) {
    std::vector<RawSequence> one{unprocess_sequence_linear(video, profile, seed, options)};
    const auto pool = pooled_values(one);
    apply_tonemap(percentile_tonemap_fit(percentile_pair(pool), target), one);
    return std::move(one.front());
}

std::vector<RawSequence> unprocess_dataset(const std::vector<Srgb8Sequence>& videos, const CameraProfile& profile,
                                           std::uint64_t seed, const PercentilePair& target,
                                           const UnprocessOptions& options, int jobs, AffineToneMap* map_out) {
    std::vector<RawSequence> out(videos.size());
    parallel_for(videos.size(), jobs,
                 [&](std::size_t i) { out[i] = unprocess_sequence_linear(videos[i], profile, seed, options); });
    const auto pool = pooled_values(out);
    const AffineToneMap map = percentile_tonemap_fit(percentile_pair(pool), target);
    apply_tonemap(map, out);
    if (map_out) *map_out = map;
    return out;
}

}  // namespace rawvid
