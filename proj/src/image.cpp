#include "rawvid/image.hpp"

#include <algorithm>

namespace rawvid {

CfaPattern parse_cfa(std::string_view name) {
    if (name == "RGGB" || name == "rggb") return CfaPattern::RGGB;
    if (name == "BGGR" || name == "bggr") return CfaPattern::BGGR;
    if (name == "GRBG" || name == "grbg") return CfaPattern::GRBG;
    if (name == "GBRG" || name == "gbrg") return CfaPattern::GBRG;
    throw Error("unknown CFA pattern '" + std::string(name) + "'");
}

std::string_view to_string(CfaPattern cfa) {
    switch (cfa) {
        case CfaPattern::RGGB: return "RGGB";
        case CfaPattern::BGGR: return "BGGR";
        case CfaPattern::GRBG: return "GRBG";
        case CfaPattern::GBRG: return "GBRG";
    }
    return "RGGB";
}

Channel cfa_channel(CfaPattern cfa, int x, int y) {
    static constexpr Channel R = Channel::Red, G = Channel::Green, B = Channel::Blue;
    // tile[row][col]
    static constexpr Channel tiles[4][2][2] = {
        {{R, G}, {G, B}},  // RGGB
        {{B, G}, {G, R}},  // BGGR
        {{G, R}, {B, G}},  // GRBG
        {{G, B}, {R, G}},  // GBRG
    };
    return tiles[static_cast<int>(cfa)][y & 1][x & 1];
}

void require_even(int width, int height, std::string_view what) {
    if (width <= 0 || height <= 0 || width % 2 != 0 || height % 2 != 0) {
        throw Error(std::string(what) + ": dimensions must be positive and even, got " +
                    std::to_string(width) + "x" + std::to_string(height));
    }
}

void require_same_shape(const Plane& a, const Plane& b, std::string_view what) {
    if (!a.same_shape(b)) {
        throw Error(std::string(what) + ": dimension mismatch (" + std::to_string(a.width()) + "x" +
                    std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                    std::to_string(b.height()) + ")");
    }
}

static void require_levels(int black_level, int white_level) {
    if (white_level <= black_level) {
        throw Error("white_level must exceed black_level");
    }
}

Plane normalize(const Grid<double>& codes, int black_level, int white_level, bool clamp) {
    require_levels(black_level, white_level);
    const double black = black_level;
    const double range = static_cast<double>(white_level) - black;
    Plane out(codes.width(), codes.height());
    auto src = codes.values();
    auto dst = out.values();
    for (std::size_t i = 0; i < src.size(); ++i) {
        const double v = (src[i] - black) / range;
        dst[i] = clamp ? std::clamp(v, 0.0, 1.0) : v;
    }
    return out;
}

Grid<double> denormalize(const Plane& values, int black_level, int white_level) {
    require_levels(black_level, white_level);
    const double black = black_level;
    const double range = static_cast<double>(white_level) - black;
    Grid<double> out(values.width(), values.height());
    auto src = values.values();
    auto dst = out.values();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = black + src[i] * range;
    return out;
}

RawFrame mosaic(const RgbFrame& rgb, CfaPattern cfa) {
    require_even(rgb.width(), rgb.height(), "mosaic");
    RawFrame raw;
    raw.cfa = cfa;
    raw.data = Plane(rgb.width(), rgb.height());
    for (int y = 0; y < rgb.height(); ++y) {
        for (int x = 0; x < rgb.width(); ++x) {
            raw.data(x, y) = rgb[cfa_channel(cfa, x, y)](x, y);
        }
    }
    return raw;
}

std::array<Plane, 4> pack_planes(const Plane& raw) {
    require_even(raw.width(), raw.height(), "pack_planes");
    const int w = raw.width() / 2;
    const int h = raw.height() / 2;
    std::array<Plane, 4> planes{Plane(w, h), Plane(w, h), Plane(w, h), Plane(w, h)};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            planes[0](x, y) = raw(2 * x, 2 * y);
            planes[1](x, y) = raw(2 * x + 1, 2 * y);
            planes[2](x, y) = raw(2 * x, 2 * y + 1);
            planes[3](x, y) = raw(2 * x + 1, 2 * y + 1);
        }
    }
    return planes;
}

Plane unpack_planes(const std::array<Plane, 4>& planes) {
    const int w = planes[0].width();
    const int h = planes[0].height();
    for (const auto& p : planes) {
        if (p.width() != w || p.height() != h) throw Error("unpack_planes: planes differ in size");
    }
    if (w <= 0 || h <= 0) throw Error("unpack_planes: empty planes");
    Plane raw(2 * w, 2 * h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            raw(2 * x, 2 * y) = planes[0](x, y);
            raw(2 * x + 1, 2 * y) = planes[1](x, y);
            raw(2 * x, 2 * y + 1) = planes[2](x, y);
            raw(2 * x + 1, 2 * y + 1) = planes[3](x, y);
        }
    }
    return raw;
}

void validate_sequence(const RawSequence& sequence) {
    if (sequence.frames.empty()) return;
    const RawFrame& first = sequence.frames.front();
    for (const RawFrame& f : sequence.frames) {
        if (!f.data.same_shape(first.data) || f.cfa != first.cfa || f.black_level != first.black_level ||
            f.white_level != first.white_level) {
            throw Error("sequence '" + sequence.id + "': frames differ in dimensions, CFA or levels");
        }
    }
}

}  // namespace rawvid
