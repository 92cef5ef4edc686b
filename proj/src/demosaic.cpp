#include "rawvid/demosaic.hpp"

#include <cmath>

namespace rawvid {

DemosaicMethod parse_demosaic_method(std::string_view name) {
    if (name == "ha" || name == "hamilton_adams" || name == "hamilton-adams") return DemosaicMethod::hamilton_adams;
    if (name == "bilinear") return DemosaicMethod::bilinear;
    throw Error("unknown demosaic method '" + std::string(name) + "'");
}

namespace {

// Reflected read access to a plane.
struct Mirror {
    const Plane& p;
    double operator()(int x, int y) const { return p(reflect_index(x, p.width()), reflect_index(y, p.height())); }
};

// Horizontal neighbours of a green site carry this colour; vertical ones carry the other.
Channel horizontal_neighbour(CfaPattern cfa, int x, int y) { return cfa_channel(cfa, x + 1, y); }

// Fills R and B from a complete green plane by bilinear interpolation of colour differences.
void fill_chroma(const RawFrame& raw, RgbFrame& rgb) {
    const int w = raw.width();
    const int h = raw.height();
    const Plane& green = rgb[Channel::Green];
    Plane diff(w, h);  // raw - G at red and blue sites, 0 at green sites
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (cfa_channel(raw.cfa, x, y) != Channel::Green) diff(x, y) = raw.data(x, y) - green(x, y);
        }
    }
    const Mirror d{diff};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Channel site = cfa_channel(raw.cfa, x, y);
            const double g = green(x, y);
            if (site == Channel::Green) {
                const Channel hc = horizontal_neighbour(raw.cfa, x, y);
                const Channel vc = hc == Channel::Red ? Channel::Blue : Channel::Red;
                rgb[hc](x, y) = g + 0.5 * (d(x - 1, y) + d(x + 1, y));
                rgb[vc](x, y) = g + 0.5 * (d(x, y - 1) + d(x, y + 1));
            } else {
                const Channel other = site == Channel::Red ? Channel::Blue : Channel::Red;
                rgb[site](x, y) = raw.data(x, y);
                rgb[other](x, y) =
                    g + 0.25 * (d(x - 1, y - 1) + d(x + 1, y - 1) + d(x - 1, y + 1) + d(x + 1, y + 1));
            }
        }
    }
}

void check_input(const RawFrame& raw, int min_size, const char* what) {
    require_even(raw.width(), raw.height(), what);
    if (raw.width() < min_size || raw.height() < min_size) {
        throw Error(std::string(what) + ": frame must be at least " + std::to_string(min_size) + "x" +
                    std::to_string(min_size));
    }
}

}  // namespace

RgbFrame demosaic_ha(const RawFrame& raw) {
    check_input(raw, 6, "demosaic_ha");
    const int w = raw.width();
    const int h = raw.height();
    const Mirror m{raw.data};
    RgbFrame rgb(w, h);
    Plane& green = rgb[Channel::Green];
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double c = raw.data(x, y);
            if (cfa_channel(raw.cfa, x, y) == Channel::Green) {
                green(x, y) = c;
                continue;
            }
            const double lap_h = 2.0 * c - m(x - 2, y) - m(x + 2, y);
            const double lap_v = 2.0 * c - m(x, y - 2) - m(x, y + 2);
            const double gw = m(x - 1, y), ge = m(x + 1, y);
            const double gn = m(x, y - 1), gs = m(x, y + 1);
            const double grad_h = std::abs(gw - ge) + std::abs(lap_h);
            const double grad_v = std::abs(gn - gs) + std::abs(lap_v);
            const double est_h = 0.5 * (gw + ge) + 0.25 * lap_h;
            const double est_v = 0.5 * (gn + gs) + 0.25 * lap_v;
            if (grad_h < grad_v) {
                green(x, y) = est_h;
            } else if (grad_v < grad_h) {
                green(x, y) = est_v;
            } else {
                green(x, y) = 0.5 * (est_h + est_v);
            }
        }
    }
    fill_chroma(raw, rgb);
    return rgb;
}

RgbFrame demosaic_bilinear(const RawFrame& raw) {
    check_input(raw, 2, "demosaic_bilinear");
    const int w = raw.width();
    const int h = raw.height();
    const Mirror m{raw.data};
    RgbFrame rgb(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Channel site = cfa_channel(raw.cfa, x, y);
            const double c = raw.data(x, y);
            const double cross = 0.25 * (m(x - 1, y) + m(x + 1, y) + m(x, y - 1) + m(x, y + 1));
            const double diag = 0.25 * (m(x - 1, y - 1) + m(x + 1, y - 1) + m(x - 1, y + 1) + m(x + 1, y + 1));
            if (site == Channel::Green) {
                const Channel hc = horizontal_neighbour(raw.cfa, x, y);
                const Channel vc = hc == Channel::Red ? Channel::Blue : Channel::Red;
                rgb[Channel::Green](x, y) = c;
                rgb[hc](x, y) = 0.5 * (m(x - 1, y) + m(x + 1, y));
                rgb[vc](x, y) = 0.5 * (m(x, y - 1) + m(x, y + 1));
            } else {
                const Channel other = site == Channel::Red ? Channel::Blue : Channel::Red;
                rgb[site](x, y) = c;
                rgb[Channel::Green](x, y) = cross;
                rgb[other](x, y) = diag;
            }
        }
    }
    return rgb;
}

RgbFrame demosaic(const RawFrame& raw, DemosaicMethod method) {
    return method == DemosaicMethod::hamilton_adams ? demosaic_ha(raw) : demosaic_bilinear(raw);
}

Plane luminance(const RgbFrame& rgb) {
    Plane out(rgb.width(), rgb.height());
    auto r = rgb.channels[0].values();
    auto g = rgb.channels[1].values();
    auto b = rgb.channels[2].values();
    auto dst = out.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
    return out;
}

}  // namespace rawvid
