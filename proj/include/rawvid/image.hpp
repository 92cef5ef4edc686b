#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rawvid {

/// Thrown on any contract violation (bad dimensions, invalid parameters, malformed files).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dense row-major 2-D grid.
template <typename T>
class Grid {
public:
    Grid() = default;
    Grid(int width, int height, T fill = T{})
        : width_(width), height_(height), data_(checked_size(width, height), fill) {}
    Grid(int width, int height, std::vector<T> values)
        : width_(width), height_(height), data_(std::move(values)) {
        if (data_.size() != checked_size(width, height)) {
            throw Error("grid: value count does not match dimensions");
        }
    }

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T& operator()(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
    const T& operator()(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }

    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }
    std::span<T> row(int y) { return values().subspan(static_cast<std::size_t>(y) * width_, width_); }
    std::span<const T> row(int y) const { return values().subspan(static_cast<std::size_t>(y) * width_, width_); }

    bool same_shape(const Grid& other) const { return width_ == other.width_ && height_ == other.height_; }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    static std::size_t checked_size(int width, int height) {
        if (width < 0 || height < 0) throw Error("grid: negative dimensions");
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

using Plane = Grid<double>;

enum class Channel : int { Red = 0, Green = 1, Blue = 2 };

/// 2x2 colour tile anchored at pixel (0,0), named row-major.
enum class CfaPattern { RGGB, BGGR, GRBG, GBRG };

CfaPattern parse_cfa(std::string_view name);
std::string_view to_string(CfaPattern cfa);

/// Colour measured at pixel (x, y).
Channel cfa_channel(CfaPattern cfa, int x, int y);

struct RawFrame {
    Plane data;
    CfaPattern cfa = CfaPattern::RGGB;
    int black_level = 0;
    int white_level = 65535;

    int width() const { return data.width(); }
    int height() const { return data.height(); }
};

struct RgbFrame {
    std::array<Plane, 3> channels;

    RgbFrame() = default;
    RgbFrame(int width, int height, double fill = 0.0)
        : channels{Plane(width, height, fill), Plane(width, height, fill), Plane(width, height, fill)} {}

    int width() const { return channels[0].width(); }
    int height() const { return channels[0].height(); }
    Plane& operator[](Channel c) { return channels[static_cast<int>(c)]; }
    const Plane& operator[](Channel c) const { return channels[static_cast<int>(c)]; }
};

template <typename Frame>
struct VideoSequence {
    std::string id;
    double frame_rate = 0.0;
    std::vector<Frame> frames;
};

using RawSequence = VideoSequence<RawFrame>;
using RgbSequence = VideoSequence<RgbFrame>;

/// Maps sensor codes to [0,1]: clamp((code - black) / (white - black), 0, 1).
/// With clamp == false the affine map is applied without clamping, which keeps
/// noise excursions below black or above white intact.
Plane normalize(const Grid<double>& codes, int black_level, int white_level, bool clamp = true);
Grid<double> denormalize(const Plane& values, int black_level, int white_level);

/// Mosaics an RGB frame: each pixel keeps the channel selected by the CFA.
RawFrame mosaic(const RgbFrame& rgb, CfaPattern cfa);

/// Four half-resolution planes in tile order (0,0), (1,0), (0,1), (1,1),
/// i.e. (even row, even col), (even row, odd col), (odd row, even col), (odd row, odd col).
std::array<Plane, 4> pack_planes(const Plane& raw);
Plane unpack_planes(const std::array<Plane, 4>& planes);

void require_even(int width, int height, std::string_view what);
void require_same_shape(const Plane& a, const Plane& b, std::string_view what);

/// Throws unless all frames of the sequence share dimensions, CFA and levels.
void validate_sequence(const RawSequence& sequence);

}  // namespace rawvid
