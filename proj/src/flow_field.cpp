#include "rawvid/flow_field.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "rawvid/io.hpp"

namespace rawvid {

bool FlowField::all_finite() const {
    for (double x : u.values()) {
        if (!std::isfinite(x)) return false;
    }
    for (double x : v.values()) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

namespace {

void put_le32(std::ofstream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_le32(std::ifstream& in, const std::filesystem::path& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4) throw Error(path.string() + ": truncated .flo file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_flo(const std::filesystem::path& path, const FlowField& flow) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out.write("PIEH", 4);
    put_le32(out, static_cast<std::uint32_t>(flow.width()));
    put_le32(out, static_cast<std::uint32_t>(flow.height()));
    for (int y = 0; y < flow.height(); ++y) {
        for (int x = 0; x < flow.width(); ++x) {
            put_le32(out, std::bit_cast<std::uint32_t>(static_cast<float>(flow.u(x, y))));
            put_le32(out, std::bit_cast<std::uint32_t>(static_cast<float>(flow.v(x, y))));
        }
    }
    if (!out) throw Error("write failed: " + path.string());
}

FlowField read_flo(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, "PIEH", 4) != 0) throw Error(path.string() + ": bad .flo magic");
    const auto w = static_cast<std::int32_t>(get_le32(in, path));
    const auto h = static_cast<std::int32_t>(get_le32(in, path));
    if (w <= 0 || h <= 0 || w > (1 << 16) || h > (1 << 16)) throw Error(path.string() + ": bad .flo dimensions");
    FlowField flow(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            flow.u(x, y) = std::bit_cast<float>(get_le32(in, path));
            flow.v(x, y) = std::bit_cast<float>(get_le32(in, path));
        }
    }
    return flow;
}

void write_mask_pgm(const std::filesystem::path& path, const OcclusionMask& mask) {
    PnmImage img;
    img.width = mask.width();
    img.height = mask.height();
    img.maxval = 255;
    img.channels = 1;
    img.samples.reserve(mask.size());
    for (std::uint8_t m : mask.values()) img.samples.push_back(m ? 255 : 0);
    write_pnm(path, img);
}

OcclusionMask read_mask_pgm(const std::filesystem::path& path) {
    const PnmImage img = read_pnm(path);
    if (img.channels != 1) throw Error(path.string() + ": mask must be a PGM");
    OcclusionMask mask(img.width, img.height);
    auto dst = mask.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = img.samples[i] > img.maxval / 2 ? 1 : 0;
    return mask;
}

}  // namespace rawvid
