#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rawvid/image.hpp"

namespace rawvid {

namespace fs = std::filesystem;

/// Decoded netpbm image: code values, maxval and channel count (1 for P5, 3 for P6).
struct PnmImage {
    int width = 0;
    int height = 0;
    int maxval = 0;
    int channels = 1;
    std::vector<std::uint16_t> samples;  // interleaved, row-major
};

PnmImage read_pnm(const fs::path& path);
/// Writes binary P5/P6; samples above 255 require maxval 65535 (big-endian 16-bit).
void write_pnm(const fs::path& path, const PnmImage& image);

/// Raw frame stored as 16-bit codes. Reading does not clamp so noise below black
/// or above white survives; writing rounds to the nearest code and clamps to [0, 65535].
RawFrame read_raw_pgm(const fs::path& path, CfaPattern cfa, int black_level, int white_level);
void write_raw_pgm(const fs::path& path, const RawFrame& frame);

/// Rounds values onto the 16-bit code grid of the given levels, i.e. what a
/// write_raw_pgm/read_raw_pgm round trip produces.
Plane quantize_to_codes(const Plane& values, int black_level, int white_level);

/// 16-bit (or 8-bit) PPM to RGB in [0,1] (code / maxval).
RgbFrame read_rgb_ppm(const fs::path& path);
void write_rgb_ppm(const fs::path& path, const RgbFrame& frame, bool clamp_unit = true);

/// 8-bit code grid of an sRGB PPM, one grid per channel.
std::array<Grid<int>, 3> read_srgb8_ppm(const fs::path& path);

struct DatasetDescriptor {
    fs::path root;
    CfaPattern cfa = CfaPattern::RGGB;
    int black_level = 0;
    int white_level = 65535;
    int width = 0;
    int height = 0;
    double frame_rate = 0.0;
    std::vector<std::string> frames;  // relative to root
};

inline constexpr const char* kDatasetFile = "dataset.json";

DatasetDescriptor read_dataset_descriptor(const fs::path& root);
void write_dataset_descriptor(const DatasetDescriptor& descriptor);

/// Sequence id of a frame entry: its parent directory, or "seq" for top-level frames.
std::string sequence_id_of(const std::string& frame_entry);

/// Loads every frame, grouping them into sequences by parent directory in first-seen order.
/// Throws if a listed frame is missing or has the wrong dimensions.
std::vector<RawSequence> load_dataset(const fs::path& root, DatasetDescriptor* descriptor_out = nullptr);

/// Writes sequences as <root>/<sequence id>/<index>.pgm plus dataset.json.
DatasetDescriptor write_dataset(const fs::path& root, const std::vector<RawSequence>& sequences);

}  // namespace rawvid
