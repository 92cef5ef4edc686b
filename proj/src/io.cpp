#include "rawvid/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace rawvid {

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in) {
    std::string token;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
            continue;
        }
        if (std::isspace(c)) {
            if (!token.empty()) break;
            continue;
        }
        token.push_back(static_cast<char>(c));
    }
    return token;
}

int parse_header_int(std::istream& in, const fs::path& path, const char* what) {
    const std::string t = next_token(in);
    try {
        std::size_t used = 0;
        const int v = std::stoi(t, &used);
        if (used != t.size()) throw std::invalid_argument(t);
        return v;
    } catch (const std::exception&) {
        throw Error(path.string() + ": bad " + what + " in netpbm header");
    }
}

}  // namespace

PnmImage read_pnm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    const std::string magic = next_token(in);
    PnmImage img;
    if (magic == "P5") {
        img.channels = 1;
    } else if (magic == "P6") {
        img.channels = 3;
    } else {
        throw Error(path.string() + ": not a binary PGM/PPM file");
    }
    img.width = parse_header_int(in, path, "width");
    img.height = parse_header_int(in, path, "height");
    img.maxval = parse_header_int(in, path, "maxval");
    if (img.width <= 0 || img.height <= 0 || img.maxval <= 0 || img.maxval > 65535) {
        throw Error(path.string() + ": invalid netpbm header values");
    }
    // next_token consumed exactly one whitespace byte after maxval
    const std::size_t count = static_cast<std::size_t>(img.width) * img.height * img.channels;
    const std::size_t bytes_per = img.maxval > 255 ? 2 : 1;
    std::vector<unsigned char> buffer(count * bytes_per);
    in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(buffer.size()));
    if (static_cast<std::size_t>(in.gcount()) != buffer.size()) {
        throw Error(path.string() + ": truncated pixel data");
    }
    img.samples.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        img.samples[i] = bytes_per == 2 ? static_cast<std::uint16_t>((buffer[2 * i] << 8) | buffer[2 * i + 1])
                                        : buffer[i];
    }
    return img;
}

void write_pnm(const fs::path& path, const PnmImage& image) {
    if (image.channels != 1 && image.channels != 3) throw Error("write_pnm: channels must be 1 or 3");
    const std::size_t count = static_cast<std::size_t>(image.width) * image.height * image.channels;
    if (image.samples.size() != count) throw Error("write_pnm: sample count mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << (image.channels == 1 ? "P5" : "P6") << '\n'
        << image.width << ' ' << image.height << '\n'
        << image.maxval << '\n';
    const bool wide = image.maxval > 255;
    std::vector<unsigned char> buffer;
    buffer.reserve(count * (wide ? 2 : 1));
    for (std::uint16_t s : image.samples) {
        if (s > image.maxval) throw Error("write_pnm: sample exceeds maxval");
        if (wide) buffer.push_back(static_cast<unsigned char>(s >> 8));
        buffer.push_back(static_cast<unsigned char>(s & 0xff));
    }
    out.write(reinterpret_cast<const char*>(buffer.data()), static_cast<std::streamsize>(buffer.size()));
    if (!out) throw Error("write failed: " + path.string());
}

namespace {

std::uint16_t to_code(double code) {
    return static_cast<std::uint16_t>(std::clamp(std::nearbyint(code), 0.0, 65535.0));
}

}  // namespace

RawFrame read_raw_pgm(const fs::path& path, CfaPattern cfa, int black_level, int white_level) {
    const PnmImage img = read_pnm(path);
    if (img.channels != 1) throw Error(path.string() + ": expected a single-channel PGM");
    Grid<double> codes(img.width, img.height);
    auto dst = codes.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = img.samples[i];
    RawFrame frame;
    frame.data = normalize(codes, black_level, white_level, /*clamp=*/false);
    frame.cfa = cfa;
    frame.black_level = black_level;
    frame.white_level = white_level;
    return frame;
}

void write_raw_pgm(const fs::path& path, const RawFrame& frame) {
    const Grid<double> codes = denormalize(frame.data, frame.black_level, frame.white_level);
    PnmImage img;
    img.width = frame.width();
    img.height = frame.height();
    img.maxval = 65535;
    img.channels = 1;
    img.samples.reserve(codes.size());
    for (double c : codes.values()) img.samples.push_back(to_code(c));
    write_pnm(path, img);
}

Plane quantize_to_codes(const Plane& values, int black_level, int white_level) {
    Grid<double> codes = denormalize(values, black_level, white_level);
    for (double& c : codes.values()) c = to_code(c);
    return normalize(codes, black_level, white_level, /*clamp=*/false);
}

RgbFrame read_rgb_ppm(const fs::path& path) {
    const PnmImage img = read_pnm(path);
    if (img.channels != 3) throw Error(path.string() + ": expected a PPM (P6) file");
    RgbFrame rgb(img.width, img.height);
    const double scale = 1.0 / img.maxval;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const std::size_t base = 3 * (static_cast<std::size_t>(y) * img.width + x);
            for (int c = 0; c < 3; ++c) rgb.channels[c](x, y) = img.samples[base + c] * scale;
        }
    }
    return rgb;
}

void write_rgb_ppm(const fs::path& path, const RgbFrame& frame, bool clamp_unit) {
    PnmImage img;
    img.width = frame.width();
    img.height = frame.height();
    img.maxval = 65535;
    img.channels = 3;
    img.samples.resize(static_cast<std::size_t>(img.width) * img.height * 3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const std::size_t base = 3 * (static_cast<std::size_t>(y) * img.width + x);
            for (int c = 0; c < 3; ++c) {
                double v = frame.channels[c](x, y);
                if (clamp_unit) v = std::clamp(v, 0.0, 1.0);
                img.samples[base + c] = to_code(v * 65535.0);
            }
        }
    }
    write_pnm(path, img);
}

std::array<Grid<int>, 3> read_srgb8_ppm(const fs::path& path) {
    const PnmImage img = read_pnm(path);
    if (img.channels != 3) throw Error(path.string() + ": expected a PPM (P6) file");
    if (img.maxval != 255) throw Error(path.string() + ": sRGB input must be 8-bit (maxval 255)");
    std::array<Grid<int>, 3> out{Grid<int>(img.width, img.height), Grid<int>(img.width, img.height),
                                 Grid<int>(img.width, img.height)};
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const std::size_t base = 3 * (static_cast<std::size_t>(y) * img.width + x);
            for (int c = 0; c < 3; ++c) out[c](x, y) = img.samples[base + c];
        }
    }
    return out;
}

DatasetDescriptor read_dataset_descriptor(const fs::path& root) {
    const fs::path file = root / kDatasetFile;
    std::ifstream in(file);
    if (!in) throw Error("cannot open " + file.string());
    nlohmann::json j;
    try {
        in >> j;
        DatasetDescriptor d;
        d.root = root;
        d.cfa = parse_cfa(j.at("cfa").get<std::string>());
        d.black_level = j.at("black_level").get<int>();
        d.white_level = j.at("white_level").get<int>();
        d.width = j.at("width").get<int>();
        d.height = j.at("height").get<int>();
        d.frame_rate = j.at("frame_rate").get<double>();
        d.frames = j.at("frames").get<std::vector<std::string>>();
        if (d.white_level <= d.black_level) throw Error(file.string() + ": white_level must exceed black_level");
        return d;
    } catch (const nlohmann::json::exception& e) {
        throw Error(file.string() + ": " + e.what());
    }
}

void write_dataset_descriptor(const DatasetDescriptor& d) {
    nlohmann::json j;
    j["cfa"] = std::string(to_string(d.cfa));
    j["black_level"] = d.black_level;
    j["white_level"] = d.white_level;
    j["width"] = d.width;
    j["height"] = d.height;
    j["frame_rate"] = d.frame_rate;
    j["frames"] = d.frames;
    std::ofstream out(d.root / kDatasetFile);
    if (!out) throw Error("cannot write " + (d.root / kDatasetFile).string());
    out << j.dump(2) << '\n';
}

std::string sequence_id_of(const std::string& frame_entry) {
    const fs::path parent = fs::path(frame_entry).parent_path();
    return parent.empty() ? std::string("seq") : parent.generic_string();
}

std::vector<RawSequence> load_dataset(const fs::path& root, DatasetDescriptor* descriptor_out) {
    const DatasetDescriptor d = read_dataset_descriptor(root);
    std::vector<RawSequence> sequences;
    std::map<std::string, std::size_t> index;
    for (const std::string& entry : d.frames) {
        const fs::path file = root / entry;
        if (!fs::exists(file)) throw Error("dataset frame missing: " + file.string());
        RawFrame frame = read_raw_pgm(file, d.cfa, d.black_level, d.white_level);
        if (frame.width() != d.width || frame.height() != d.height) {
            throw Error("dataset frame " + file.string() + " does not match declared dimensions");
        }
        const std::string id = sequence_id_of(entry);
        auto [it, inserted] = index.try_emplace(id, sequences.size());
        if (inserted) {
            sequences.push_back(RawSequence{id, d.frame_rate, {}});
        }
        sequences[it->second].frames.push_back(std::move(frame));
    }
    if (descriptor_out) *descriptor_out = d;
    return sequences;
}

DatasetDescriptor write_dataset(const fs::path& root, const std::vector<RawSequence>& sequences) {
    if (sequences.empty() || sequences.front().frames.empty()) throw Error("write_dataset: nothing to write");
    const RawFrame& ref = sequences.front().frames.front();
    DatasetDescriptor d;
    d.root = root;
    d.cfa = ref.cfa;
    d.black_level = ref.black_level;
    d.white_level = ref.white_level;
    d.width = ref.width();
    d.height = ref.height();
    d.frame_rate = sequences.front().frame_rate;
    fs::create_directories(root);
    for (const RawSequence& seq : sequences) {
        validate_sequence(seq);
        if (seq.id.empty() || seq.id == "." || seq.id.find("..") != std::string::npos) {
            throw Error("write_dataset: invalid sequence id '" + seq.id + "'");
        }
        fs::create_directories(root / seq.id);
        for (std::size_t i = 0; i < seq.frames.size(); ++i) {
            const RawFrame& f = seq.frames[i];
            if (f.width() != d.width || f.height() != d.height || f.cfa != d.cfa || f.black_level != d.black_level ||
                f.white_level != d.white_level) {
                throw Error("write_dataset: sequences differ in dimensions, CFA or levels");
            }
            char name[32];
            std::snprintf(name, sizeof(name), "%06zu.pgm", i);
            const std::string entry = seq.id + "/" + name;
            write_raw_pgm(root / entry, f);
            d.frames.push_back(entry);
        }
    }
    write_dataset_descriptor(d);
    return d;
}

}  // namespace rawvid
