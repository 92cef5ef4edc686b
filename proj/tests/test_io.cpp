#include <gtest/gtest.h>

#include <fstream>
#include <iterator>

#include "rawvid/flow_field.hpp"
#include "rawvid/io.hpp"
#include "test_support.hpp"

using namespace rawvid;
using testing_support::random_plane;
using testing_support::TempDir;

namespace {

std::vector<unsigned char> file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST(Pnm, SixteenBitIsBigEndian) {
    TempDir dir("pnm");
    PnmImage img;
    img.width = 2;
    img.height = 1;
    img.maxval = 65535;
    img.samples = {0x1234, 0xABCD};
    write_pnm(dir.path() / "a.pgm", img);
    const auto bytes = file_bytes(dir.path() / "a.pgm");
    const std::string header = "P5\n2 1\n65535\n";
    ASSERT_EQ(bytes.size(), header.size() + 4);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + header.size()), header);
    EXPECT_EQ(bytes[header.size()], 0x12);
    EXPECT_EQ(bytes[header.size() + 1], 0x34);
    EXPECT_EQ(bytes[header.size() + 2], 0xAB);
    const PnmImage back = read_pnm(dir.path() / "a.pgm");
    EXPECT_EQ(back.samples, img.samples);
}

TEST(Pnm, HeaderCommentsAndErrors) {
    TempDir dir("pnm2");
    {
        std::ofstream out(dir.path() / "c.pgm", std::ios::binary);
        out << "P5\n# a comment\n3 1 # trailing\n255\n";
        out.write("\x01\x02\x03", 3);
    }
    const PnmImage img = read_pnm(dir.path() / "c.pgm");
    EXPECT_EQ(img.width, 3);
    EXPECT_EQ(img.samples, (std::vector<std::uint16_t>{1, 2, 3}));
    {
        std::ofstream out(dir.path() / "t.pgm", std::ios::binary);
        out << "P5\n3 1\n255\n";
        out.write("\x01", 1);
    }
    EXPECT_THROW(read_pnm(dir.path() / "t.pgm"), Error);
    {
        std::ofstream out(dir.path() / "m.pgm", std::ios::binary);
        out << "P2\n1 1\n255\n1\n";
    }
    EXPECT_THROW(read_pnm(dir.path() / "m.pgm"), Error);
    EXPECT_THROW(read_pnm(dir.path() / "missing.pgm"), Error);
}

TEST(RawPgm, RoundTripOnCodeGrid) {
    TempDir dir("raw");
    RawFrame f;
    f.black_level = 64;
    f.white_level = 1087;
    f.cfa = CfaPattern::GBRG;
    f.data = quantize_to_codes(random_plane(16, 12, 1, -0.02, 1.02), 64, 1087);
    write_raw_pgm(dir.path() / "f.pgm", f);
    const RawFrame back = read_raw_pgm(dir.path() / "f.pgm", CfaPattern::GBRG, 64, 1087);
    EXPECT_EQ(back.data, f.data);
    // values below black survive reading
    bool below = false;
    for (double v : back.data.values()) below = below || v < 0.0;
    EXPECT_TRUE(below);
}

TEST(RawPgm, WriteClampsToSixteenBits) {
    TempDir dir("raw2");
    RawFrame f;
    f.black_level = 0;
    f.white_level = 65535;
    f.data = Plane(2, 2, std::vector<double>{-0.5, 0.0, 1.0, 1.5});
    write_raw_pgm(dir.path() / "f.pgm", f);
    const PnmImage img = read_pnm(dir.path() / "f.pgm");
    EXPECT_EQ(img.samples, (std::vector<std::uint16_t>{0, 0, 65535, 65535}));
}

TEST(RgbPpm, RoundTripAndSrgb8) {
    TempDir dir("ppm");
    RgbFrame rgb(6, 4);
    for (int c = 0; c < 3; ++c) rgb.channels[c] = random_plane(6, 4, 30 + c);
    write_rgb_ppm(dir.path() / "x.ppm", rgb);
    const RgbFrame back = read_rgb_ppm(dir.path() / "x.ppm");
    for (int c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < 24; ++i) EXPECT_NEAR(back.channels[c].values()[i], rgb.channels[c].values()[i], 1e-5);
    }
    EXPECT_THROW(read_srgb8_ppm(dir.path() / "x.ppm"), Error);  // 16-bit is not an 8-bit sRGB frame

    PnmImage img;
    img.width = 2;
    img.height = 1;
    img.maxval = 255;
    img.channels = 3;
    img.samples = {1, 2, 3, 250, 251, 252};
    write_pnm(dir.path() / "s.ppm", img);
    const auto codes = read_srgb8_ppm(dir.path() / "s.ppm");
    EXPECT_EQ(codes[0](0, 0), 1);
    EXPECT_EQ(codes[2](1, 0), 252);
}

TEST(Dataset, SequenceIdOfEntry) {
    EXPECT_EQ(sequence_id_of("walk/000001.pgm"), "walk");
    EXPECT_EQ(sequence_id_of("a/b/c.pgm"), "a/b");
    EXPECT_EQ(sequence_id_of("frame.pgm"), "seq");
}

TEST(Dataset, WriteLoadRoundTrip) {
    TempDir dir("ds");
    std::vector<RawSequence> seqs(2);
    for (int s = 0; s < 2; ++s) {
        seqs[s].id = s == 0 ? "walk" : "bike";
        seqs[s].frame_rate = 40;
        for (int f = 0; f < 3; ++f) {
            RawFrame fr;
            fr.black_level = 256;
            fr.white_level = 4095;
            fr.cfa = CfaPattern::BGGR;
            fr.data = quantize_to_codes(random_plane(10, 8, 100 * s + f), 256, 4095);
            seqs[s].frames.push_back(fr);
        }
    }
    write_dataset(dir.path(), seqs);
    DatasetDescriptor d;
    const auto back = load_dataset(dir.path(), &d);
    EXPECT_EQ(d.cfa, CfaPattern::BGGR);
    EXPECT_EQ(d.width, 10);
    EXPECT_EQ(d.frames.size(), 6u);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].id, "walk");
    EXPECT_EQ(back[1].id, "bike");
    EXPECT_DOUBLE_EQ(back[1].frame_rate, 40.0);
    for (int s = 0; s < 2; ++s) {
        for (int f = 0; f < 3; ++f) EXPECT_EQ(back[s].frames[f].data, seqs[s].frames[f].data);
    }
    fs::remove(dir.path() / "bike" / "000001.pgm");
    EXPECT_THROW(load_dataset(dir.path()), Error);
}

TEST(Dataset, RejectsWrongDimensionsAndBadDescriptor) {
    TempDir dir("ds2");
    RawSequence s;
    s.id = "x";
    RawFrame fr;
    fr.data = random_plane(8, 8, 1);
    s.frames = {fr};
    write_dataset(dir.path(), {s});
    RawFrame other;
    other.data = random_plane(6, 8, 2);
    write_raw_pgm(dir.path() / "x" / "000000.pgm", other);
    EXPECT_THROW(load_dataset(dir.path()), Error);
    {
        std::ofstream(dir.path() / kDatasetFile) << "{\"cfa\": \"RGGB\"}";
    }
    EXPECT_THROW(load_dataset(dir.path()), Error);
}

TEST(Flo, RoundTripAndMagic) {
    TempDir dir("flo");
    FlowField f(7, 5);
    f.u = random_plane(7, 5, 1, -3, 3);
    f.v = random_plane(7, 5, 2, -3, 3);
    write_flo(dir.path() / "f.flo", f);
    const auto bytes = file_bytes(dir.path() / "f.flo");
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "PIEH");
    EXPECT_EQ(bytes[4], 7);
    EXPECT_EQ(bytes.size(), 12u + 7 * 5 * 8);
    const FlowField back = read_flo(dir.path() / "f.flo");
    for (std::size_t i = 0; i < f.u.size(); ++i) {
        EXPECT_EQ(back.u.values()[i], static_cast<float>(f.u.values()[i]));
        EXPECT_EQ(back.v.values()[i], static_cast<float>(f.v.values()[i]));
    }
}

TEST(Mask, RoundTrip) {
    TempDir dir("mask");
    OcclusionMask m(5, 3);
    for (std::size_t i = 0; i < m.size(); ++i) m.values()[i] = i % 3 == 0;
    write_mask_pgm(dir.path() / "m.pgm", m);
    EXPECT_EQ(read_mask_pgm(dir.path() / "m.pgm"), m);
}
