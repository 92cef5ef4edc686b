#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "rawvid/digest.hpp"
#include "rawvid/io.hpp"
#include "rawvid/metrics.hpp"
#include "rawvid/pipeline.hpp"
#include "test_support.hpp"

using namespace rawvid;
using testing_support::random_plane;
using testing_support::TempDir;

namespace {

Srgb8Sequence srgb_sequence(const std::string& id, int frames, int w, int h, unsigned seed) {
    Srgb8Sequence s;
    s.id = id;
    s.frame_rate = 30;
    std::mt19937 gen(seed);
    std::uniform_int_distribution<int> code(0, 255);
    for (int f = 0; f < frames; ++f) {
        Srgb8Frame fr{Grid<int>(w, h), Grid<int>(w, h), Grid<int>(w, h)};
        for (auto& c : fr) {
            for (int& v : c.values()) v = code(gen);
        }
        s.frames.push_back(fr);
    }
    return s;
}

std::vector<Srgb8Sequence> small_videos() {
    return {srgb_sequence("walk", 3, 32, 24, 1), srgb_sequence("bike", 2, 32, 24, 2)};
}

RawSequence plane_sequence(const std::string& id, const std::vector<Plane>& planes) {
    RawSequence s;
    s.id = id;
    s.frame_rate = 30;
    for (const Plane& p : planes) {
        RawFrame f;
        f.data = p;
        s.frames.push_back(f);
    }
    return s;
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST(Digest, KnownVectorsAndDirectories) {
    const std::string abc = "abc";
    EXPECT_EQ(sha256_hex({reinterpret_cast<const unsigned char*>(abc.data()), abc.size()}),
              "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(sha256_hex({}), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    TempDir dir("digest");
    write_text(dir.path() / "abc.txt", "abc");
    EXPECT_EQ(sha256_file(dir.path() / "abc.txt"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    fs::create_directories(dir.path() / "d" / "sub");
    write_text(dir.path() / "d" / "sub" / "x", "1");
    write_text(dir.path() / "d" / "y", "2");
    const std::string before = digest_path(dir.path() / "d");
    const auto listing = digest_directory(dir.path() / "d");
    ASSERT_EQ(listing.size(), 2u);
    EXPECT_TRUE(listing.contains("sub/x"));
    write_text(dir.path() / "d" / kManifestFile, "{}");
    EXPECT_EQ(digest_path(dir.path() / "d"), before);
    write_text(dir.path() / "d" / "y", "3");
    EXPECT_NE(digest_path(dir.path() / "d"), before);
    EXPECT_THROW(sha256_file(dir.path() / "missing"), Error);
}

TEST(Manifest, RoundTrip) {
    TempDir dir("manifest");
    RunManifest m;
    m.command = "add-noise";
    m.seed = 18446744073709551615ull;
    m.config = {{"model", "m.json"}, {"jobs", "2"}};
    m.inputs = {{"input", "abc"}};
    m.outputs = {{"output", "def"}};
    m.results = {{"a", "0.01"}};
    m.timings = {{"noise", 0.5}, {"write", 0.25}};
    write_manifest(dir.path() / "m.json", m);
    const RunManifest back = read_manifest(dir.path() / "m.json");
    EXPECT_EQ(back.tool_version, kToolVersion);
    EXPECT_EQ(back.command, m.command);
    EXPECT_EQ(back.seed, m.seed);
    EXPECT_EQ(back.config, m.config);
    EXPECT_EQ(back.inputs, m.inputs);
    EXPECT_EQ(back.outputs, m.outputs);
    EXPECT_EQ(back.results, m.results);
    EXPECT_EQ(back.timings, m.timings);
}

TEST(StagedOutput, CommitReplacesAndAbandonCleansUp) {
    TempDir dir("staged");
    const fs::path target = dir.path() / "out";
    fs::create_directories(target);
    write_text(target / "old", "x");
    {
        StagedOutput stage(target, true);
        EXPECT_NE(stage.path(), target);
        EXPECT_TRUE(fs::is_directory(stage.path()));
        write_text(stage.path() / "new", "y");
        EXPECT_TRUE(fs::exists(target / "old"));
        stage.commit();
    }
    EXPECT_TRUE(fs::exists(target / "new"));
    EXPECT_FALSE(fs::exists(target / "old"));
    fs::path staging;
    {
        StagedOutput stage(target, true);
        staging = stage.path();
        write_text(stage.path() / "partial", "z");
    }
    EXPECT_FALSE(fs::exists(staging));
    EXPECT_TRUE(fs::exists(target / "new"));
    {
        StagedOutput file(dir.path() / "f.csv", false);
        write_text(file.path(), "a,b\n");
        file.commit();
    }
    EXPECT_TRUE(fs::is_regular_file(dir.path() / "f.csv"));
}

TEST(SrgbDataset, LayoutAndErrors) {
    TempDir dir("srgb");
    PnmImage img;
    img.width = 4;
    img.height = 2;
    img.channels = 3;
    img.maxval = 255;
    img.samples.assign(24, 7);
    fs::create_directories(dir.path() / "b");
    fs::create_directories(dir.path() / "a");
    write_pnm(dir.path() / "b" / "1.ppm", img);
    write_pnm(dir.path() / "b" / "0.ppm", img);
    write_pnm(dir.path() / "a" / "0.ppm", img);
    write_pnm(dir.path() / "top.ppm", img);
    const auto videos = load_srgb_dataset(dir.path(), 24);
    ASSERT_EQ(videos.size(), 3u);
    EXPECT_EQ(videos[0].id, "seq");
    EXPECT_EQ(videos[1].id, "a");
    EXPECT_EQ(videos[2].id, "b");
    EXPECT_EQ(videos[2].frames.size(), 2u);
    EXPECT_DOUBLE_EQ(videos[2].frame_rate, 24.0);
    img.width = 2;
    img.samples.assign(12, 7);
    write_pnm(dir.path() / "a" / "1.ppm", img);
    EXPECT_THROW(load_srgb_dataset(dir.path(), 24), Error);
    EXPECT_THROW(load_srgb_dataset(dir.path() / "none", 24), Error);
}

TEST(MakeSynthetic, ZeroNoiseAndDeterminism) {
    const auto videos = small_videos();
    const PercentilePair target{0.05, 0.8};
    const NoiseModel zero = HeteroGaussianParams{0, 0};
    const auto r = make_synthetic(videos, default_camera_profile(), target, zero, 7);
    ASSERT_EQ(r.noisy.size(), 2u);
    for (std::size_t s = 0; s < 2; ++s) {
        for (std::size_t f = 0; f < r.clean[s].frames.size(); ++f) {
            EXPECT_EQ(r.noisy[s].frames[f].data, r.clean[s].frames[f].data);
        }
    }
    const NoiseModel model = HeteroGaussianParams{0.01, 4e-4};
    MakeSyntheticOptions one, four;
    four.jobs = 4;
    four.synthesis.jobs = 4;
    const auto a = make_synthetic(videos, default_camera_profile(), target, model, 7, one);
    const auto b = make_synthetic(videos, default_camera_profile(), target, model, 7, four);
    const auto c = make_synthetic(videos, default_camera_profile(), target, model, 8, one);
    for (std::size_t s = 0; s < 2; ++s) {
        for (std::size_t f = 0; f < a.noisy[s].frames.size(); ++f) {
            EXPECT_EQ(a.noisy[s].frames[f].data, b.noisy[s].frames[f].data);
            EXPECT_EQ(a.clean[s].frames[f].data, b.clean[s].frames[f].data);
            EXPECT_NE(a.noisy[s].frames[f].data, c.noisy[s].frames[f].data);
        }
    }
    EXPECT_FALSE(a.calibration.has_value());
}

TEST(MakeSynthetic, PercentilesAfterQuantization) {
    const PercentilePair target{0.05, 0.8};
    const auto r = make_synthetic(small_videos(), default_camera_profile(), target, HeteroGaussianParams{0, 0}, 3);
    const PercentilePair got = dataset_percentiles(r.clean);
    // the clean frames sit on the code grid, so the match is within half a code
    const double half_code = 0.5 / (61439 - 4096);
    EXPECT_NEAR(got.low, target.low, half_code + 1e-12);
    EXPECT_NEAR(got.high, target.high, half_code + 1e-12);
    for (const auto& s : r.clean) {
        for (const auto& f : s.frames) {
            EXPECT_EQ(f.black_level, 4096);
            EXPECT_EQ(f.white_level, 61439);
            EXPECT_EQ(quantize_to_codes(f.data, 4096, 61439), f.data);
        }
    }
}

TEST(MakeSynthetic, ComposesFromSeparateSteps) {
    const auto videos = small_videos();
    const PercentilePair target{0.05, 0.8};
    const NoiseModel model = PoissonTukeyParams{0.01, -0.1, 0.002, 0.001, 0.0};
    const auto whole = make_synthetic(videos, default_camera_profile(), target, model, 11);
    const auto clean = quantize_dataset(unprocess_dataset(videos, default_camera_profile(), 11, target));
    const auto noisy = synthesize_noisy_dataset(clean, model, 11);
    for (std::size_t s = 0; s < 2; ++s) {
        for (std::size_t f = 0; f < clean[s].frames.size(); ++f) {
            EXPECT_EQ(whole.clean[s].frames[f].data, clean[s].frames[f].data);
            EXPECT_EQ(whole.noisy[s].frames[f].data, noisy[s].frames[f].data);
        }
    }
}

TEST(MakeSynthetic, CalibratesFromReference) {
    RawSequence ref;
    ref.id = "ref";
    for (int i = 0; i < 2; ++i) {
        Plane ramp(256, 256);
        for (int y = 0; y < 256; ++y) {
            for (int x = 0; x < 256; ++x) ramp(x, y) = 0.05 + 0.9 * x / 255.0;
        }
        RngStream rng(40 + i);
        RawFrame f;
        f.data = sample_hetero_gaussian(ramp, {0.01, 4e-4}, rng);
        ref.frames.push_back(f);
    }
    const auto r = make_synthetic(small_videos(), default_camera_profile(), {0.05, 0.8},
                                  std::vector<RawSequence>{ref}, 5);
    ASSERT_TRUE(r.calibration.has_value());
    const auto& p = std::get<HeteroGaussianParams>(r.model);
    EXPECT_EQ(p.a, r.calibration->fit.a);
    EXPECT_EQ(p.b, r.calibration->fit.b);
    EXPECT_NEAR(p.a, 0.01, 0.003);

    // a noiseless reference has no usable noise and the fit goes negative or degenerate
    RawSequence flat{"flat", 30, {RawFrame{Plane(128, 128, 0.5)}}};
    EXPECT_THROW(make_synthetic(small_videos(), default_camera_profile(), {0.05, 0.8},
                                std::vector<RawSequence>{flat}, 5),
                 Error);
}

TEST(Eval, SelfComparisonAndConstantOffset) {
    const RawSequence a = plane_sequence("a", {random_plane(32, 32, 1, 0.2, 0.7), random_plane(32, 32, 2, 0.2, 0.7)});
    const EvalReport self = evaluate({a}, {a});
    EXPECT_TRUE(std::isinf(self.psnr));
    EXPECT_EQ(self.ssim, 1.0);
    EXPECT_EQ(format_score(self.psnr), "inf");
    EXPECT_EQ(format_score(self.ssim), "1.000000");

    RawSequence shifted = a;
    for (auto& f : shifted.frames) {
        for (double& v : f.data.values()) v += 0.1;
    }
    const EvalReport off = evaluate({shifted}, {a});
    for (const auto& fs : off.frames) EXPECT_NEAR(fs.psnr, 20.0, 1e-9);
    EXPECT_EQ(format_score(off.psnr), "20.000000");
}

TEST(Eval, AveragingOrderAndPermutation) {
    const Plane ref = random_plane(32, 32, 3, 0.2, 0.7);
    auto offset = [&](double c) {
        Plane p = ref;
        for (double& v : p.values()) v += c;
        return p;
    };
    // sequence x: frames at 20 dB and 40 dB; sequence y: one frame at 30 dB
    const RawSequence dx = plane_sequence("x", {offset(0.1), offset(0.01)});
    const RawSequence rx = plane_sequence("x", {ref, ref});
    const RawSequence dy = plane_sequence("y", {offset(std::pow(10.0, -1.5))});
    const RawSequence ry = plane_sequence("y", {ref});
    const EvalReport r = evaluate({dx, dy}, {rx, ry}, 3);
    ASSERT_EQ(r.sequences.size(), 2u);
    EXPECT_EQ(r.sequences[0].sequence, "x");
    EXPECT_NEAR(r.sequences[0].psnr, 30.0, 1e-9);
    EXPECT_NEAR(r.sequences[1].psnr, 30.0, 1e-9);
    EXPECT_NEAR(r.psnr, 30.0, 1e-9);
    const EvalReport swapped = evaluate({dy, dx}, {rx, ry});
    EXPECT_EQ(swapped.psnr, r.psnr);
    EXPECT_EQ(swapped.ssim, r.ssim);
    EXPECT_EQ(swapped.frames.size(), 3u);

    // unequal sequence lengths separate frame-mean from sequence-mean
    const RawSequence dz = plane_sequence("z", {offset(0.1), offset(0.1), offset(0.01)});
    const RawSequence rz = plane_sequence("z", {ref, ref, ref});
    const EvalReport u = evaluate({dz, dy}, {rz, ry});
    EXPECT_NEAR(u.psnr, ((20.0 + 20.0 + 40.0) / 3 + 30.0) / 2, 1e-9);
}

TEST(Eval, Mismatches) {
    const RawSequence a = plane_sequence("a", {Plane(32, 32, 0.5)});
    const RawSequence b = plane_sequence("b", {Plane(32, 32, 0.5)});
    const RawSequence a2 = plane_sequence("a", {Plane(32, 32, 0.5), Plane(32, 32, 0.5)});
    EXPECT_THROW(evaluate({a}, {a, b}), Error);
    EXPECT_THROW(evaluate({a}, {b}), Error);
    EXPECT_THROW(evaluate({a2}, {a}), Error);
    EXPECT_THROW(evaluate({a, a}, {a, b}), Error);
    EXPECT_THROW(evaluate({plane_sequence("a", {Plane(30, 32, 0.5)})}, {a}), Error);
}

TEST(Eval, CsvLayout) {
    TempDir dir("csv");
    const RawSequence a = plane_sequence("a", {Plane(32, 32, 0.5)});
    write_eval_csv(dir.path() / "r.csv", evaluate({a}, {a}));
    std::ifstream in(dir.path() / "r.csv");
    std::vector<std::string> lines;
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    ASSERT_EQ(lines.size(), 4u);
    EXPECT_EQ(lines[0], "scope,sequence,frame,psnr,ssim");
    EXPECT_EQ(lines[1], "frame,a,0,inf,1.000000");
    EXPECT_EQ(lines[3].rfind("dataset,", 0), 0u);
}

TEST(Subsample, StrideRules) {
    RawSequence s;
    s.id = "long";
    s.frame_rate = 120;
    for (int i = 0; i < 498; ++i) {
        RawFrame f;
        f.data = Plane(2, 2, i);
        s.frames.push_back(f);
    }
    const RawSequence third = temporal_subsample(s, 3);
    EXPECT_EQ(third.frames.size(), 166u);
    EXPECT_DOUBLE_EQ(third.frame_rate, 40.0);
    EXPECT_EQ(third.frames[1].data(0, 0), 3.0);
    const RawSequence same = temporal_subsample(s, 1);
    EXPECT_EQ(same.frames.size(), 498u);
    EXPECT_EQ(temporal_subsample(s, 1000).frames.size(), 1u);
    EXPECT_THROW(temporal_subsample(s, 0), Error);
}

TEST(AverageGt, MeanAndConstantVideo) {
    const Plane u = random_plane(64, 64, 9);
    const RawSequence same = plane_sequence("s", {u, u, u});
    const auto gt = frame_average_gt(same);
    for (std::size_t i = 0; i < u.size(); ++i) EXPECT_NEAR(gt.frame.data.values()[i], u.values()[i], 1e-15);

    const double sigma = 0.05;
    const int n = 16;
    std::vector<Plane> frames;
    RngStream rng(10);
    for (int i = 0; i < n; ++i) {
        Plane p = u;
        for (double& v : p.values()) v += rng.normal(0, sigma);
        frames.push_back(p);
    }
    const auto noisy = frame_average_gt(plane_sequence("n", frames));
    double ss = 0;
    for (std::size_t i = 0; i < u.size(); ++i) ss += std::pow(noisy.frame.data.values()[i] - u.values()[i], 2);
    EXPECT_NEAR(std::sqrt(ss / u.size()), sigma / std::sqrt(n), 0.1 * sigma / std::sqrt(n));
    ASSERT_EQ(noisy.video.frames.size(), 16u);
    for (const auto& f : noisy.video.frames) EXPECT_EQ(f.data, noisy.frame.data);
    EXPECT_THROW(frame_average_gt(plane_sequence("one", {u})), Error);
    EXPECT_THROW(frame_average_gt(RawSequence{}), Error);
}
