#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <thread>

#include "rawvid/losses.hpp"
#include "test_support.hpp"

using namespace rawvid;
using testing_support::random_plane;
using testing_support::texture;

namespace {

RawSequence make_sequence(int frames, int w, int h, unsigned seed, const std::string& id = "seq") {
    RawSequence s;
    s.id = id;
    s.frame_rate = 30;
    for (int i = 0; i < frames; ++i) {
        RawFrame f;
        f.data = random_plane(w, h, seed + i);
        s.frames.push_back(f);
    }
    return s;
}

RawSequence static_sequence(int frames, const Plane& content) {
    RawSequence s;
    s.id = "static";
    for (int i = 0; i < frames; ++i) {
        RawFrame f;
        f.data = content;
        s.frames.push_back(f);
    }
    return s;
}

Denoiser constant_output(const Plane& p) {
    return {"fixed", [p](const FrameStack&) { return p; }, true};
}

Mf2fAlignment all_trusted(int w, int h, double u, double v) {
    return {FlowField(w, h, u, v), OcclusionMask(w, h, 1)};
}

std::set<std::pair<int, int>> as_set(const std::vector<std::pair<int, int>>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST(Stack, MirrorFrameIndex) {
    EXPECT_EQ(mirror_frame_index(-1, 10), 1u);
    EXPECT_EQ(mirror_frame_index(-4, 10), 4u);
    EXPECT_EQ(mirror_frame_index(10, 10), 8u);
    EXPECT_EQ(mirror_frame_index(13, 10), 5u);
    EXPECT_EQ(mirror_frame_index(-3, 2), 1u);
    EXPECT_EQ(mirror_frame_index(7, 1), 0u);
    EXPECT_THROW(mirror_frame_index(0, 0), Error);
}

TEST(Stack, Mf2fIndicesAndTarget) {
    const RawSequence seq = make_sequence(100, 8, 8, 1);
    const FrameStack s = build_mf2f_stack(seq, 10);
    EXPECT_EQ(s.indices, (std::array<std::size_t, 5>{6, 8, 10, 12, 14}));
    EXPECT_EQ(s.target_index, 9u);
    EXPECT_EQ(s.center_frame().data, seq.frames[10].data);
    const FrameStack b = build_mf2f_stack(seq, 0);
    EXPECT_EQ(b.indices, (std::array<std::size_t, 5>{4, 2, 0, 2, 4}));
    EXPECT_EQ(b.target_index, 1u);
    const FrameStack e = build_mf2f_stack(seq, 99);
    EXPECT_EQ(e.indices, (std::array<std::size_t, 5>{95, 97, 99, 97, 95}));
    EXPECT_EQ(e.target_index, 98u);
}

TEST(Stack, TargetNeverInStack) {
    for (int n : {2, 3, 5, 9, 20}) {
        const RawSequence seq = make_sequence(n, 6, 6, 2);
        for (int t = 0; t < n; ++t) {
            const FrameStack s = build_mf2f_stack(seq, t);
            for (auto idx : s.indices) EXPECT_NE(idx, s.target_index);
        }
    }
    // contiguous offsets contain t-1
    EXPECT_THROW(build_mf2f_stack(make_sequence(10, 6, 6, 3), 5, kContiguousOffsets), Error);
}

TEST(Stack, DegenerateAndInvalid) {
    const RawSequence seq = make_sequence(6, 6, 6, 4);
    const FrameStack zero = build_stack(seq, 3, {0, 0, 0, 0, 0});
    for (const auto& f : zero.frames) EXPECT_EQ(f.data, seq.frames[3].data);
    EXPECT_THROW(build_stack(seq, 3, {-2, -1, 0, 1, 3}), Error);
    EXPECT_THROW(build_stack(seq, 6, kContiguousOffsets), Error);
    EXPECT_THROW(build_stack(RawSequence{}, 0, kContiguousOffsets), Error);
    EXPECT_THROW(build_mf2f_stack(make_sequence(1, 6, 6, 5), 0), Error);
}

TEST(Denoisers, IdentityMeanBlur) {
    const RawSequence seq = make_sequence(7, 8, 8, 6);
    const FrameStack s = build_stack(seq, 3, kContiguousOffsets);
    EXPECT_EQ(identity_denoiser()(s).data, seq.frames[3].data);
    const Plane mean = temporal_mean_denoiser()(s).data;
    EXPECT_NEAR(mean(2, 5),
                (seq.frames[1].data(2, 5) + seq.frames[2].data(2, 5) + seq.frames[3].data(2, 5) +
                 seq.frames[4].data(2, 5) + seq.frames[5].data(2, 5)) / 5,
                1e-15);
    const Plane blurred = gaussian_blur_denoiser(0.8)(build_stack(static_sequence(5, Plane(8, 8, 0.3)), 2,
                                                                   kContiguousOffsets)).data;
    for (double v : blurred.values()) EXPECT_NEAR(v, 0.3, 1e-15);
    EXPECT_THROW(gaussian_blur_denoiser(0.0), Error);
    Denoiser bad{"bad", [](const FrameStack&) { return Plane(3, 3); }, true};
    EXPECT_THROW(bad(s), Error);
}

TEST(Denoisers, BlurStaysWithinCfaPlanes) {
    // a single red impulse must not leak into green or blue sites
    Plane p(12, 12, 0.0);
    p(6, 6) = 1.0;
    const Plane out = gaussian_blur_denoiser(1.0)(build_stack(static_sequence(5, p), 2, kContiguousOffsets)).data;
    for (int y = 0; y < 12; ++y) {
        for (int x = 0; x < 12; ++x) {
            if (x % 2 != 0 || y % 2 != 0) {
                EXPECT_EQ(out(x, y), 0.0);
            }
        }
    }
    EXPECT_GT(out(4, 6), 0.0);
}

TEST(Mf2f, StaticSceneLossesAreExactlyZero) {
    const RawSequence seq = static_sequence(9, texture(32, 32, 0, 0, 7));
    const Mf2fResult r = mf2f_loss(identity_denoiser(), seq, 4);
    EXPECT_EQ(r.loss, 0.0);
    EXPECT_EQ(r.mask_coverage, 1.0);
    EXPECT_EQ(r.target_index, 3u);
    const Mf2fResult target_equal = mf2f_loss(constant_output(seq.frames[3].data), seq, 4);
    EXPECT_EQ(target_equal.loss, 0.0);
}

TEST(Mf2f, ConstantOffsetGivesAbsC) {
    const RawSequence seq = static_sequence(6, texture(32, 32, 0, 0, 8));
    for (double c : {0.05, -0.125, 1e-3}) {
        Plane shifted = seq.frames[1].data;
        for (double& v : shifted.values()) v += c;
        EXPECT_NEAR(mf2f_loss(constant_output(shifted), seq, 2).loss, std::abs(c), 1e-9);
    }
}

TEST(Mf2f, ExplicitAlignmentArithmetic) {
    RawFrame target;
    target.data = random_plane(8, 8, 9);
    RawFrame pred = target;
    Mf2fAlignment a = all_trusted(8, 8, 0, 0);
    pred.data(1, 1) += 0.5;
    pred.data(2, 3) -= 0.25;
    a.mask(2, 3) = 0;
    const Mf2fResult r = mf2f_loss_from_prediction(pred, target, a);
    EXPECT_NEAR(r.loss, 0.5 / 63, 1e-15);
    EXPECT_NEAR(r.mask_coverage, 63.0 / 64, 1e-15);
    EXPECT_NEAR(r.residual(2, 3), -0.25, 1e-15);
    OcclusionMask none(8, 8, 0);
    EXPECT_THROW(mf2f_loss_from_prediction(pred, target, {FlowField(8, 8), none}), Error);
    EXPECT_THROW(mf2f_loss_from_prediction(pred, target, all_trusted(6, 6, 0, 0)), Error);
}

// With the bilinear demosaic the raw warp W is linear, so away from zero residuals a
// central difference reproduces the subgradient W^T (mask * sign(residual)) / |mask|.
// (Hamilton-Adams switches direction with the data and is only piecewise linear.)
TEST(Mf2f, FiniteDifferenceSubgradient) {
    const int n = 8;
    RawFrame target, pred;
    target.data = random_plane(n, n, 10);
    pred.data = random_plane(n, n, 11);
    Mf2fOptions options;
    options.demosaic = DemosaicMethod::bilinear;
    Mf2fAlignment a = all_trusted(n, n, 0.3, -0.2);
    a.mask(0, 0) = 0;
    a.mask(5, 2) = 0;
    const Mf2fResult base = mf2f_loss_from_prediction(pred, target, a, options);
    double trusted = 0;
    for (auto m : a.mask.values()) trusted += m;

    const double h = 1e-7;
    int checked = 0;
    for (int j = 0; j < n * n; ++j) {
        // column j of the linear warp operator
        RawFrame unit;
        unit.data = Plane(n, n, 0.0);
        unit.data.values()[j] = 1.0;
        const Plane column = warp_raw(unit, a.flow, DemosaicMethod::bilinear).data;
        double analytic = 0;
        double min_abs_residual = 1e9;
        for (int i = 0; i < n * n; ++i) {
            if (!a.mask.values()[i]) continue;
            const double r = base.residual.values()[i];
            analytic += (r > 0 ? 1 : -1) * column.values()[i] / trusted;
            if (column.values()[i] != 0) min_abs_residual = std::min(min_abs_residual, std::abs(r));
        }
        if (min_abs_residual < 1e-4) continue;
        RawFrame plus = pred, minus = pred;
        plus.data.values()[j] += h;
        minus.data.values()[j] -= h;
        const double fd = (mf2f_loss_from_prediction(plus, target, a, options).loss -
                           mf2f_loss_from_prediction(minus, target, a, options).loss) / (2 * h);
        EXPECT_NEAR(fd, analytic, 1e-5) << "pixel " << j;
        ++checked;
    }
    EXPECT_GT(checked, 32);
}

TEST(Mf2f, NonNegativeAndConstantPerturbationIsLipschitz) {
    RawFrame target, pred;
    target.data = random_plane(16, 16, 12);
    pred.data = random_plane(16, 16, 13);
    const Mf2fAlignment a = all_trusted(16, 16, 0.7, 0.4);
    const double base = mf2f_loss_from_prediction(pred, target, a).loss;
    EXPECT_GE(base, 0.0);
    for (double d : {1e-3, -0.02, 0.1}) {
        RawFrame moved = pred;
        for (double& v : moved.data.values()) v += d;
        EXPECT_LE(std::abs(mf2f_loss_from_prediction(moved, target, a).loss - base), std::abs(d) + 1e-12);
    }
}

TEST(Mf2f, EvaluatorCachesAlignments) {
    RawSequence seq;
    seq.id = "moving";
    for (int i = 0; i < 6; ++i) {
        RawFrame f;
        f.data = texture(32, 32, i, 0, 14);
        seq.frames.push_back(f);
    }
    Mf2fEvaluator ev;
    const Mf2fResult first = ev.evaluate(identity_denoiser(), seq, 3);
    EXPECT_EQ(ev.cached_alignments(), 1u);
    const Mf2fResult again = ev.evaluate(temporal_mean_denoiser(), seq, 3);
    EXPECT_EQ(ev.cached_alignments(), 1u);
    EXPECT_EQ(first.mask, again.mask);
    EXPECT_EQ(ev.alignment(seq, 3, 2).get(), ev.alignment(seq, 3, 2).get());
    ev.evaluate(identity_denoiser(), seq, 4);
    EXPECT_EQ(ev.cached_alignments(), 2u);
    EXPECT_EQ(first.loss, mf2f_loss(identity_denoiser(), seq, 3).loss);
    EXPECT_GT(first.mask_coverage, 0.5);

    std::vector<double> losses(4);
    Mf2fEvaluator shared;
    std::vector<std::thread> threads;
    for (int i = 0; i < 4; ++i) {
        threads.emplace_back([&, i] { losses[i] = shared.evaluate(identity_denoiser(), seq, 3).loss; });
    }
    for (auto& t : threads) t.join();
    for (double l : losses) EXPECT_EQ(l, first.loss);
}

TEST(BlindSpotLoss, MatchesMse) {
    const RawSequence seq = make_sequence(8, 10, 10, 20);
    EXPECT_EQ(blindspot_loss(identity_denoiser(), seq, 0), 0.0);
    Plane shifted = seq.frames[4].data;
    for (double& v : shifted.values()) v += 0.3;
    EXPECT_NEAR(blindspot_loss(constant_output(shifted), seq, 4), 0.09, 1e-12);
    const Plane mean = temporal_mean_denoiser()(build_stack(seq, 5, kContiguousOffsets)).data;
    double mse = 0;
    for (std::size_t i = 0; i < mean.size(); ++i) mse += std::pow(mean.values()[i] - seq.frames[5].data.values()[i], 2);
    EXPECT_NEAR(blindspot_loss(temporal_mean_denoiser(), seq, 5), mse / 100, 1e-12);
}

TEST(BlindSpotLoss, TemporalMeanOnIidNoise) {
    const double sigma = 0.05;
    RawSequence seq;
    seq.id = "iid";
    RngStream rng(99);
    for (int i = 0; i < 5; ++i) {
        RawFrame f;
        f.data = Plane(512, 512);
        for (double& v : f.data.values()) v = 0.5 + rng.normal(0, sigma);
        seq.frames.push_back(f);
    }
    // E|mean - n_t|^2 = sigma^2 (1 - 1/5); 2^18 pixels put the estimate within about 0.3%
    EXPECT_NEAR(blindspot_loss(temporal_mean_denoiser(), seq, 2), 0.8 * sigma * sigma, 0.02 * 0.8 * sigma * sigma);
}

TEST(Probe, IdentityAndBoxFilter) {
    const FrameStack s = random_probe_stack(16, 16, 1);
    const RfProbeReport id = probe_receptive_field(identity_denoiser(), s, 8, 8, 3);
    EXPECT_EQ(as_set(id.influential), (std::set<std::pair<int, int>>{{8, 8}}));
    EXPECT_FALSE(id.has_blind_spot);
    EXPECT_NEAR(id.center_delta, 1e-3, 1e-12);

    Denoiser box{"box",
                 [](const FrameStack& st) {
                     const Plane& in = st.center_frame().data;
                     Plane out(in.width(), in.height());
                     for (int y = 1; y + 1 < in.height(); ++y) {
                         for (int x = 1; x + 1 < in.width(); ++x) {
                             for (int dy = -1; dy <= 1; ++dy) {
                                 for (int dx = -1; dx <= 1; ++dx) out(x, y) += in(x + dx, y + dy) / 9;
                             }
                         }
                     }
                     return out;
                 },
                 true};
    const RfProbeReport r = probe_receptive_field(box, s, 7, 9, 3);
    std::set<std::pair<int, int>> expect;
    for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) expect.insert({7 + dx, 9 + dy});
    }
    EXPECT_EQ(as_set(r.influential), expect);
}

TEST(Probe, RejectsBadArguments) {
    const FrameStack s = random_probe_stack(16, 16, 2);
    EXPECT_THROW(probe_receptive_field(identity_denoiser(), s, 8, 8, 3, 1e-9), Error);
    EXPECT_THROW(probe_receptive_field(identity_denoiser(), s, 2, 8, 3), Error);
    EXPECT_THROW(probe_receptive_field(identity_denoiser(), s, 8, 8, 3, 1e-3, 5), Error);
    EXPECT_EQ(random_probe_stack(16, 16, 2).frames[1].data, s.frames[1].data);
    EXPECT_NE(random_probe_stack(16, 16, 3).frames[1].data, s.frames[1].data);
}

TEST(BlindSpotNet, DepthOneReceptiveField) {
    // each rotated branch sees rows y-2 and y-1 over columns x-1..x+1; the union over the
    // four rotations is the 5x5 window without its corners and without the centre
    std::set<std::pair<int, int>> expect;
    for (int dy = -2; dy <= 2; ++dy) {
        for (int dx = -2; dx <= 2; ++dx) {
            if (dx == 0 && dy == 0) continue;
            if (std::abs(dx) <= 1 || std::abs(dy) <= 1) expect.insert({10 + dx, 10 + dy});
        }
    }
    ASSERT_EQ(expect.size(), 20u);
    RngStream rng(5);
    const Denoiser net = reference_blindspot_net({1, 4, false, 0.1}, rng);
    const RfProbeReport r = probe_receptive_field(net, random_probe_stack(20, 20, 6), 10, 10, 4);
    EXPECT_TRUE(r.has_blind_spot);
    EXPECT_EQ(as_set(r.influential), expect);
}

TEST(BlindSpotNet, BlindSpotForEveryDraw) {
    const FrameStack s = random_probe_stack(24, 24, 7);
    for (int draw = 0; draw < 5; ++draw) {
        RngStream rng = derive_stream(11, "test", "draw", draw);
        const Denoiser net = reference_blindspot_net({3, 4, false, 0.1}, rng);
        EXPECT_EQ(net.name, "reference_blindspot_net");
        for (auto [x, y] : {std::pair{12, 12}, std::pair{7, 15}}) {
            const RfProbeReport r = probe_receptive_field(net, s, x, y, 1);
            EXPECT_TRUE(r.has_blind_spot);
            EXPECT_LT(r.center_delta, 1e-12);
        }
        RngStream rng2 = derive_stream(11, "test", "draw", draw);
        const Denoiser open = reference_blindspot_net({3, 4, true, 0.1}, rng2);
        EXPECT_EQ(open.name, "reference_net");
        const RfProbeReport r = probe_receptive_field(open, s, 12, 12, 1);
        EXPECT_FALSE(r.has_blind_spot);
        EXPECT_GT(r.center_delta, kProbeThreshold);
    }
}

TEST(BlindSpotNet, BlindSpotHoldsInEveryFrame) {
    // every frame of the stack goes through the same shifted branches
    RngStream rng(12);
    const Denoiser net = reference_blindspot_net({2, 4, false, 0.1}, rng);
    const RfProbeReport r = probe_receptive_field(net, random_probe_stack(16, 16, 8), 8, 8, 2, 1e-3, 0);
    EXPECT_TRUE(r.has_blind_spot);
    EXPECT_THROW(reference_blindspot_net({0, 4, false, 0.1}, rng), Error);
    EXPECT_THROW(reference_blindspot_net({1, 0, false, 0.1}, rng), Error);
}
