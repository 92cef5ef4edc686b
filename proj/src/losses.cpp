#include "rawvid/losses.hpp"

#include <algorithm>
#include <cmath>

namespace rawvid {

std::size_t mirror_frame_index(long long index, std::size_t length) {
    if (length == 0) throw Error("mirror_frame_index: empty sequence");
    if (length == 1) return 0;
    const long long n = static_cast<long long>(length);
    const long long period = 2 * (n - 1);
    long long m = index % period;
    if (m < 0) m += period;
    return static_cast<std::size_t>(m < n ? m : period - m);
}

FrameStack build_stack(const RawSequence& sequence, std::size_t t, const StackOffsets& offsets) {
    if (sequence.frames.empty()) throw Error("build_stack: empty sequence");
    if (t >= sequence.frames.size()) throw Error("build_stack: centre index out of range");
    for (std::size_t i = 0; i < kStackSize; ++i) {
        if (offsets[i] != -offsets[kStackSize - 1 - i]) throw Error("build_stack: offsets must be symmetric around 0");
    }
    FrameStack stack;
    stack.center = t;
    stack.offsets = offsets;
    stack.frames.reserve(kStackSize);
    for (std::size_t i = 0; i < kStackSize; ++i) {
        const std::size_t idx = mirror_frame_index(static_cast<long long>(t) + offsets[i], sequence.frames.size());
        stack.indices[i] = idx;
        stack.frames.push_back(sequence.frames[idx]);
    }
    return stack;
}

FrameStack build_mf2f_stack(const RawSequence& sequence, std::size_t t, const StackOffsets& offsets) {
    if (sequence.frames.size() < 2) throw Error("build_mf2f_stack: sequence needs at least two frames");
    FrameStack stack = build_stack(sequence, t, offsets);
    stack.target_index = mirror_frame_index(static_cast<long long>(t) - 1, sequence.frames.size());
    for (std::size_t idx : stack.indices) {
        if (idx == stack.target_index) {
            throw Error("build_mf2f_stack: target frame t-1 falls inside the input stack for these offsets");
        }
    }
    return stack;
}

RawFrame Denoiser::operator()(const FrameStack& stack) const {
    if (!fn) throw Error("denoiser '" + name + "' has no implementation");
    const RawFrame& center = stack.center_frame();
    RawFrame out = center;
    out.data = fn(stack);
    if (!out.data.same_shape(center.data)) {
        throw Error("denoiser '" + name + "' returned a prediction of the wrong size");
    }
    return out;
}

Denoiser identity_denoiser() {
    return {"identity", [](const FrameStack& s) { return s.center_frame().data; }, true};
}

Denoiser temporal_mean_denoiser() {
    return {"temporal_mean",
            [](const FrameStack& s) {
                Plane out(s.center_frame().width(), s.center_frame().height());
                auto dst = out.values();
                for (const RawFrame& f : s.frames) {
                    auto src = f.data.values();
                    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
                }
                for (double& v : dst) v /= static_cast<double>(s.frames.size());
                return out;
            },
            true};
}

namespace {

Plane blur_plane(const Plane& in, double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) sum += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    for (double& v : k) v /= sum;
    const int w = in.width(), h = in.height();
    Plane tmp(w, h), out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int i = -radius; i <= radius; ++i) s += k[i + radius] * in(reflect_index(x + i, w), y);
            tmp(x, y) = s;
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int i = -radius; i <= radius; ++i) s += k[i + radius] * tmp(x, reflect_index(y + i, h));
            out(x, y) = s;
        }
    }
    return out;
}

}  // namespace

Denoiser gaussian_blur_denoiser(double sigma) {
    if (!(sigma > 0.0)) throw Error("gaussian blur denoiser: sigma must be positive");
    return {"gaussian_blur",
            [sigma](const FrameStack& s) {
                auto planes = pack_planes(s.center_frame().data);
                for (Plane& p : planes) p = blur_plane(p, sigma);
                return unpack_planes(planes);
            },
            true};
}

Mf2fAlignment estimate_alignment(const RawFrame& frame_t, const RawFrame& frame_prev, const Mf2fOptions& options) {
    require_same_shape(frame_t.data, frame_prev.data, "mf2f alignment");
    const Plane in_t = flow_input(frame_t);
    const Plane in_prev = flow_input(frame_prev);
    Mf2fAlignment a;
    a.flow = tvl1_flow(in_prev, in_t, options.flow);
    const FlowField backward = tvl1_flow(in_t, in_prev, options.flow);
    a.mask = occlusion_mask(a.flow, backward, options.occlusion);
    // samples taken outside frame t are not trusted either
    const OcclusionMask valid = warp_plane(in_t, a.flow, options.interpolation).valid;
    for (std::size_t i = 0; i < a.mask.size(); ++i) a.mask.values()[i] &= valid.values()[i];
    return a;
}

Mf2fResult mf2f_loss_from_prediction(const RawFrame& prediction, const RawFrame& target, const Mf2fAlignment& alignment,
                                     const Mf2fOptions& options) {
    require_same_shape(prediction.data, target.data, "mf2f_loss");
    if (alignment.mask.width() != target.width() || alignment.mask.height() != target.height()) {
        throw Error("mf2f_loss: alignment does not match the frame size");
    }
    const RawFrame warped = warp_raw(prediction, alignment.flow, options.demosaic, options.interpolation);
    Mf2fResult r;
    r.mask = alignment.mask;
    r.residual = Plane(target.width(), target.height());
    double sum = 0.0;
    std::size_t trusted = 0;
    auto w = warped.data.values();
    auto f = target.data.values();
    auto res = r.residual.values();
    auto m = alignment.mask.values();
    for (std::size_t i = 0; i < res.size(); ++i) {
        res[i] = w[i] - f[i];
        if (m[i]) {
            sum += std::abs(res[i]);
            ++trusted;
        }
    }
    if (trusted == 0) throw Error("mf2f_loss: occlusion mask is empty, every pixel is untrusted");
    r.loss = sum / static_cast<double>(trusted);
    r.mask_coverage = static_cast<double>(trusted) / static_cast<double>(res.size());
    return r;
}

std::shared_ptr<const Mf2fAlignment> Mf2fEvaluator::alignment(const RawSequence& sequence, std::size_t t,
                                                              std::size_t target) {
    const auto key = std::make_tuple(sequence.id, t, target);
    {
        std::lock_guard lock(mutex_);
        if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    auto computed = std::make_shared<const Mf2fAlignment>(
        estimate_alignment(sequence.frames.at(t), sequence.frames.at(target), options_));
    std::lock_guard lock(mutex_);
    return cache_.try_emplace(key, std::move(computed)).first->second;
}

std::size_t Mf2fEvaluator::cached_alignments() const {
    std::lock_guard lock(mutex_);
    return cache_.size();
}

Mf2fResult Mf2fEvaluator::evaluate(const Denoiser& denoiser, const RawSequence& sequence, std::size_t t) {
    const FrameStack stack = build_mf2f_stack(sequence, t, options_.offsets);
    const RawFrame prediction = denoiser(stack);
    const auto align = alignment(sequence, t, stack.target_index);
    Mf2fResult r = mf2f_loss_from_prediction(prediction, sequence.frames[stack.target_index], *align, options_);
    r.target_index = stack.target_index;
    return r;
}

Mf2fResult mf2f_loss(const Denoiser& denoiser, const RawSequence& sequence, std::size_t t,
                     const Mf2fOptions& options) {
    Mf2fEvaluator evaluator(options);
    return evaluator.evaluate(denoiser, sequence, t);
}

double blindspot_loss(const Denoiser& denoiser, const RawSequence& sequence, std::size_t t) {
    const FrameStack stack = build_stack(sequence, t, kContiguousOffsets);
    const RawFrame prediction = denoiser(stack);
    const Plane& noisy = sequence.frames[t].data;
    auto p = prediction.data.values();
    auto f = noisy.values();
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = p[i] - f[i];
        sum += d * d;
    }
    return sum / static_cast<double>(p.size());
}

namespace {

// 90 degree clockwise rotation, applied `turns` times.
Plane rotate_cw(const Plane& in, int turns) {
    turns = ((turns % 4) + 4) % 4;
    if (turns == 0) return in;
    const int w = in.width(), h = in.height();
    if (turns == 2) {
        Plane out(w, h);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) out(x, y) = in(w - 1 - x, h - 1 - y);
        }
        return out;
    }
    Plane out(h, w);
    for (int y = 0; y < w; ++y) {
        for (int x = 0; x < h; ++x) {
            out(x, y) = turns == 1 ? in(y, h - 1 - x) : in(w - 1 - y, x);
        }
    }
    return out;
}

Plane shift_down(const Plane& in) {
    Plane out(in.width(), in.height(), 0.0);
    for (int y = 1; y < in.height(); ++y) {
        std::copy(in.row(y - 1).begin(), in.row(y - 1).end(), out.row(y).begin());
    }
    return out;
}

struct BlindSpotWeights {
    BlindSpotNetConfig config;
    // layer l: [out][in][row (dy = -1, 0)][col (dx = -1, 0, 1)]
    std::vector<std::vector<double>> layers;
    std::vector<int> layer_inputs;
    std::vector<double> combine;  // [rotation][channel]
};

// Zero-padded causal 3x3 convolution: only the rows above and at the output row contribute.
std::vector<Plane> causal_conv(const std::vector<Plane>& in, const std::vector<double>& k, int outputs,
                               double leak) {
    const int inputs = static_cast<int>(in.size());
    const int w = in[0].width(), h = in[0].height();
    std::vector<Plane> out(outputs, Plane(w, h));
    for (int o = 0; o < outputs; ++o) {
        Plane& dst = out[o];
        for (int i = 0; i < inputs; ++i) {
            const Plane& src = in[i];
            const double* kk = &k[(static_cast<std::size_t>(o) * inputs + i) * 6];
            for (int y = 0; y < h; ++y) {
                for (int r = 0; r < 2; ++r) {
                    const int sy = y - 1 + r;
                    if (sy < 0) continue;
                    auto srow = src.row(sy);
                    auto drow = dst.row(y);
                    for (int x = 0; x < w; ++x) {
                        double s = kk[r * 3 + 1] * srow[x];
                        if (x > 0) s += kk[r * 3 + 0] * srow[x - 1];
                        if (x + 1 < w) s += kk[r * 3 + 2] * srow[x + 1];
                        drow[x] += s;
                    }
                }
            }
        }
        for (double& v : dst.values()) v = v >= 0.0 ? v : leak * v;
    }
    return out;
}

Plane blindspot_forward(const BlindSpotWeights& net, const FrameStack& stack) {
    const int c = net.config.channels;
    const RawFrame& center = stack.center_frame();
    Plane out(center.width(), center.height(), 0.0);
    for (int r = 0; r < 4; ++r) {
        std::vector<Plane> h;
        h.reserve(stack.frames.size());
        for (const RawFrame& f : stack.frames) {
            Plane p = rotate_cw(f.data, r);
            h.push_back(net.config.remove_blindspot ? std::move(p) : shift_down(p));
        }
        for (std::size_t l = 0; l < net.layers.size(); ++l) h = causal_conv(h, net.layers[l], c, net.config.leak);
        for (int ch = 0; ch < c; ++ch) {
            const Plane back = rotate_cw(h[ch], 4 - r);
            const double wgt = net.combine[static_cast<std::size_t>(r) * c + ch];
            auto src = back.values();
            auto dst = out.values();
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += wgt * src[i];
        }
    }
    return out;
}

}  // namespace

Denoiser reference_blindspot_net(const BlindSpotNetConfig& config, RngStream& rng) {
    if (config.depth < 1) throw Error("reference_blindspot_net: depth must be >= 1");
    if (config.channels < 1) throw Error("reference_blindspot_net: channels must be >= 1");
    auto net = std::make_shared<BlindSpotWeights>();
    net->config = config;
    int inputs = static_cast<int>(kStackSize);
    for (int l = 0; l < config.depth; ++l) {
        const double stddev = std::sqrt(2.0 / (inputs * 6.0));
        std::vector<double> k(static_cast<std::size_t>(config.channels) * inputs * 6);
        for (double& v : k) v = rng.normal(0.0, stddev);
        net->layers.push_back(std::move(k));
        net->layer_inputs.push_back(inputs);
        inputs = config.channels;
    }
    net->combine.resize(static_cast<std::size_t>(4) * config.channels);
    for (double& v : net->combine) v = rng.normal(0.0, 1.0 / std::sqrt(4.0 * config.channels));
    std::string name = config.remove_blindspot ? "reference_net" : "reference_blindspot_net";
    return {name, [net](const FrameStack& s) { return blindspot_forward(*net, s); }, true};
}

RfProbeReport probe_receptive_field(const Denoiser& denoiser, const FrameStack& base, int x, int y, int radius,
                                    double eps, std::size_t slot, double threshold) {
    if (!(std::abs(eps) >= kProbeMinEpsilon)) throw Error("probe_receptive_field: epsilon below the numerical floor");
    if (radius < 0) throw Error("probe_receptive_field: negative radius");
    if (slot >= base.frames.size()) throw Error("probe_receptive_field: frame slot out of range");
    const RawFrame& frame = base.frames[slot];
    if (x - radius < 0 || y - radius < 0 || x + radius >= frame.width() || y + radius >= frame.height()) {
        throw Error("probe_receptive_field: probe window must lie inside the frame");
    }
    const double reference = denoiser(base).data(x, y);
    RfProbeReport report;
    report.x = x;
    report.y = y;
    report.threshold = threshold;
    FrameStack work = base;
    for (int py = y - radius; py <= y + radius; ++py) {
        for (int px = x - radius; px <= x + radius; ++px) {
            double& cell = work.frames[slot].data(px, py);
            const double saved = cell;
            cell = saved + eps;
            const double delta = std::abs(denoiser(work).data(x, y) - reference);
            cell = saved;
            if (px == x && py == y) report.center_delta = delta;
            if (delta > threshold) report.influential.emplace_back(px, py);
        }
    }
    report.has_blind_spot = !(report.center_delta > threshold);
    return report;
}

FrameStack random_probe_stack(int width, int height, std::uint64_t seed) {
    FrameStack stack;
    stack.offsets = kContiguousOffsets;
    for (std::size_t i = 0; i < kStackSize; ++i) {
        RngStream rng = derive_stream(seed, "probe", "frame", i);
        RawFrame f;
        f.data = Plane(width, height);
        for (double& v : f.data.values()) v = rng.uniform();
        stack.frames.push_back(std::move(f));
        stack.indices[i] = i;
    }
    stack.center = kStackSize / 2;
    return stack;
}

}  // namespace rawvid
