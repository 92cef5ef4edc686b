#include "rawvid/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>

#include <json.hpp>

#include "rawvid/io.hpp"
#include "rawvid/metrics.hpp"
#include "rawvid/parallel.hpp"

namespace rawvid {

using nlohmann::json;

void write_manifest(const fs::path& path, const RunManifest& m) {
    json timings = json::array();
    for (const auto& [stage, seconds] : m.timings) timings.push_back({{"stage", stage}, {"seconds", seconds}});
    const json doc = {{"tool_version", m.tool_version}, {"command", m.command}, {"seed", m.seed},
                      {"config", m.config},             {"inputs", m.inputs},   {"outputs", m.outputs},
                      {"results", m.results},           {"timings", timings}};
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << doc.dump(2) << '\n';
    if (!out) throw Error("write failed: " + path.string());
}

RunManifest read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    try {
        const json doc = json::parse(in);
        RunManifest m;
        m.tool_version = doc.at("tool_version").get<std::string>();
        m.command = doc.at("command").get<std::string>();
        m.seed = doc.at("seed").get<std::uint64_t>();
        m.config = doc.at("config").get<ConfigMap>();
        m.inputs = doc.at("inputs").get<std::map<std::string, std::string>>();
        m.outputs = doc.at("outputs").get<std::map<std::string, std::string>>();
        m.results = doc.value("results", std::map<std::string, std::string>{});
        for (const auto& t : doc.at("timings")) {
            m.timings.emplace_back(t.at("stage").get<std::string>(), t.at("seconds").get<double>());
        }
        return m;
    } catch (const json::exception& e) {
        throw Error(path.string() + ": malformed manifest: " + e.what());
    }
}

StagedOutput::StagedOutput(fs::path target, bool directory) : target_(std::move(target)) {
    if (target_.empty()) throw Error("empty output path");
    const fs::path parent = target_.has_parent_path() ? target_.parent_path() : fs::path(".");
    fs::create_directories(parent);
    staging_ = parent / ("." + target_.filename().string() + ".staging");
    fs::remove_all(staging_);
    if (directory) fs::create_directory(staging_);
}

StagedOutput::~StagedOutput() {
    if (committed_) return;
    std::error_code ec;
    fs::remove_all(staging_, ec);
}

void StagedOutput::commit() {
    if (committed_) return;
    fs::remove_all(target_);
    fs::rename(staging_, target_);
    committed_ = true;
}

namespace {

std::vector<fs::path> ppm_files(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".ppm") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

Srgb8Sequence load_srgb_sequence(const std::string& id, const std::vector<fs::path>& files, double frame_rate) {
    Srgb8Sequence seq;
    seq.id = id;
    seq.frame_rate = frame_rate;
    for (const fs::path& f : files) {
        seq.frames.push_back(read_srgb8_ppm(f));
        if (!seq.frames.back()[0].same_shape(seq.frames.front()[0])) {
            throw Error(f.string() + ": frame size differs from the rest of sequence " + id);
        }
    }
    return seq;
}

}  // namespace

std::vector<Srgb8Sequence> load_srgb_dataset(const fs::path& root, double frame_rate) {
    if (!fs::is_directory(root)) throw Error("sRGB dataset not found: " + root.string());
    std::vector<Srgb8Sequence> out;
    if (auto top = ppm_files(root); !top.empty()) out.push_back(load_srgb_sequence("seq", top, frame_rate));
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory()) dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());
    for (const fs::path& d : dirs) {
        auto files = ppm_files(d);
        if (files.empty()) continue;
        const std::string id = d.filename().string();
        if (id == "seq" && !out.empty() && out.front().id == "seq") {
            throw Error("sequence id 'seq' is used both by top-level frames and a subdirectory");
        }
        out.push_back(load_srgb_sequence(id, files, frame_rate));
    }
    if (out.empty()) throw Error("no .ppm frames in " + root.string());
    for (const auto& s : out) {
        if (!s.frames.front()[0].same_shape(out.front().frames.front()[0])) {
            throw Error("sequence " + s.id + " has a different frame size");
        }
    }
    return out;
}

PercentilePair dataset_percentiles(const std::vector<RawSequence>& dataset) {
    const auto pool = pooled_values(dataset);
    if (pool.empty()) throw Error("surrogate dataset is empty");
    return percentile_pair(pool);
}

std::vector<RawSequence> quantize_dataset(std::vector<RawSequence> sequences) {
    for (auto& seq : sequences) {
        for (auto& f : seq.frames) f.data = quantize_to_codes(f.data, f.black_level, f.white_level);
    }
    return sequences;
}

MakeSyntheticResult make_synthetic(const std::vector<Srgb8Sequence>& videos, const CameraProfile& profile,
                                   const PercentilePair& target, const NoiseSource& noise, std::uint64_t seed,
                                   const MakeSyntheticOptions& options) {
    if (videos.empty()) throw Error("make-synthetic: no input sequences");
    MakeSyntheticResult r;
    r.clean = quantize_dataset(
        unprocess_dataset(videos, profile, seed, target, options.unprocess, options.jobs, &r.tonemap));
    if (const auto* model = std::get_if<NoiseModel>(&noise)) {
        r.model = *model;
    } else {
        const auto& reference = std::get<std::vector<RawSequence>>(noise);
        r.calibration = estimate_camera_nlf(reference, options.nlf, options.weighting, options.jobs);
        const AffineNlf& fit = r.calibration->fit;
        if (!(fit.a >= 0.0) || !(fit.b >= 0.0)) {
            throw Error("make-synthetic: calibration is degenerate (a = " + std::to_string(fit.a) +
                        ", b = " + std::to_string(fit.b) + ")");
        }
        r.model = fit.as_params();
    }
    SynthesisOptions synthesis = options.synthesis;
    synthesis.jobs = options.jobs;
    r.noisy = synthesize_noisy_dataset(r.clean, r.model, seed, synthesis);
    return r;
}

namespace {

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

EvalReport evaluate(const std::vector<RawSequence>& denoised, const std::vector<RawSequence>& reference, int jobs) {
    if (denoised.size() != reference.size()) {
        throw Error("eval: " + std::to_string(denoised.size()) + " sequences vs " +
                    std::to_string(reference.size()) + " in the reference");
    }
    std::map<std::string, const RawSequence*> ref_by_id;
    for (const auto& s : reference) {
        if (!ref_by_id.emplace(s.id, &s).second) throw Error("eval: duplicate sequence id " + s.id);
    }
    std::map<std::string, const RawSequence*> den_by_id;
    for (const auto& s : denoised) {
        if (!ref_by_id.contains(s.id)) throw Error("eval: sequence " + s.id + " missing from the reference");
        if (!den_by_id.emplace(s.id, &s).second) throw Error("eval: duplicate sequence id " + s.id);
    }
    std::vector<std::pair<const RawSequence*, const RawSequence*>> pairs;
    for (const auto& [id, den] : den_by_id) {
        const RawSequence* ref = ref_by_id.at(id);
        if (den->frames.size() != ref->frames.size()) {
            throw Error("eval: sequence " + id + " has " + std::to_string(den->frames.size()) + " frames vs " +
                        std::to_string(ref->frames.size()) + " in the reference");
        }
        if (den->frames.empty()) throw Error("eval: sequence " + id + " is empty");
        pairs.emplace_back(den, ref);
    }

    EvalReport report;
    std::vector<std::vector<FrameScore>> per_seq(pairs.size());
    for (std::size_t s = 0; s < pairs.size(); ++s) per_seq[s].resize(pairs[s].first->frames.size());
    std::vector<std::pair<std::size_t, std::size_t>> items;
    for (std::size_t s = 0; s < pairs.size(); ++s) {
        for (std::size_t f = 0; f < per_seq[s].size(); ++f) items.emplace_back(s, f);
    }
    parallel_for(items.size(), jobs, [&](std::size_t i) {
        const auto [s, f] = items[i];
        const Plane& a = pairs[s].first->frames[f].data;
        const Plane& b = pairs[s].second->frames[f].data;
        require_same_shape(a, b, "eval");
        per_seq[s][f] = {pairs[s].first->id, f, psnr(a, b), ssim_raw(a, b)};
    });

    std::vector<double> seq_psnr, seq_ssim;
    for (std::size_t s = 0; s < pairs.size(); ++s) {
        std::vector<double> p, q;
        for (const FrameScore& fs : per_seq[s]) {
            p.push_back(fs.psnr);
            q.push_back(fs.ssim);
            report.frames.push_back(fs);
        }
        report.sequences.push_back({pairs[s].first->id, mean_of(p), mean_of(q)});
        seq_psnr.push_back(report.sequences.back().psnr);
        seq_ssim.push_back(report.sequences.back().ssim);
    }
    report.psnr = mean_of(seq_psnr);
    report.ssim = mean_of(seq_ssim);
    return report;
}

std::string format_score(double value) {
    if (std::isinf(value) && value > 0) return "inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", value);
    return buf;
}

void write_eval_csv(const fs::path& path, const EvalReport& report) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "scope,sequence,frame,psnr,ssim\n";
    for (const auto& f : report.frames) {
        out << "frame," << f.sequence << ',' << f.frame << ',' << format_score(f.psnr) << ','
            << format_score(f.ssim) << '\n';
    }
    for (const auto& s : report.sequences) {
        out << "sequence," << s.sequence << ",," << format_score(s.psnr) << ',' << format_score(s.ssim) << '\n';
    }
    out << "dataset,,," << format_score(report.psnr) << ',' << format_score(report.ssim) << '\n';
    if (!out) throw Error("write failed: " + path.string());
}

RawSequence temporal_subsample(const RawSequence& sequence, int stride) {
    if (stride < 1) throw Error("subsample: stride must be >= 1");
    RawSequence out;
    out.id = sequence.id;
    out.frame_rate = sequence.frame_rate / stride;
    for (std::size_t i = 0; i < sequence.frames.size(); i += static_cast<std::size_t>(stride)) {
        out.frames.push_back(sequence.frames[i]);
    }
    return out;
}

AveragedGroundTruth frame_average_gt(const RawSequence& sequence) {
    if (sequence.frames.empty()) throw Error("avg-gt: empty sequence");
    if (sequence.frames.size() < 2) throw Error("avg-gt: need at least two frames to average");
    validate_sequence(sequence);
    AveragedGroundTruth gt;
    gt.frame = sequence.frames.front();
    auto dst = gt.frame.data.values();
    std::fill(dst.begin(), dst.end(), 0.0);
    for (const RawFrame& f : sequence.frames) {
        auto src = f.data.values();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
    for (double& v : dst) v /= static_cast<double>(sequence.frames.size());
    gt.video.id = sequence.id;
    gt.video.frame_rate = sequence.frame_rate;
    gt.video.frames.assign(sequence.frames.size(), gt.frame);
    return gt;
}

}  // namespace rawvid
