#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "rawvid/calibration.hpp"
#include "rawvid/demosaic.hpp"
#include "rawvid/digest.hpp"
#include "rawvid/flow.hpp"
#include "rawvid/io.hpp"
#include "rawvid/losses.hpp"
#include "rawvid/metrics.hpp"
#include "rawvid/noise.hpp"
#include "rawvid/parallel.hpp"
#include "rawvid/pipeline.hpp"
#include "rawvid/unprocess.hpp"
#include "rawvid/warp.hpp"

namespace {

using namespace rawvid;
using Clock = std::chrono::steady_clock;

struct Globals {
    std::uint64_t seed = 0;
    int jobs = 1;
    std::string manifest;
    std::string config;
};

// Bookkeeping shared by every subcommand: resolved config, digests, timings, manifest.
class Run {
public:
    Run(const CLI::App& sub, const Globals& g) : globals_(g) {
        manifest_.command = sub.get_name();
        manifest_.seed = g.seed;
        manifest_.config["jobs"] = std::to_string(g.jobs);
        manifest_.config["seed"] = std::to_string(g.seed);
        for (const CLI::Option* opt : sub.get_options()) {
            if (opt->get_single_name() == "help") continue;
            std::string value = opt->count() > 0 ? opt->results().back() : opt->get_default_str();
            if (opt->get_type_size() == 0) {
                if (opt->count() > 0) {
                    value = opt->as<bool>() ? "true" : "false";
                } else if (value.empty()) {
                    value = "false";
                }
            }
            manifest_.config[opt->get_single_name()] = value;
        }
    }

    void input(const std::string& name, const fs::path& path) {
        if (!fs::exists(path)) throw Error(name + " not found: " + path.string());
        manifest_.inputs[name] = digest_path(path);
    }

    void result(const std::string& key, const std::string& value) { manifest_.results[key] = value; }
    void result(const std::string& key, double value) { manifest_.results[key] = fmt(value); }

    template <typename Fn>
    auto timed(const std::string& stage, Fn&& fn) {
        const auto start = Clock::now();
        if constexpr (std::is_void_v<decltype(fn())>) {
            fn();
            record(stage, start);
        } else {
            auto out = fn();
            record(stage, start);
            return out;
        }
    }

    /// Digests the staged outputs, writes the manifest and moves everything into place.
    /// The manifest goes inside the first directory output unless --manifest says otherwise.
    void finish(std::vector<StagedOutput*> outputs) {
        for (StagedOutput* o : outputs) manifest_.outputs[o->target().filename().string()] = digest_path(o->path());
        std::optional<fs::path> external;
        if (!globals_.manifest.empty()) {
            external = globals_.manifest;
        } else if (!outputs.empty() && fs::is_directory(outputs.front()->path())) {
            write_manifest(outputs.front()->path() / kManifestFile, manifest_);
        } else if (!outputs.empty()) {
            external = outputs.front()->target().string() + ".manifest.json";
        }
        for (StagedOutput* o : outputs) o->commit();
        if (external) {
            StagedOutput staged(*external, false);
            write_manifest(staged.path(), manifest_);
            staged.commit();
        }
    }

    static std::string fmt(double v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.10g", v);
        return buf;
    }

private:
    void record(const std::string& stage, Clock::time_point start) {
        manifest_.timings.emplace_back(stage, std::chrono::duration<double>(Clock::now() - start).count());
    }

    Globals globals_;
    RunManifest manifest_;
};

struct RawFileOptions {
    std::string cfa = "RGGB";
    int black_level = 0;
    int white_level = 65535;

    void add(CLI::App* app) {
        app->add_option("--cfa", cfa, "CFA pattern of raw PGM inputs")->capture_default_str();
        app->add_option("--black-level", black_level, "Black level of raw PGM inputs")->capture_default_str();
        app->add_option("--white-level", white_level, "White level of raw PGM inputs")->capture_default_str();
    }

    RawFrame read(const fs::path& path) const { return read_raw_pgm(path, parse_cfa(cfa), black_level, white_level); }
};

struct FlowOptions {
    TvL1Params params;

    void add(CLI::App* app) {
        app->add_option("--lambda", params.lambda, "TV-L1 data weight")->capture_default_str();
        app->add_option("--theta", params.theta, "TV-L1 coupling")->capture_default_str();
        app->add_option("--tau", params.tau, "TV-L1 dual step")->capture_default_str();
        app->add_option("--scales", params.scales, "Pyramid levels (0 = automatic)")->capture_default_str();
        app->add_option("--zoom", params.zoom, "Pyramid zoom factor")->capture_default_str();
        app->add_option("--warps", params.warps, "Warps per scale")->capture_default_str();
        app->add_option("--epsilon", params.epsilon, "Stopping threshold")->capture_default_str();
        app->add_option("--iterations", params.max_iterations, "Max iterations per warp")->capture_default_str();
    }
};

struct SurrogateOptions {
    std::string surrogate;
    std::optional<double> p_low;
    std::optional<double> p_high;

    void add(CLI::App* app) {
        app->add_option("--surrogate", surrogate, "Raw dataset whose 1%/99% percentiles are matched");
        app->add_option("--p-low", p_low, "Target 1% percentile (instead of --surrogate)");
        app->add_option("--p-high", p_high, "Target 99% percentile (instead of --surrogate)");
    }

    PercentilePair resolve(Run& run) const {
        if (!surrogate.empty()) {
            if (p_low || p_high) throw Error("give either --surrogate or --p-low/--p-high, not both");
            run.input("surrogate", surrogate);
            const PercentilePair p = dataset_percentiles(load_dataset(surrogate));
            run.result("target_p01", p.low);
            run.result("target_p99", p.high);
            return p;
        }
        if (!p_low || !p_high) throw Error("need --surrogate or both --p-low and --p-high");
        return {*p_low, *p_high};
    }
};

struct UnprocessFlags {
    std::string profile;
    double frame_rate = 30.0;
    UnprocessOptions options;

    void add(CLI::App* app) {
        app->add_option("--profile", profile, "Camera profile JSON (built-in profile if omitted)");
        app->add_option("--frame-rate", frame_rate, "Frame rate stamped on the sequences")->capture_default_str();
        app->add_option("--out-black-level", options.black_level, "Black level of the written raw frames")
            ->capture_default_str();
        app->add_option("--out-white-level", options.white_level, "White level of the written raw frames")
            ->capture_default_str();
        app->add_flag("--dequantize,!--no-dequantize", options.dequantize, "Dither the 8-bit input codes")
            ->default_str("true");
        app->add_flag("--clip-unit,!--no-clip-unit", options.clip_unit, "Clip after inverse white balance")
            ->default_str("true");
    }

    CameraProfile load(Run& run) const {
        if (profile.empty()) return default_camera_profile();
        run.input("profile", profile);
        return read_camera_profile(profile);
    }
};

std::string denoiser_help() { return "identity | temporal-mean | gaussian | blindspot-net"; }

struct DenoiserOptions {
    std::string name = "identity";
    double sigma = 1.0;
    BlindSpotNetConfig net;

    void add(CLI::App* app) {
        app->add_option("--denoiser", name, denoiser_help())->capture_default_str();
        app->add_option("--sigma", sigma, "Blur sigma for the gaussian denoiser")->capture_default_str();
        app->add_option("--depth", net.depth, "Layers of the blindspot-net denoiser")->capture_default_str();
        app->add_option("--channels", net.channels, "Channels of the blindspot-net denoiser")->capture_default_str();
    }

    Denoiser make(std::uint64_t seed) const {
        if (name == "identity") return identity_denoiser();
        if (name == "temporal-mean") return temporal_mean_denoiser();
        if (name == "gaussian") return gaussian_blur_denoiser(sigma);
        if (name == "blindspot-net") {
            RngStream rng = derive_stream(seed, "denoiser", "weights");
            return reference_blindspot_net(net, rng);
        }
        throw Error("unknown denoiser '" + name + "' (expected " + denoiser_help() + ")");
    }
};

std::vector<RawSequence> select_sequences(std::vector<RawSequence> all, const std::string& id) {
    if (id.empty()) return all;
    for (auto& s : all) {
        if (s.id == id) return {std::move(s)};
    }
    throw Error("sequence '" + id + "' not in dataset");
}

void write_dataset_to(StagedOutput& out, const std::vector<RawSequence>& sequences) {
    write_dataset(out.path(), sequences);
}

void cmd_unprocess(CLI::App& app, const Globals& g) {
    auto* sub = app.add_subcommand("unprocess", "sRGB sequences -> clean raw dataset");
    struct Opts {
        std::string input, output;
        UnprocessFlags unprocess;
        SurrogateOptions surrogate;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--input", o->input, "Directory of 8-bit PPM sequences")->required();
    sub->add_option("--output", o->output, "Output raw dataset directory")->required();
    o->unprocess.add(sub);
    o->surrogate.add(sub);
    sub->callback([o, sub, &g] {
        Run run(*sub, g);
        run.input("input", o->input);
        const CameraProfile profile = o->unprocess.load(run);
        const PercentilePair target = o->surrogate.resolve(run);
        const auto videos = run.timed("load", [&] { return load_srgb_dataset(o->input, o->unprocess.frame_rate); });
        AffineToneMap map;
        const auto clean = run.timed("unprocess", [&] {
            return quantize_dataset(unprocess_dataset(videos, profile, g.seed, target, o->unprocess.options, g.jobs,
                                                      &map));
        });
        run.result("tonemap_scale", map.scale);
        run.result("tonemap_offset", map.offset);
        StagedOutput out(o->output, true);
        run.timed("write", [&] { write_dataset_to(out, clean); });
        run.finish({&out});
        std::cout << "unprocessed " << clean.size() << " sequences into " << o->output << '\n';
    });
}

void cmd_add_noise(CLI::App& app, const Globals& g) {
    auto* sub = app.add_subcommand("add-noise", "Clean raw dataset -> noisy raw dataset");
    struct Opts {
        std::string input, output, model;
        bool clamp_unit = false;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--input", o->input, "Clean raw dataset")->required();
    sub->add_option("--output", o->output, "Noisy raw dataset directory")->required();
    sub->add_option("--model", o->model, "Noise model JSON")->required();
    sub->add_flag("--clamp-unit", o->clamp_unit, "Clamp noisy values to [0,1]");
    sub->callback([o, sub, &g] {
        Run run(*sub, g);
        run.input("input", o->input);
        run.input("model", o->model);
        const NoiseModel model = read_noise_model(o->model);
        const auto clean = run.timed("load", [&] { return load_dataset(o->input); });
        const auto noisy = run.timed("noise", [&] {
            return synthesize_noisy_dataset(clean, model, g.seed, {o->clamp_unit, g.jobs});
        });
        StagedOutput out(o->output, true);
        run.timed("write", [&] { write_dataset_to(out, noisy); });
        run.finish({&out});
        std::cout << "wrote noisy dataset " << o->output << '\n';
    });
}

void print_fit(const AffineNlf& fit) {
    std::cout << "a = " << Run::fmt(fit.a) << "  b = " << Run::fmt(fit.b)
              << "  rms residual = " << Run::fmt(fit.fit_residual) << '\n';
}

FitWeighting parse_weighting(const std::string& s) {
    if (s == "none") return FitWeighting::none;
    if (s == "population") return FitWeighting::population;
    if (s == "inverse-variance") return FitWeighting::inverse_variance;
    throw Error("unknown weighting '" + s + "' (expected none | population | inverse-variance)");
}

void record_fit(Run& run, const AffineNlf& fit) {
    run.result("a", fit.a);
    run.result("b", fit.b);
    run.result("fit_residual", fit.fit_residual);
}

void cmd_calibrate_flatfield(CLI::App& app, const Globals& g) {
    auto* sub = app.add_subcommand("calibrate-flatfield", "Flat-field noise calibration of a noise model");
    struct Opts {
        std::string model, output, weighting = "none";
        int levels = 64;
        double level_min = 0.01, level_max = 0.99;
        int patch = 256;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--model", o->model, "Noise model JSON to calibrate")->required();
    sub->add_option("--output", o->output, "Point cloud CSV")->required();
    sub->add_option("--levels", o->levels, "Number of flat-field levels")->capture_default_str();
    sub->add_option("--level-min", o->level_min, "Lowest level")->capture_default_str();
    sub->add_option("--level-max", o->level_max, "Highest level")->capture_default_str();
    sub->add_option("--patch", o->patch, "Patch side length")->capture_default_str();
    sub->add_option("--weighting", o->weighting, "Fit weighting: none | population | inverse-variance")
        ->capture_default_str();
    sub->callback([o, sub, &g] {
        Run run(*sub, g);
        run.input("model", o->model);
        const NoiseModel model = read_noise_model(o->model);
        FlatfieldOptions opts{default_flatfield_levels(o->levels, o->level_min, o->level_max), o->patch, g.jobs};
        const auto cloud = run.timed("flatfield", [&] { return flatfield_calibrate(noiser_for(model), opts, g.seed); });
        const AffineNlf fit = fit_affine_nlf(cloud, parse_weighting(o->weighting));
        record_fit(run, fit);
        StagedOutput out(o->output, false);
        write_cloud_csv(out.path(), cloud);
        run.finish({&out});
        print_fit(fit);
    });
}

void add_nlf_options(CLI::App* sub, NlfOptions& nlf) {
    sub->add_option("--bins", nlf.bins, "Intensity bins")->capture_default_str();
    sub->add_option("--percentile", nlf.percentile, "Fraction of flattest blocks kept per bin")
        ->capture_default_str();
    sub->add_option("--min-blocks", nlf.min_blocks, "Minimum blocks kept per bin")->capture_default_str();
    sub->add_option("--stride", nlf.stride, "Block stride")->capture_default_str();
}

void cmd_estimate_nlf(CLI::App& app, const Globals& g) {
    auto* sub = app.add_subcommand("estimate-nlf", "Noise level function of a raw dataset");
    struct Opts {
        std::string input, output, weighting = "none";
        NlfOptions nlf;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--input", o->input, "Raw dataset")->required();
    sub->add_option("--output", o->output, "Point cloud CSV")->required();
    sub->add_option("--weighting", o->weighting, "Fit weighting: none | population | inverse-variance")
        ->capture_default_str();
    add_nlf_options(sub, o->nlf);
    sub->callback([o, sub, &g] {
        Run run(*sub, g);
        run.input("input", o->input);
        const auto dataset = run.timed("load", [&] { return load_dataset(o->input); });
        const CameraNlf nlf = run.timed(
            "estimate", [&] { return estimate_camera_nlf(dataset, o->nlf, parse_weighting(o->weighting), g.jobs); });
        record_fit(run, nlf.fit);
        StagedOutput out(o->output, false);
        write_cloud_csv(out.path(), nlf.cloud);
        run.finish({&out});
        print_fit(nlf.fit);
    });
}

void cmd_fit_nlf(CLI::App& app, const Globals& g) {
    auto* sub = app.add_subcommand("fit-nlf", "Affine fit of an NLF point cloud");
    struct Opts {
        std::string input, output, plot, weighting = "none";
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--input", o->input, "Point cloud CSV")->required();
    sub->add_option("--output", o->output, "Heteroscedastic Gaussian noise model JSON")->required();
    sub->add_option("--plot", o->plot, "Optional CSV of cloud and fitted curve");
    sub->add_option("--weighting", o->weighting, "Fit weighting: none | population | inverse-variance")
        ->capture_default_str();
    sub->callback([o, sub, &g] {
        Run run(*sub, g);
        run.input("input", o->input);
        const NlfPointCloud cloud = read_cloud_csv(o->input);
        const AffineNlf fit = fit_affine_nlf(cloud, parse_weighting(o->weighting));
        record_fit(run, fit);
        StagedOutput out(o->output, false);
        write_noise_model(out.path(), fit.as_params());
        std::optional<StagedOutput> plot;
        if (!o->plot.empty()) {
            plot.emplace(o->plot, false);
            write_fit_plot_csv(plot->path(), cloud, fit);
        }
        std::vector<StagedOutput*> outs{&out};
        if (plot) outs.push_back(&*plot);
        run.finish(outs);
        print_fit(fit);
    });
}

void cmd_make_synthetic(CLI::App& app, const Globals& g) {
    auto* sub = app.add_subcommand("make-synthetic", "sRGB sequences -> paired clean/noisy raw datasets");
    struct Opts {
        std::string input, output, model, calibrate_from, weighting = "none";
        bool clamp_unit = false;
        UnprocessFlags unprocess;
        SurrogateOptions surrogate;
        NlfOptions nlf;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--input", o->input, "Directory of 8-bit PPM sequences")->required();
    sub->add_option("--output", o->output, "Output directory (clean/, noisy/, noise_model.json)")->required();
    sub->add_option("--model", o->model, "Noise model JSON");
    sub->add_option("--calibrate-from", o->calibrate_from, "Raw dataset to estimate the noise model from");
    sub->add_option("--weighting", o->weighting, "NLF fit weighting: none | population | inverse-variance")
        ->capture_default_str();
    sub->add_flag("--clamp-unit", o->clamp_unit, "Clamp noisy values to [0,1]");
    o->unprocess.add(sub);
    o->surrogate.add(sub);
    add_nlf_options(sub, o->nlf);
    sub->callback([o, sub, &g] {
        if (o->model.empty() == o->calibrate_from.empty()) throw Error("give exactly one of --model, --calibrate-from");
        Run run(*sub, g);
        run.input("input", o->input);
        const CameraProfile profile = o->unprocess.load(run);
        const PercentilePair target = o->surrogate.resolve(run);
        NoiseSource source;
        if (!o->model.empty()) {
            run.input("model", o->model);
            source = read_noise_model(o->model);
        } else {
            run.input("calibrate_from", o->calibrate_from);
            source = load_dataset(o->calibrate_from);
        }
        const auto videos = run.timed("load", [&] { return load_srgb_dataset(o->input, o->unprocess.frame_rate); });
        MakeSyntheticOptions opts;
        opts.unprocess = o->unprocess.options;
        opts.synthesis.clamp_unit = o->clamp_unit;
        opts.nlf = o->nlf;
        opts.weighting = parse_weighting(o->weighting);
        opts.jobs = g.jobs;
        const MakeSyntheticResult r =
            run.timed("synthesize", [&] { return make_synthetic(videos, profile, target, source, g.seed, opts); });
        run.result("tonemap_scale", r.tonemap.scale);
        run.result("tonemap_offset", r.tonemap.offset);
        run.result("noise_model", nlohmann::json::parse(noise_model_json(r.model)).dump());
        if (r.calibration) record_fit(run, r.calibration->fit);
        StagedOutput out(o->output, true);
        run.timed("write", [&] {
            write_dataset(out.path() / "clean", r.clean);
            write_dataset(out.path() / "noisy", r.noisy);
            write_noise_model(out.path() / "noise_model.json", r.model);
        });
        run.finish({&out});
        std::cout << "wrote " << r.clean.size() << " sequence pairs to " << o->output << '\n';
    });
}

void cmd_flow(CLI::App& app, const Globals& g) {
    auto* sub = app.add_subcommand("flow", "TV-L1 optical flow between two raw frames");
    struct Opts {
        std::string target, reference, output, backward, mask;
        RawFileOptions raw;
        FlowOptions flow;
        OcclusionParams occlusion;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--target", o->target, "Raw PGM whose pixels are displaced")->required();
    sub->add_option("--reference", o->reference, "Raw PGM the flow points into")->required();
    sub->add_option("--output", o->output, "Forward flow (.flo)")->required();
    sub->add_option("--backward-output", o->backward, "Backward flow (.flo)");
    sub->add_option("--mask-output", o->mask, "Occlusion mask PGM (computes the backward flow)");
    sub->add_option("--alpha", o->occlusion.alpha, "Consistency tolerance (relative)")->capture_default_str();
    sub->add_option("--beta", o->occlusion.beta, "Consistency tolerance (absolute)")->capture_default_str();
    sub->add_option("--div-threshold", o->occlusion.div_threshold, "Divergence threshold")->capture_default_str();
    o->raw.add(sub);
    o->flow.add(sub);
    sub->callback([o, sub, &g] {
        Run run(*sub, g);
        run.input("target", o->target);
        run.input("reference", o->reference);
        const Plane t = flow_input(o->raw.read(o->target));
        const Plane r = flow_input(o->raw.read(o->reference));
        const FlowField fwd = run.timed("forward", [&] { return tvl1_flow(t, r, o->flow.params); });
        StagedOutput out(o->output, false);
        write_flo(out.path(), fwd);
        std::vector<StagedOutput*> outs{&out};
        std::optional<StagedOutput> bwd_out, mask_out;
        if (!o->backward.empty() || !o->mask.empty()) {
            const FlowField bwd = run.timed("backward", [&] { return tvl1_flow(r, t, o->flow.params); });
            if (!o->backward.empty()) {
                bwd_out.emplace(o->backward, false);
                write_flo(bwd_out->path(), bwd);
                outs.push_back(&*bwd_out);
            }
            if (!o->mask.empty()) {
                const OcclusionMask mask = occlusion_mask(fwd, bwd, o->occlusion);
                mask_out.emplace(o->mask, false);
                write_mask_pgm(mask_out->path(), mask);
                outs.push_back(&*mask_out);
                std::size_t trusted = 0;
                for (auto m : mask.values()) trusted += m;
                run.result("mask_coverage", static_cast<double>(trusted) / static_cast<double>(mask.size()));
            }
        }
        run.finish(outs);
        std::cout << "wrote " << o->output << '\n';
    });
}

void cmd_warp(CLI::App& app, const Globals& g) {
    auto* sub = app.add_subcommand("warp", "Warp a raw frame along a flow (demosaic, warp, remosaic)");
    struct Opts {
        std::string input, flow, output, demosaic = "ha", interp = "bicubic";
        RawFileOptions raw;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--input", o->input, "Raw PGM")->required();
    sub->add_option("--flow", o->flow, "Flow (.flo)")->required();
    sub->add_option("--output", o->output, "Warped raw PGM")->required();
    sub->add_option("--demosaic", o->demosaic, "ha | bilinear")->capture_default_str();
    sub->add_option("--interp", o->interp, "bicubic | bilinear")->capture_default_str();
    o->raw.add(sub);
    sub->callback([o, sub, &g] {
        Run run(*sub, g);
        run.input("input", o->input);
        run.input("flow", o->flow);
        const RawFrame raw = o->raw.read(o->input);
        const FlowField flow = read_flo(o->flow);
        const RawFrame warped = warp_raw(raw, flow, parse_demosaic_method(o->demosaic), parse_interpolation(o->interp));
        StagedOutput out(o->output, false);
        write_raw_pgm(out.path(), warped);
        run.finish({&out});
    });
}

void cmd_demosaic(CLI::App& app, const Globals& g) {
    auto* sub = app.add_subcommand("demosaic", "Raw PGM -> 16-bit RGB PPM");
    struct Opts {
        std::string input, output, method = "ha";
        bool display = false;
        double gamma = 2.2;
        RawFileOptions raw;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--input", o->input, "Raw PGM")->required();
    sub->add_option("--output", o->output, "RGB PPM")->required();
    sub->add_option("--method", o->method, "ha | bilinear")->capture_default_str();
    sub->add_flag("--display", o->display, "Apply display gamma instead of writing linear values");
    sub->add_option("--gamma", o->gamma, "Display gamma")->capture_default_str();
    o->raw.add(sub);
    sub->callback([o, sub, &g] {
        Run run(*sub, g);
        run.input("input", o->input);
        RgbFrame rgb = demosaic(o->raw.read(o->input), parse_demosaic_method(o->method));
        if (o->display) rgb = gamma_display(rgb, o->gamma);
        StagedOutput out(o->output, false);
        write_rgb_ppm(out.path(), rgb);
        run.finish({&out});
    });
}

void cmd_mosaic(CLI::App& app, const Globals& g) {
    auto* sub = app.add_subcommand("mosaic", "RGB PPM -> raw PGM");
    struct Opts {
        std::string input, output;
        RawFileOptions raw;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--input", o->input, "RGB PPM (linear)")->required();
    sub->add_option("--output", o->output, "Raw PGM")->required();
    o->raw.add(sub);
    sub->callback([o, sub, &g] {
        Run run(*sub, g);
        run.input("input", o->input);
        RawFrame raw = mosaic(read_rgb_ppm(o->input), parse_cfa(o->raw.cfa));
        raw.black_level = o->raw.black_level;
        raw.white_level = o->raw.white_level;
        StagedOutput out(o->output, false);
        write_raw_pgm(out.path(), raw);
        run.finish({&out});
    });
}

std::vector<std::pair<std::size_t, std::size_t>> frame_items(const std::vector<RawSequence>& seqs,
                                                             std::optional<std::size_t> frame) {
    std::vector<std::pair<std::size_t, std::size_t>> items;
    for (std::size_t s = 0; s < seqs.size(); ++s) {
        if (frame) {
            if (*frame >= seqs[s].frames.size()) throw Error("frame index out of range for " + seqs[s].id);
            items.emplace_back(s, *frame);
        } else {
            for (std::size_t f = 0; f < seqs[s].frames.size(); ++f) items.emplace_back(s, f);
        }
    }
    return items;
}

void cmd_mf2f_loss(CLI::App& app, const Globals& g) {
    auto* sub = app.add_subcommand("mf2f-loss", "Multi-frame-to-frame loss of a denoiser on a noisy dataset");
    struct Opts {
        std::string input, output, sequence;
        std::optional<std::size_t> frame;
        DenoiserOptions denoiser;
        FlowOptions flow;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--input", o->input, "Noisy raw dataset")->required();
    sub->add_option("--output", o->output, "Per-frame loss CSV")->required();
    sub->add_option("--sequence", o->sequence, "Only this sequence");
    sub->add_option("--frame", o->frame, "Only this frame index");
    o->denoiser.add(sub);
    o->flow.add(sub);
    sub->callback([o, sub, &g] {
        Run run(*sub, g);
        run.input("input", o->input);
        const auto seqs = select_sequences(load_dataset(o->input), o->sequence);
        const Denoiser den = o->denoiser.make(g.seed);
        Mf2fOptions opts;
        opts.flow = o->flow.params;
        Mf2fEvaluator evaluator(opts);
        const auto items = frame_items(seqs, o->frame);
        std::vector<Mf2fResult> results(items.size());
        run.timed("loss", [&] {
            parallel_for(items.size(), g.jobs, [&](std::size_t i) {
                results[i] = evaluator.evaluate(den, seqs[items[i].first], items[i].second);
            });
        });
        StagedOutput out(o->output, false);
        std::ofstream csv(out.path());
        csv << "sequence,frame,target,loss,mask_coverage\n";
        double sum = 0.0;
        for (std::size_t i = 0; i < items.size(); ++i) {
            const auto& r = results[i];
            csv << seqs[items[i].first].id << ',' << items[i].second << ',' << r.target_index << ','
                << Run::fmt(r.loss) << ',' << Run::fmt(r.mask_coverage) << '\n';
            sum += r.loss;
        }
        csv.close();
        const double mean = sum / static_cast<double>(items.size());
        run.result("mean_loss", mean);
        run.finish({&out});
        std::cout << "mean mf2f loss " << Run::fmt(mean) << " over " << items.size() << " frames\n";
    });
}

void cmd_bs_loss(CLI::App& app, const Globals& g) {
    auto* sub = app.add_subcommand("bs-loss", "Blind-spot (noisy-target MSE) loss of a denoiser");
    struct Opts {
        std::string input, output, sequence;
        std::optional<std::size_t> frame;
        DenoiserOptions denoiser;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--input", o->input, "Noisy raw dataset")->required();
    sub->add_option("--output", o->output, "Per-frame loss CSV")->required();
    sub->add_option("--sequence", o->sequence, "Only this sequence");
    sub->add_option("--frame", o->frame, "Only this frame index");
    o->denoiser.add(sub);
    sub->callback([o, sub, &g] {
        Run run(*sub, g);
        run.input("input", o->input);
        const auto seqs = select_sequences(load_dataset(o->input), o->sequence);
        const Denoiser den = o->denoiser.make(g.seed);
        const auto items = frame_items(seqs, o->frame);
        std::vector<double> losses(items.size());
        run.timed("loss", [&] {
            parallel_for(items.size(), g.jobs, [&](std::size_t i) {
                losses[i] = blindspot_loss(den, seqs[items[i].first], items[i].second);
            });
        });
        StagedOutput out(o->output, false);
        std::ofstream csv(out.path());
        csv << "sequence,frame,loss\n";
        double sum = 0.0;
        for (std::size_t i = 0; i < items.size(); ++i) {
            csv << seqs[items[i].first].id << ',' << items[i].second << ',' << Run::fmt(losses[i]) << '\n';
            sum += losses[i];
        }
        csv.close();
        const double mean = sum / static_cast<double>(items.size());
        run.result("mean_loss", mean);
        run.finish({&out});
        std::cout << "mean blind-spot loss " << Run::fmt(mean) << " over " << items.size() << " frames\n";
    });
}

void cmd_probe_rf(CLI::App& app, const Globals& g) {
    auto* sub = app.add_subcommand("probe-rf", "Receptive-field probe of the reference blind-spot network");
    struct Opts {
        std::string output;
        int width = 64, height = 64, x = 32, y = 32, radius = 4;
        double eps = 1e-3;
        BlindSpotNetConfig net;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--output", o->output, "JSON report")->required();
    sub->add_option("--width", o->width, "Probe frame width")->capture_default_str();
    sub->add_option("--height", o->height, "Probe frame height")->capture_default_str();
    sub->add_option("--x", o->x, "Output pixel column")->capture_default_str();
    sub->add_option("--y", o->y, "Output pixel row")->capture_default_str();
    sub->add_option("--radius", o->radius, "Half-width of the probed window")->capture_default_str();
    sub->add_option("--eps", o->eps, "Perturbation size")->capture_default_str();
    sub->add_option("--depth", o->net.depth, "Network depth")->capture_default_str();
    sub->add_option("--channels", o->net.channels, "Network channels")->capture_default_str();
    sub->add_flag("--remove-blindspot", o->net.remove_blindspot, "Drop the one-pixel shift");
    sub->callback([o, sub, &g] {
        Run run(*sub, g);
        RngStream rng = derive_stream(g.seed, "denoiser", "weights");
        const Denoiser net = reference_blindspot_net(o->net, rng);
        const FrameStack stack = random_probe_stack(o->width, o->height, g.seed);
        const RfProbeReport rep =
            run.timed("probe", [&] { return probe_receptive_field(net, stack, o->x, o->y, o->radius, o->eps); });
        nlohmann::json doc = {{"x", rep.x},
                              {"y", rep.y},
                              {"has_blind_spot", rep.has_blind_spot},
                              {"center_delta", rep.center_delta},
                              {"threshold", rep.threshold},
                              {"influential", nlohmann::json::array()}};
        for (const auto& [px, py] : rep.influential) doc["influential"].push_back({px, py});
        run.result("has_blind_spot", rep.has_blind_spot ? "true" : "false");
        StagedOutput out(o->output, false);
        std::ofstream(out.path()) << doc.dump(2) << '\n';
        run.finish({&out});
        std::cout << (rep.has_blind_spot ? "blind spot present" : "no blind spot") << ", centre delta "
                  << Run::fmt(rep.center_delta) << ", " << rep.influential.size() << " influential pixels\n";
    });
}

void cmd_eval(CLI::App& app, const Globals& g) {
    auto* sub = app.add_subcommand("eval", "PSNR/SSIM of a denoised dataset against a reference");
    struct Opts {
        std::string denoised, reference, output;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--denoised", o->denoised, "Denoised raw dataset")->required();
    sub->add_option("--reference", o->reference, "Reference raw dataset")->required();
    sub->add_option("--output", o->output, "CSV report")->required();
    sub->callback([o, sub, &g] {
        Run run(*sub, g);
        run.input("denoised", o->denoised);
        run.input("reference", o->reference);
        const auto den = load_dataset(o->denoised);
        const auto ref = load_dataset(o->reference);
        const EvalReport report = run.timed("eval", [&] { return evaluate(den, ref, g.jobs); });
        run.result("psnr", format_score(report.psnr));
        run.result("ssim", format_score(report.ssim));
        StagedOutput out(o->output, false);
        write_eval_csv(out.path(), report);
        run.finish({&out});
        std::cout << "psnr " << format_score(report.psnr) << " ssim " << format_score(report.ssim) << '\n';
    });
}

void cmd_subsample(CLI::App& app, const Globals& g) {
    auto* sub = app.add_subcommand("subsample", "Keep one frame out of every `stride`");
    struct Opts {
        std::string input, output;
        int stride = 3;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--input", o->input, "Raw dataset")->required();
    sub->add_option("--output", o->output, "Raw dataset directory")->required();
    sub->add_option("--stride", o->stride, "Temporal stride")->capture_default_str();
    sub->callback([o, sub, &g] {
        Run run(*sub, g);
        run.input("input", o->input);
        std::vector<RawSequence> out_seqs;
        for (const auto& s : load_dataset(o->input)) out_seqs.push_back(temporal_subsample(s, o->stride));
        StagedOutput out(o->output, true);
        write_dataset_to(out, out_seqs);
        run.finish({&out});
    });
}

void cmd_avg_gt(CLI::App& app, const Globals& g) {
    auto* sub = app.add_subcommand("avg-gt", "Ground truth of static sequences by temporal averaging");
    struct Opts {
        std::string input, output;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--input", o->input, "Raw dataset of static sequences")->required();
    sub->add_option("--output", o->output, "Constant-video dataset directory")->required();
    sub->callback([o, sub, &g] {
        Run run(*sub, g);
        run.input("input", o->input);
        std::vector<RawSequence> videos;
        std::vector<std::pair<std::string, RawFrame>> frames;
        for (const auto& s : load_dataset(o->input)) {
            AveragedGroundTruth gt = frame_average_gt(s);
            frames.emplace_back(s.id, gt.frame);
            videos.push_back(std::move(gt.video));
        }
        StagedOutput out(o->output, true);
        write_dataset_to(out, videos);
        fs::create_directories(out.path() / "ground_truth");
        for (const auto& [id, f] : frames) write_raw_pgm(out.path() / "ground_truth" / (id + ".pgm"), f);
        run.finish({&out});
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Raw video noise synthesis, calibration and self-supervised loss toolkit", "rawvid"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", rawvid::kToolVersion);

    Globals g;
    app.add_option("--seed", g.seed, "Global random seed")->capture_default_str();
    app.add_option("--jobs", g.jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--manifest", g.manifest, "Manifest path (default: next to or inside the output)");
    app.add_option("--config", g.config, "key = value configuration file; command-line flags take precedence");

    cmd_unprocess(app, g);
    cmd_add_noise(app, g);
    cmd_calibrate_flatfield(app, g);
    cmd_estimate_nlf(app, g);
    cmd_fit_nlf(app, g);
    cmd_make_synthetic(app, g);
    cmd_flow(app, g);
    cmd_warp(app, g);
    cmd_demosaic(app, g);
    cmd_mosaic(app, g);
    cmd_mf2f_loss(app, g);
    cmd_bs_loss(app, g);
    cmd_probe_rf(app, g);
    cmd_eval(app, g);
    cmd_subsample(app, g);
    cmd_avg_gt(app, g);
    for (CLI::App* sub : app.get_subcommands([](CLI::App*) { return true; })) sub->fallthrough();

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        args = rawvid::cli::expand_config(args, app);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
