#include "rawvid/noise.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rawvid/parallel.hpp"

namespace rawvid {

void validate(const HeteroGaussianParams& p) {
    if (!std::isfinite(p.a) || !std::isfinite(p.b) || p.a < 0.0 || p.b < 0.0) {
        throw Error("hetero_gaussian: a and b must be finite and non-negative");
    }
}

void validate(const PoissonTukeyParams& p) {
    if (!(p.k_gain > 0.0) || !std::isfinite(p.k_gain)) throw Error("poisson_tukey: k_gain must be positive");
    if (!(p.tl_scale > 0.0) || !std::isfinite(p.tl_scale)) throw Error("poisson_tukey: tl_scale must be positive");
    if (!std::isfinite(p.tl_lambda)) throw Error("poisson_tukey: tl_lambda must be finite");
    if (!(p.sigma_row >= 0.0)) throw Error("poisson_tukey: sigma_row must be non-negative");
    if (!(p.quant_step >= 0.0)) throw Error("poisson_tukey: quant_step must be non-negative");
}

void validate(const NoiseModel& model) {
    std::visit([](const auto& p) { validate(p); }, model);
}

namespace {

nlohmann::json to_json(const NoiseModel& model) {
    nlohmann::json j;
    if (const auto* h = std::get_if<HeteroGaussianParams>(&model)) {
        j["type"] = "hetero_gaussian";
        j["a"] = h->a;
        j["b"] = h->b;
    } else {
        const auto& p = std::get<PoissonTukeyParams>(model);
        j["type"] = "poisson_tukey";
        j["k_gain"] = p.k_gain;
        j["tl_lambda"] = p.tl_lambda;
        j["tl_scale"] = p.tl_scale;
        j["sigma_row"] = p.sigma_row;
        j["quant_step"] = p.quant_step;
    }
    return j;
}

NoiseModel from_json(const nlohmann::json& j) {
    const std::string type = j.at("type").get<std::string>();
    NoiseModel model;
    if (type == "hetero_gaussian") {
        model = HeteroGaussianParams{j.at("a").get<double>(), j.at("b").get<double>()};
    } else if (type == "poisson_tukey") {
        PoissonTukeyParams p;
        p.k_gain = j.at("k_gain").get<double>();
        p.tl_lambda = j.at("tl_lambda").get<double>();
        p.tl_scale = j.at("tl_scale").get<double>();
        p.sigma_row = j.value("sigma_row", 0.0);
        p.quant_step = j.value("quant_step", 0.0);
        model = p;
    } else {
        throw Error("unknown noise model type '" + type + "'");
    }
    validate(model);
    return model;
}

}  // namespace

std::string noise_model_json(const NoiseModel& model) { return to_json(model).dump(2); }

NoiseModel parse_noise_model_json(const std::string& text) {
    try {
        return from_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("noise model: ") + e.what());
    }
}

NoiseModel read_noise_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open noise model " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_noise_model_json(buffer.str());
}

void write_noise_model(const std::filesystem::path& path, const NoiseModel& model) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << noise_model_json(model) << '\n';
}

Plane sample_hetero_gaussian(const Plane& clean, const HeteroGaussianParams& params, RngStream& rng) {
    validate(params);
    Plane out(clean.width(), clean.height());
    auto src = clean.values();
    auto dst = out.values();
    if (params.a == 0.0 && params.b == 0.0) {
        std::copy(src.begin(), src.end(), dst.begin());
        return out;
    }
    for (std::size_t i = 0; i < src.size(); ++i) {
        const double var = params.a * src[i] + params.b;
        if (var < 0.0) throw Error("hetero_gaussian: negative variance a*u+b at a pixel");
        dst[i] = src[i] + rng.normal() * std::sqrt(var);
    }
    return out;
}

double tukey_lambda_quantile(double p, double lambda) {
    if (std::abs(lambda) < 1e-6) return std::log(p / (1.0 - p));
    return (std::pow(p, lambda) - std::pow(1.0 - p, lambda)) / lambda;
}

double sample_tukey_lambda(double lambda, double scale, RngStream& rng) {
    return scale * tukey_lambda_quantile(rng.uniform_open(), lambda);
}

std::vector<double> sample_tukey_lambda(double lambda, double scale, std::size_t n, RngStream& rng) {
    if (!(scale > 0.0)) throw Error("tukey_lambda: scale must be positive");
    std::vector<double> out(n);
    for (double& v : out) v = sample_tukey_lambda(lambda, scale, rng);
    return out;
}

std::int64_t sample_poisson(double rate, RngStream& rng) {
    if (!(rate >= 0.0) || !std::isfinite(rate)) throw Error("poisson: rate must be finite and non-negative");
    if (rate == 0.0) return 0;
    if (rate < kPoissonInversionLimit) {
        // sequential inversion of the CDF
        const double u = rng.uniform();
        double p = std::exp(-rate);
        double cdf = p;
        std::int64_t k = 0;
        while (u >= cdf) {
            ++k;
            p *= rate / static_cast<double>(k);
            cdf += p;
            if (p == 0.0 && cdf <= u) break;  // u beyond representable tail mass
        }
        return k;
    }
    const double v = std::floor(rate + std::sqrt(rate) * rng.normal() + 0.5);
    return static_cast<std::int64_t>(std::max(v, 0.0));
}

Grid<std::int64_t> sample_poisson(const Plane& rates, RngStream& rng) {
    Grid<std::int64_t> out(rates.width(), rates.height());
    auto src = rates.values();
    auto dst = out.values();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = sample_poisson(src[i], rng);
    return out;
}

Plane sample_poisson_tukey(const Plane& clean, const PoissonTukeyParams& params, RngStream& rng) {
    validate(params);
    Plane out(clean.width(), clean.height());
    for (int y = 0; y < clean.height(); ++y) {
        const double row_offset = params.sigma_row > 0.0 ? params.sigma_row * rng.normal() : 0.0;
        auto src = clean.row(y);
        auto dst = out.row(y);
        for (int x = 0; x < clean.width(); ++x) {
            if (src[x] < 0.0) throw Error("poisson_tukey: clean intensity must be non-negative");
            const double shot = params.k_gain * static_cast<double>(sample_poisson(src[x] / params.k_gain, rng));
            const double read = sample_tukey_lambda(params.tl_lambda, params.tl_scale, rng);
            double v = shot + read + row_offset;
            if (params.quant_step > 0.0) v = std::nearbyint(v / params.quant_step) * params.quant_step;
            dst[x] = v;
        }
    }
    return out;
}

Plane apply_noise(const Plane& clean, const NoiseModel& model, RngStream& rng) {
    return std::visit(
        [&](const auto& p) -> Plane {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, HeteroGaussianParams>) {
                return sample_hetero_gaussian(clean, p, rng);
            } else {
                return sample_poisson_tukey(clean, p, rng);
            }
        },
        model);
}

std::vector<RawSequence> synthesize_noisy_dataset(const std::vector<RawSequence>& clean, const NoiseModel& model,
                                                  std::uint64_t seed, const SynthesisOptions& options) {
    validate(model);
    // flatten (sequence, frame) so every frame is one work item
    std::vector<std::pair<std::size_t, std::size_t>> items;
    std::vector<RawSequence> noisy(clean.size());
    for (std::size_t s = 0; s < clean.size(); ++s) {
        noisy[s].id = clean[s].id;
        noisy[s].frame_rate = clean[s].frame_rate;
        noisy[s].frames.resize(clean[s].frames.size());
        for (std::size_t f = 0; f < clean[s].frames.size(); ++f) items.emplace_back(s, f);
    }
    parallel_for(items.size(), options.jobs, [&](std::size_t i) {
        const auto [s, f] = items[i];
        const RawFrame& src = clean[s].frames[f];
        RngStream rng = derive_stream(seed, clean[s].id, "noise", f);
        RawFrame out = src;
        out.data = apply_noise(src.data, model, rng);
        if (options.clamp_unit) {
            for (double& v : out.data.values()) v = std::clamp(v, 0.0, 1.0);
        }
        noisy[s].frames[f] = std::move(out);
    });
    return noisy;
}

}  // namespace rawvid
