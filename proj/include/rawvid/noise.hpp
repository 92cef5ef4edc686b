#pragma once

#include <cstdint>
#include <filesystem>
#include <variant>
#include <vector>

#include "rawvid/image.hpp"
#include "rawvid/random.hpp"

namespace rawvid {

/// Zero-mean Gaussian with variance a*u + b.
struct HeteroGaussianParams {
    double a = 0.0;
    double b = 0.0;
};

/// Low-light model: scaled Poisson shot noise, Tukey-lambda read noise,
/// per-row Gaussian banding and an optional uniform quantizer.
struct PoissonTukeyParams {
    double k_gain = 1.0;
    double tl_lambda = 0.0;
    double tl_scale = 1.0;
    double sigma_row = 0.0;
    double quant_step = 0.0;
};

using NoiseModel = std::variant<HeteroGaussianParams, PoissonTukeyParams>;

void validate(const HeteroGaussianParams& p);
void validate(const PoissonTukeyParams& p);
void validate(const NoiseModel& model);

NoiseModel read_noise_model(const std::filesystem::path& path);
void write_noise_model(const std::filesystem::path& path, const NoiseModel& model);
std::string noise_model_json(const NoiseModel& model);
NoiseModel parse_noise_model_json(const std::string& text);

/// v = u + z * sqrt(a u + b). Throws if a u + b < 0 anywhere.
Plane sample_hetero_gaussian(const Plane& clean, const HeteroGaussianParams& params, RngStream& rng);

/// Quantile function (p^l - (1-p)^l) / l, with the logistic limit ln(p/(1-p)) for |l| < 1e-6.
double tukey_lambda_quantile(double p, double lambda);
double sample_tukey_lambda(double lambda, double scale, RngStream& rng);
std::vector<double> sample_tukey_lambda(double lambda, double scale, std::size_t n, RngStream& rng);

/// Rates below this use exact inversion; above, a continuity-corrected Gaussian.
inline constexpr double kPoissonInversionLimit = 30.0;

std::int64_t sample_poisson(double rate, RngStream& rng);
Grid<std::int64_t> sample_poisson(const Plane& rates, RngStream& rng);

/// v = k * Poisson(u / k) + TL(lambda, scale) + row offset, then round(v / q) * q when q > 0.
/// Row offsets are one N(0, sigma_row) draw per image row.
Plane sample_poisson_tukey(const Plane& clean, const PoissonTukeyParams& params, RngStream& rng);

/// Applies the active model of `model`.
Plane apply_noise(const Plane& clean, const NoiseModel& model, RngStream& rng);

struct SynthesisOptions {
    bool clamp_unit = false;  // clamp noisy values to [0,1]; off by default
    int jobs = 1;
};

/// Noisy copy of each sequence. Frame f of sequence s uses derive_stream(seed, s.id, "noise", f).
std::vector<RawSequence> synthesize_noisy_dataset(const std::vector<RawSequence>& clean, const NoiseModel& model,
                                                  std::uint64_t seed, const SynthesisOptions& options = {});

}  // namespace rawvid
