#ifndef INKFLOW_OPTICS_HPP
#define INKFLOW_OPTICS_HPP

// Forward optical model: Beer-Lambert attenuation of the eight spectral
// sensor channels by the three inks, and a noisy sampled sensor.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "inkflow/error.hpp"

namespace inkflow {

inline constexpr int kChannels = 8;
inline constexpr int kInks = 3;

using Vec8 = Eigen::Matrix<double, kChannels, 1>;
using Vec3 = Eigen::Matrix<double, kInks, 1>;
using Mat83 = Eigen::Matrix<double, kChannels, kInks>;
using Mat38 = Eigen::Matrix<double, kInks, kChannels>;

inline constexpr std::array<int, kChannels> kWavelengthsNm = {415, 445, 480, 515,
                                                              555, 590, 630, 680};

enum class Ink { cyan = 0, magenta = 1, yellow = 2 };
inline constexpr std::array<const char*, kInks> kInkNames = {"cyan", "magenta", "yellow"};

inline int index(Ink i) noexcept { return static_cast<int>(i); }

inline Ink parse_ink(const std::string& name) {
    for (int i = 0; i < kInks; ++i)
        if (name == kInkNames[i] || (name.size() == 1 && name[0] == kInkNames[i][0]))
            return static_cast<Ink>(i);
    throw ConfigError("ink", "unknown ink '" + name + "' (expected cyan, magenta or yellow)");
}

}  // namespace inkflow

namespace inkflow::optics {

struct SpectralFrame {
    double t = 0.0;
    Vec8 intensities = Vec8::Zero();
};

/// Calibrated optical system: reference intensities and the 8x3 absorption
/// matrix whose columns are ordered (cyan, magenta, yellow).
struct AbsorptionModel {
    Vec8 i0 = Vec8::Ones();
    Mat83 b = Mat83::Zero();

    void validate() const {
        for (int j = 0; j < kChannels; ++j)
            if (!(i0[j] > 0.0))
                throw DomainError("reference intensity of channel " + std::to_string(j) +
                                  " must be > 0");
        for (int j = 0; j < kChannels; ++j)
            for (int i = 0; i < kInks; ++i)
                if (!(b(j, i) >= 0.0) || !std::isfinite(b(j, i)))
                    throw DomainError("absorption coefficients must be finite and >= 0");
    }
};

struct NoiseConfig {
    double sigma_rel = 0.0;  // fraction of the noiseless reading
    double sigma_abs = 0.0;  // counts
    std::uint64_t seed = 0;
    double floor = 1.0;      // readings are clamped to >= floor (> 0)
    bool quantize = false;   // round to 16-bit integer counts

    void validate() const {
        if (!(sigma_rel >= 0.0) || !(sigma_abs >= 0.0))
            throw DomainError("noise standard deviations must be >= 0");
        detail::require_positive(floor, "noise floor");
    }
};

/// a^j = log10(i0^j / I^j)
inline Vec8 absorbance(const SpectralFrame& frame, const Vec8& i0) {
    Vec8 a;
    for (int j = 0; j < kChannels; ++j) {
        if (!(frame.intensities[j] > 0.0)) throw DomainError("non-positive intensity");
        if (!(i0[j] > 0.0)) throw DomainError("non-positive reference intensity");
        a[j] = std::log10(i0[j] / frame.intensities[j]);
    }
    return a;
}

/// I^j = i0^j * 10^-(B c)^j. Negative intensities are rejected unless
/// `allow_negative` is set (diagnostic use only).
inline Vec8 intensity_from_concentration(const Vec3& c, const AbsorptionModel& model,
                                         bool allow_negative = false) {
    if (!allow_negative)
        for (int i = 0; i < kInks; ++i)
            if (!(c[i] >= 0.0)) throw DomainError("ink intensities must be >= 0");
    const Vec8 a = model.b * c;
    Vec8 out;
    for (int j = 0; j < kChannels; ++j) out[j] = model.i0[j] * std::pow(10.0, -a[j]);
    return out;
}

/// Number of frames for k = 0 .. floor(duration * rate).
inline std::size_t frame_count(double rate, double duration) {
    detail::require_positive(rate, "sample rate");
    detail::require_positive(duration, "duration");
    // guard against 10 * 19 landing on 189.99999...
    return static_cast<std::size_t>(std::floor(duration * rate * (1.0 + 1e-12))) + 1;
}

inline double sample_time(std::size_t k, double rate) {
    return static_cast<double>(k) / rate;
}

/// Samples `signal(t) -> Vec3` at t_k = k / rate through the optical model.
/// Each reading gets independent Gaussian noise with standard deviation
/// sqrt((sigma_rel I)^2 + sigma_abs^2), is optionally quantized, then
/// clamped to >= noise.floor. Owns its generator; bit-identical for equal seeds.
template <typename Signal>
std::vector<SpectralFrame> sample_sensor(Signal&& signal, const AbsorptionModel& model,
                                         double rate, double duration,
                                         const NoiseConfig& noise) {
    model.validate();
    noise.validate();
    const std::size_t n = frame_count(rate, duration);
    std::mt19937_64 rng(noise.seed);
    std::normal_distribution<double> standard(0.0, 1.0);
    std::vector<SpectralFrame> frames(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = sample_time(k, rate);
        const Vec3 c = signal(t);
        const Vec8 clean = intensity_from_concentration(c, model, true);
        SpectralFrame& f = frames[k];
        f.t = t;
        for (int j = 0; j < kChannels; ++j) {
            const double rel = noise.sigma_rel * clean[j];
            const double sd = std::sqrt(rel * rel + noise.sigma_abs * noise.sigma_abs);
            double v = clean[j] + sd * standard(rng);
            if (noise.quantize) v = std::clamp(std::round(v), 0.0, 65535.0);
            f.intensities[j] = std::max(v, noise.floor);
        }
    }
    return frames;
}

/// Self-contained default model. Each ink absorbs its complementary band:
/// cyan peaks at 630 nm, magenta at 555 nm, yellow at 445 nm, with a
/// Gaussian roll-off (50 nm std) and unit peak absorbance at c = 1.
inline AbsorptionModel default_absorption_model() {
    AbsorptionModel m;
    m.i0 << 1200.0, 2100.0, 2600.0, 3400.0, 4200.0, 3900.0, 3000.0, 1800.0;
    constexpr std::array<double, kInks> centers = {630.0, 555.0, 445.0};
    constexpr double width = 50.0;
    for (int i = 0; i < kInks; ++i)
        for (int j = 0; j < kChannels; ++j) {
            const double x = (kWavelengthsNm[j] - centers[i]) / width;
            m.b(j, i) = std::exp(-0.5 * x * x);
        }
    return m;
}

}  // namespace inkflow::optics

#endif
