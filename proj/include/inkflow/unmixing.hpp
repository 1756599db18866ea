#ifndef INKFLOW_UNMIXING_HPP
#define INKFLOW_UNMIXING_HPP

// Receiver-side ink intensity estimation: absorption matrix calibration
// from isolated pulses and least-squares unmixing of 8-channel absorbance.

#include <array>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "inkflow/optics.hpp"

namespace inkflow {

/// Time series of (cyan, magenta, yellow) intensities. Estimates are not
/// clamped, so values can be slightly negative.
struct IntensityTrace {
    std::vector<double> times;
    std::vector<Vec3> values;

    std::size_t size() const noexcept { return times.size(); }
    bool empty() const noexcept { return times.empty(); }

    std::vector<double> channel(Ink ink) const {
        std::vector<double> out(values.size());
        for (std::size_t k = 0; k < values.size(); ++k) out[k] = values[k][index(ink)];
        return out;
    }
};

}  // namespace inkflow

namespace inkflow::unmix {

using optics::AbsorptionModel;
using optics::SpectralFrame;

// Above this the normal equations are treated as singular.
inline constexpr double kMaxCondition = 1e12;

struct Estimator {
    Mat38 pinv = Mat38::Zero();
    AbsorptionModel source_model;
    double condition = 0.0;  // sigma_max / sigma_min of B
};

/// One sequence of frames per calibration pulse window, per ink. Each pulse
/// has peak intensity 1 by convention.
struct CalibrationPulseSet {
    std::array<std::vector<std::vector<SpectralFrame>>, kInks> pulses;

    std::size_t n_p(Ink ink) const noexcept { return pulses[index(ink)].size(); }
};

inline double condition_number(const Mat83& b) {
    Eigen::JacobiSVD<Mat83> svd(b);
    const auto& s = svd.singularValues();
    if (s[kInks - 1] <= 0.0) return std::numeric_limits<double>::infinity();
    return s[0] / s[kInks - 1];
}

// B+ = (B^T B)^-1 B^T, computed through the SVD as V S^-1 U^T.
inline Estimator build_estimator(const AbsorptionModel& model) {
    model.validate();
    Eigen::JacobiSVD<Mat83> svd(model.b, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    const double cond = s[kInks - 1] > 0.0 ? s[0] / s[kInks - 1]
                                          : std::numeric_limits<double>::infinity();
    if (!(cond <= kMaxCondition))
        throw DegenerateMatrixError(
            "degenerate absorption matrix (condition number " + std::to_string(cond) +
                "): inks are spectrally indistinguishable",
            cond);
    Estimator est;
    const Eigen::Matrix<double, kChannels, kInks> u = svd.matrixU().leftCols<kInks>();
    est.pinv = svd.matrixV() * s.cwiseInverse().asDiagonal() * u.transpose();
    est.source_model = model;
    est.condition = cond;
    return est;
}

inline Vec3 estimate(const Vec8& a, const Estimator& est) { return est.pinv * a; }

inline IntensityTrace estimate_trace(const std::vector<SpectralFrame>& frames,
                                     const Estimator& est) {
    IntensityTrace out;
    out.times.reserve(frames.size());
    out.values.reserve(frames.size());
    for (std::size_t k = 0; k < frames.size(); ++k) {
        Vec8 a;
        try {
            a = optics::absorbance(frames[k], est.source_model.i0);
        } catch (const DomainError& e) {
            throw DomainError("frame " + std::to_string(k) + ": " + e.what());
        }
        out.times.push_back(frames[k].t);
        out.values.push_back(estimate(a, est));
    }
    return out;
}

/// Mean intensity per channel over ink-free frames.
inline Vec8 reference_intensity(const std::vector<SpectralFrame>& frames) {
    if (frames.empty()) throw CalibrationError("reference window contains no frames");
    Vec8 sum = Vec8::Zero();
    for (const auto& f : frames) sum += f.intensities;
    return sum / static_cast<double>(frames.size());
}

/// Column b_i is the mean over pulses of the per-channel maximum absorbance
/// inside each pulse window (clamped to >= 0).
inline AbsorptionModel calibrate(const CalibrationPulseSet& pulses, const Vec8& i0) {
    for (int j = 0; j < kChannels; ++j)
        if (!(i0[j] > 0.0)) throw CalibrationError("reference intensities must be > 0");
    AbsorptionModel model;
    model.i0 = i0;
    for (int i = 0; i < kInks; ++i) {
        const auto& windows = pulses.pulses[i];
        if (windows.empty())
            throw CalibrationError(std::string("no calibration pulses for ") + kInkNames[i]);
        Vec8 sum = Vec8::Zero();
        for (std::size_t k = 0; k < windows.size(); ++k) {
            if (windows[k].empty())
                throw CalibrationError(std::string("empty pulse window ") + std::to_string(k) +
                                       " for " + kInkNames[i]);
            Vec8 peak = Vec8::Constant(-std::numeric_limits<double>::infinity());
            for (const auto& f : windows[k]) peak = peak.cwiseMax(optics::absorbance(f, i0));
            sum += peak;
        }
        // a noisy baseline can dip below zero in non-absorbing channels
        model.b.col(i) = (sum / static_cast<double>(windows.size())).cwiseMax(0.0);
    }
    return model;
}

/// Display-only non-negativity clamp.
inline IntensityTrace clamp_nonnegative(IntensityTrace trace) {
    for (auto& v : trace.values) v = v.cwiseMax(0.0);
    return trace;
}

}  // namespace inkflow::unmix

#endif
