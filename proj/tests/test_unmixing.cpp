#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "inkflow/unmixing.hpp"

using namespace inkflow;
using namespace inkflow::unmix;
using optics::AbsorptionModel;
using optics::SpectralFrame;

namespace {

AbsorptionModel random_model(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0), i0(500.0, 5000.0);
    AbsorptionModel m;
    for (int j = 0; j < kChannels; ++j) m.i0[j] = i0(rng);
    for (int j = 0; j < kChannels; ++j)
        for (int i = 0; i < kInks; ++i) m.b(j, i) = u(rng);
    return m;
}

// Normal-equations solution, independent of the SVD route.
Vec3 normal_equations(const Mat83& b, const Vec8& a) {
    const Eigen::Matrix3d btb = b.transpose() * b;
    return btb.ldlt().solve(b.transpose() * a);
}

}  // namespace

TEST(Estimator, PseudoinverseIsLeftInverse) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const auto est = build_estimator(random_model(rng));
        EXPECT_LT((est.pinv * est.source_model.b - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(Estimator, MatchesNormalEquationsOnNoisyAbsorbance) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 0.05);
    for (int trial = 0; trial < 100; ++trial) {
        const auto m = random_model(rng);
        const auto est = build_estimator(m);
        Vec8 a;
        for (int j = 0; j < kChannels; ++j) a[j] = n(rng);
        const Vec3 c = estimate(a, est);
        EXPECT_LT((c - normal_equations(m.b, a)).cwiseAbs().maxCoeff(), 1e-9);
        // residual is orthogonal to the column space of B
        EXPECT_LT((m.b.transpose() * (a - m.b * c)).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(Estimator, ExactRecoveryThroughForwardModel) {
    const auto m = optics::default_absorption_model();
    const auto est = build_estimator(m);
    const Vec3 c(0.3, 0.9, 0.05);
    const Vec8 i = optics::intensity_from_concentration(c, m);
    EXPECT_LT((estimate(optics::absorbance({0.0, i}, m.i0), est) - c).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Estimator, DegenerateSpectraRejected) {
    auto m = optics::default_absorption_model();
    m.b.col(2) = m.b.col(1);
    try {
        build_estimator(m);
        FAIL();
    } catch (const DegenerateMatrixError& e) {
        EXPECT_GT(e.condition(), kMaxCondition);
    }
    m.b.col(2).setZero();
    EXPECT_THROW(build_estimator(m), DegenerateMatrixError);
}

TEST(Estimator, ConditionNumberOfOrthonormalColumnsIsOne) {
    Mat83 b = Mat83::Zero();
    b(0, 0) = b(3, 1) = b(7, 2) = 1.0;
    EXPECT_NEAR(condition_number(b), 1.0, 1e-15);
}

TEST(EstimateTrace, PreservesTimesAndReportsFrame) {
    const auto m = optics::default_absorption_model();
    const auto est = build_estimator(m);
    std::vector<SpectralFrame> frames = {{0.0, m.i0}, {0.5, m.i0}, {1.0, m.i0}};
    const auto tr = estimate_trace(frames, est);
    EXPECT_EQ(tr.times, (std::vector<double>{0.0, 0.5, 1.0}));
    for (const auto& v : tr.values) EXPECT_LT(v.cwiseAbs().maxCoeff(), 1e-15);
    frames[1].intensities[2] = 0.0;
    try {
        estimate_trace(frames, est);
        FAIL();
    } catch (const DomainError& e) {
        EXPECT_NE(std::string(e.what()).find("frame 1"), std::string::npos);
    }
}

TEST(EstimateTrace, ClampIsDisplayOnly) {
    IntensityTrace t;
    t.times = {0.0};
    t.values = {Vec3(-0.1, 0.2, -0.0)};
    const auto c = clamp_nonnegative(t);
    EXPECT_EQ(c.values[0], Vec3(0.0, 0.2, 0.0));
    EXPECT_EQ(t.values[0][0], -0.1);
}

namespace {

// Pulse whose intensity sampled maximum is exactly 1.
std::vector<SpectralFrame> pulse_frames(const AbsorptionModel& m, int ink, double noise, std::mt19937_64& rng) {
    std::vector<SpectralFrame> out;
    std::normal_distribution<double> n(0.0, 1.0);
    const std::vector<double> shape = {0.0, 0.2, 0.6, 1.0, 0.7, 0.3, 0.1};
    for (std::size_t k = 0; k < shape.size(); ++k) {
        Vec3 c = Vec3::Zero();
        c[ink] = shape[k];
        SpectralFrame f{static_cast<double>(k), optics::intensity_from_concentration(c, m)};
        for (int j = 0; j < kChannels; ++j) f.intensities[j] *= 1.0 + noise * n(rng);
        out.push_back(f);
    }
    return out;
}

}  // namespace

TEST(Calibrate, NoiseFreeRecoveryWithThirtyPulses) {
    std::mt19937_64 rng(11);
    const auto m = optics::default_absorption_model();
    CalibrationPulseSet set;
    for (int i = 0; i < kInks; ++i)
        for (int p = 0; p < 30; ++p) set.pulses[i].push_back(pulse_frames(m, i, 0.0, rng));
    const auto got = calibrate(set, m.i0);
    EXPECT_LT((got.b - m.b).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_EQ(set.n_p(Ink::cyan), 30u);
}

TEST(Calibrate, SinglePulseIsValid) {
    std::mt19937_64 rng(1);
    const auto m = optics::default_absorption_model();
    CalibrationPulseSet set;
    for (int i = 0; i < kInks; ++i) set.pulses[i].push_back(pulse_frames(m, i, 0.0, rng));
    EXPECT_LT((calibrate(set, m.i0).b - m.b).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Calibrate, Errors) {
    const auto m = optics::default_absorption_model();
    CalibrationPulseSet set;
    EXPECT_THROW(calibrate(set, m.i0), CalibrationError);
    std::mt19937_64 rng(1);
    for (int i = 0; i < kInks; ++i) set.pulses[i].push_back(pulse_frames(m, i, 0.0, rng));
    set.pulses[1].push_back({});
    EXPECT_THROW(calibrate(set, m.i0), CalibrationError);
    Vec8 bad = m.i0;
    bad[0] = 0.0;
    EXPECT_THROW(calibrate(set, bad), CalibrationError);
    EXPECT_THROW(reference_intensity({}), CalibrationError);
}

TEST(Calibrate, NoisyColumnsStayNonNegative) {
    std::mt19937_64 rng(2);
    const auto m = optics::default_absorption_model();
    CalibrationPulseSet set;
    for (int i = 0; i < kInks; ++i)
        for (int p = 0; p < 30; ++p) set.pulses[i].push_back(pulse_frames(m, i, 0.01, rng));
    const auto got = calibrate(set, m.i0);
    EXPECT_GE(got.b.minCoeff(), 0.0);
    EXPECT_LT((got.b - m.b).cwiseAbs().maxCoeff(), 0.05);
}
