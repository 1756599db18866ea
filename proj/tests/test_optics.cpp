#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "inkflow/optics.hpp"

using namespace inkflow;
using namespace inkflow::optics;

TEST(Optics, AbsorbanceOfReferenceIsZero) {
    const auto m = default_absorption_model();
    SpectralFrame f{0.0, m.i0};
    EXPECT_TRUE(absorbance(f, m.i0).isZero(0.0));
}

TEST(Optics, AbsorbanceOneDecade) {
    Vec8 i0 = Vec8::Constant(1000.0);
    SpectralFrame f{0.0, Vec8::Constant(100.0)};
    const auto a = absorbance(f, i0);
    for (int j = 0; j < kChannels; ++j) EXPECT_DOUBLE_EQ(a[j], 1.0);
}

TEST(Optics, NonPositiveIntensityRejected) {
    Vec8 i0 = Vec8::Constant(1000.0);
    SpectralFrame f{0.0, Vec8::Constant(100.0)};
    f.intensities[3] = 0.0;
    EXPECT_THROW(absorbance(f, i0), DomainError);
    f.intensities[3] = -1.0;
    EXPECT_THROW(absorbance(f, i0), DomainError);
}

TEST(Optics, ForwardModelInvertsAbsorbance) {
    const auto m = default_absorption_model();
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const Vec3 c(u(rng), u(rng), u(rng));
        const Vec8 expected = m.b * c;
        const Vec8 a = absorbance({0.0, intensity_from_concentration(c, m)}, m.i0);
        EXPECT_LT((a - expected).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Optics, ForwardModelRejectsNegativeIntensity) {
    const auto m = default_absorption_model();
    EXPECT_THROW(intensity_from_concentration(Vec3(-0.1, 0, 0), m), DomainError);
    EXPECT_NO_THROW(intensity_from_concentration(Vec3(-0.1, 0, 0), m, true));
}

TEST(Optics, DefaultModelShape) {
    const auto m = default_absorption_model();
    EXPECT_NO_THROW(m.validate());
    // complementary absorption bands
    EXPECT_EQ(m.b(6, 0), m.b.col(0).maxCoeff());  // cyan at 630 nm
    EXPECT_EQ(m.b(4, 1), m.b.col(1).maxCoeff());  // magenta at 555 nm
    EXPECT_EQ(m.b(1, 2), m.b.col(2).maxCoeff());  // yellow at 445 nm
    EXPECT_NEAR(m.b.maxCoeff(), 1.0, 1e-12);
}

TEST(Optics, InkNames) {
    EXPECT_EQ(parse_ink("cyan"), Ink::cyan);
    EXPECT_EQ(parse_ink("magenta"), Ink::magenta);
    EXPECT_EQ(parse_ink("y"), Ink::yellow);
    EXPECT_THROW(parse_ink("black"), ConfigError);
}

TEST(SampleSensor, FrameGridIncludesEndpoint) {
    EXPECT_EQ(frame_count(19.0, 10.0), 191u);
    EXPECT_EQ(frame_count(10.0, 1.0), 11u);
    EXPECT_EQ(frame_count(19.0, 0.01), 1u);
    EXPECT_THROW(frame_count(0.0, 1.0), DomainError);
}

TEST(SampleSensor, NoiselessEqualsForwardModel) {
    const auto m = default_absorption_model();
    auto signal = [](double t) { return Vec3(0.5 * t, 0.2, 0.0); };
    const auto frames = sample_sensor(signal, m, 19.0, 1.0, NoiseConfig{});
    ASSERT_EQ(frames.size(), 20u);
    for (std::size_t k = 0; k < frames.size(); ++k) {
        EXPECT_DOUBLE_EQ(frames[k].t, k / 19.0);
        const Vec8 expected = intensity_from_concentration(signal(frames[k].t), m);
        EXPECT_EQ(frames[k].intensities, expected);
    }
}

TEST(SampleSensor, SeedDeterminismAndNoiseLevel) {
    const auto m = default_absorption_model();
    auto signal = [](double) { return Vec3::Zero().eval(); };
    NoiseConfig noise;
    noise.sigma_rel = 0.01;
    noise.sigma_abs = 2.0;
    noise.seed = 42;
    const auto a = sample_sensor(signal, m, 100.0, 50.0, noise);
    const auto b = sample_sensor(signal, m, 100.0, 50.0, noise);
    for (std::size_t k = 0; k < a.size(); ++k) ASSERT_EQ(a[k].intensities, b[k].intensities);
    noise.seed = 43;
    const auto c = sample_sensor(signal, m, 100.0, 50.0, noise);
    EXPECT_NE(a[10].intensities, c[10].intensities);

    // empirical std per channel against sqrt((0.01 I)^2 + 2^2)
    for (int j = 0; j < kChannels; ++j) {
        double s = 0.0, s2 = 0.0;
        for (const auto& f : a) {
            const double d = f.intensities[j] - m.i0[j];
            s += d;
            s2 += d * d;
        }
        const double n = static_cast<double>(a.size());
        const double sd = std::sqrt(s2 / n - (s / n) * (s / n));
        const double expected = std::hypot(0.01 * m.i0[j], 2.0);
        EXPECT_NEAR(sd, expected, 0.05 * expected) << j;
    }
}

TEST(SampleSensor, FloorAndQuantization) {
    AbsorptionModel m;
    m.i0 = Vec8::Constant(3.0);
    auto signal = [](double) { return Vec3::Zero().eval(); };
    NoiseConfig noise;
    noise.sigma_abs = 50.0;
    noise.seed = 1;
    noise.quantize = true;
    const auto frames = sample_sensor(signal, m, 10.0, 20.0, noise);
    bool hit_floor = false;
    for (const auto& f : frames)
        for (int j = 0; j < kChannels; ++j) {
            EXPECT_GE(f.intensities[j], 1.0);
            EXPECT_EQ(f.intensities[j], std::round(f.intensities[j]));
            hit_floor = hit_floor || f.intensities[j] == 1.0;
        }
    EXPECT_TRUE(hit_floor);
}
