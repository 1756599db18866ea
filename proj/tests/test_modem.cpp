#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "inkflow/modem.hpp"

using namespace inkflow;
using namespace inkflow::modem;

namespace {

std::array<cir::CirParams, kInks> shapes() {
    std::array<cir::CirParams, kInks> c;
    const double ab[3][2] = {{3.4, 4.6}, {3.0, 4.0}, {2.5, 3.5}};
    for (int i = 0; i < kInks; ++i) {
        c[i].init = {ab[i][0], ab[i][1]};
        c[i].scale_c = cir::unit_peak_scale(c[i].init);
    }
    return c;
}

std::vector<double> grid(double rate, double duration) {
    std::vector<double> t;
    const auto n = static_cast<std::size_t>(duration * rate);
    for (std::size_t k = 0; k <= n; ++k) t.push_back(static_cast<double>(k) / rate);
    return t;
}

BitMatrix from_strings(const std::string& c, const std::string& m, const std::string& y) {
    BitMatrix b(c.size());
    const std::string* rows[3] = {&c, &m, &y};
    for (int i = 0; i < kInks; ++i)
        for (std::size_t k = 0; k < c.size(); ++k) b.at(i, k) = (*rows[i])[k] == '1';
    return b;
}

}  // namespace

TEST(Bits, BalancedGenerator) {
    const auto b = balanced_random_bits(100, 9);
    for (const auto& row : b.bits) EXPECT_EQ(std::count(row.begin(), row.end(), 1), 50);
    EXPECT_EQ(b, balanced_random_bits(100, 9));
    EXPECT_NE(b, balanced_random_bits(100, 10));
}

TEST(Schedule, PreambleAndPayload) {
    ProtocolParams p;
    p.t_sym = 2.0;
    p.t_inj = 0.1;
    const auto s = generate_schedule(from_strings("01", "00", "11"), p);
    EXPECT_EQ(s.n_symbols, 6u);
    ASSERT_EQ(s.events[0].size(), 5u);
    EXPECT_EQ(s.events[1].size(), 4u);
    EXPECT_EQ(s.events[2].size(), 6u);
    EXPECT_DOUBLE_EQ(s.events[0].back().start, 10.0);
    EXPECT_DOUBLE_EQ(s.events[0].back().duration, 0.1);
    EXPECT_EQ(s.events[0].back().symbol, 5u);
    EXPECT_DOUBLE_EQ(last_event_end(s), 10.1);
}

TEST(Schedule, InvalidInputs) {
    ProtocolParams p;
    p.t_inj = 3.0;
    EXPECT_THROW(generate_schedule(BitMatrix(4), p), DomainError);
    BitMatrix ragged(4);
    ragged.bits[1].push_back(0);
    EXPECT_THROW(generate_schedule(ragged, ProtocolParams{}), DomainError);
}

TEST(Synthesis, SuperpositionWithoutPerturbation) {
    ProtocolParams p;
    p.preamble_len = 0;
    const auto a = generate_schedule(from_strings("1010", "0110", "0001"), p);
    const auto b = generate_schedule(from_strings("0101", "1000", "1100"), p);
    Schedule u = a;
    for (int i = 0; i < kInks; ++i) u.events[i].insert(u.events[i].end(), b.events[i].begin(), b.events[i].end());
    const auto t = grid(19.0, 20.0);
    const auto ta = synthesize_link(a, shapes(), {}, t);
    const auto tb = synthesize_link(b, shapes(), {}, t);
    const auto tu = synthesize_link(u, shapes(), {}, t);
    for (std::size_t k = 0; k < t.size(); ++k)
        EXPECT_LT((ta.values[k] + tb.values[k] - tu.values[k]).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Synthesis, SimoEqualsMumoWhenPerturbationIsOff) {
    ProtocolParams p;
    const auto bits = balanced_random_bits(8, 1);
    const auto t = grid(19.0, 40.0);
    const auto mumo = synthesize_link(generate_schedule(bits, p), shapes(), {}, t);
    for (int i = 0; i < kInks; ++i) {
        BitMatrix only(bits.n_bits());
        only.bits[i] = bits.bits[i];
        Schedule s = generate_schedule(only, p);
        for (int o = 0; o < kInks; ++o)
            if (o != i) s.events[o].clear();
        const auto simo = synthesize_link(s, shapes(), {}, t);
        for (std::size_t k = 0; k < t.size(); ++k) EXPECT_EQ(simo.values[k][i], mumo.values[k][i]);
    }
}

TEST(Synthesis, AttenuationOnlyHitsConcurrentEvents) {
    ProtocolParams p;
    p.preamble_len = 0;
    const auto s = generate_schedule(from_strings("10", "10", "01"), p);
    MumoPerturbation m;
    m.attenuation_mean = 0.2;
    m.seed = 4;
    const auto out = perturb_schedule(s, m);
    EXPECT_DOUBLE_EQ(out.events[0][0].amplitude, 0.8);
    EXPECT_DOUBLE_EQ(out.events[1][0].amplitude, 0.8);
    EXPECT_DOUBLE_EQ(out.events[2][0].amplitude, 1.0);
    EXPECT_DOUBLE_EQ(out.events[2][0].start, s.events[2][0].start);
}

TEST(Synthesis, PerturbationIsSeeded) {
    const auto s = generate_schedule(balanced_random_bits(20, 2), ProtocolParams{});
    MumoPerturbation m{0.2, 0.1, 0.03, 77};
    const auto a = perturb_schedule(s, m), b = perturb_schedule(s, m);
    for (int i = 0; i < kInks; ++i)
        for (std::size_t e = 0; e < a.events[i].size(); ++e) {
            EXPECT_EQ(a.events[i][e].start, b.events[i][e].start);
            EXPECT_EQ(a.events[i][e].amplitude, b.events[i][e].amplitude);
            EXPECT_GT(a.events[i][e].amplitude, 0.0);
            EXPECT_LE(a.events[i][e].amplitude, 1.0);
        }
}

TEST(Synthesis, TruncatedGridIsAnError) {
    const auto s = generate_schedule(from_strings("11", "00", "00"), ProtocolParams{});
    const auto t = grid(19.0, 11.0);  // last event at 10 s peaks ~2.2 s later
    try {
        synthesize_link(s, shapes(), {}, t);
        FAIL();
    } catch (const SynthesisError& e) {
        EXPECT_FALSE(e.truncated_events().empty());
    }
    EXPECT_NO_THROW(synthesize_link(s, shapes(), {}, grid(19.0, 20.0)));
}

namespace {

struct Link {
    IntensityTrace trace;
    BitMatrix bits;
    ProtocolParams proto;
};

Link clean_link(double t_sym, std::size_t n, std::uint64_t seed) {
    Link l;
    l.proto.t_sym = t_sym;
    l.bits = balanced_random_bits(n, seed);
    const auto s = generate_schedule(l.bits, l.proto);
    l.trace = synthesize_link(s, shapes(), {}, grid(19.0, last_event_end(s) + 10.0));
    return l;
}

}  // namespace

TEST(Sync, PreamblePeriodWithinOneSample) {
    for (double t_sym : {2.0, 4.0, 10.0}) {
        const auto l = clean_link(t_sym, 20, 3);
        const auto s = synchronize(l.trace, l.proto);
        EXPECT_NEAR(s.t_sym, t_sym, 1.0 / 19.0) << t_sym;
        EXPECT_EQ(s.t_sym, s.t_sym_measured);
        // first peak sits near the summed pulse peak after the first injection
        EXPECT_GT(s.t_start, 1.4174);
        EXPECT_LT(s.t_start, 1.4174 + 2.0);
    }
}

TEST(Sync, NominalPeriodAndOffset) {
    const auto l = clean_link(2.0, 10, 3);
    SyncConfig c;
    c.period = PeriodSource::nominal;
    c.peak_offset = 0.5;
    const auto base = synchronize(l.trace, l.proto);
    const auto s = synchronize(l.trace, l.proto, c);
    EXPECT_EQ(s.t_sym, 2.0);
    EXPECT_DOUBLE_EQ(s.t_start, base.t_start - 0.5);
    const auto pay = payload_sync(s, 4);
    EXPECT_DOUBLE_EQ(pay.t_start, s.t_start + 8.0);
}

TEST(Sync, Failures) {
    IntensityTrace flat;
    flat.times = grid(19.0, 5.0);
    flat.values.assign(flat.times.size(), Vec3::Zero());
    EXPECT_THROW(synchronize(flat, ProtocolParams{}), SyncError);
    EXPECT_THROW(synchronize(IntensityTrace{}, ProtocolParams{}), SyncError);
    ProtocolParams none;
    none.preamble_len = 0;
    EXPECT_THROW(synchronize(clean_link(2.0, 4, 1).trace, none), SyncError);
}

TEST(Peaks, PlateauAndSeparation) {
    const std::vector<double> t = {0, 1, 2, 3, 4, 5, 6, 7};
    const std::vector<double> x = {0, 2, 2, 0, 1, 3, 0, 1};
    EXPECT_EQ(find_peaks(t, x, 0.5, 0.0), (std::vector<std::size_t>{1, 5, 7}));
    EXPECT_EQ(find_peaks(t, x, 1.5, 0.0), (std::vector<std::size_t>{1, 5}));
    EXPECT_EQ(find_peaks(t, x, 0.5, 2.5), (std::vector<std::size_t>{1, 5}));
}

TEST(Peaks, ParabolicRefinementIsExactForParabola) {
    std::vector<double> t, x;
    for (int k = 0; k < 10; ++k) {
        t.push_back(k * 0.1);
        x.push_back(-(t.back() - 0.437) * (t.back() - 0.437));
    }
    EXPECT_NEAR(refine_peak_time(t, x, 4), 0.437, 1e-12);
}

TEST(Detect, CleanLinkDecodesWithoutErrors) {
    const auto l = clean_link(2.0, 40, 8);
    SyncConfig c;
    c.period = PeriodSource::nominal;
    // first window opens just before the first injection's arrival
    auto s = synchronize(l.trace, l.proto, c);
    s.t_start = 1.4174 - 0.05;
    const auto rep = detect(l.trace, payload_sync(s, 4), 40, 0.3);
    EXPECT_EQ(bit_error_rate(l.bits, rep.bits), 0.0);
}

TEST(Detect, TieDecidesOne) {
    std::array<std::vector<double>, kInks> d = {std::vector<double>{0.5, 0.4}, {0.6, 0.0}, {0.5, 0.5}};
    const auto b = decide(d, 0.5);
    EXPECT_EQ(b.bits[0], (std::vector<std::uint8_t>{1, 0}));
    EXPECT_EQ(b.bits[2], (std::vector<std::uint8_t>{1, 1}));
}

TEST(Detect, EmptyWindowIsAnError) {
    const auto l = clean_link(2.0, 4, 1);
    SyncEstimate s{1000.0, 2.0, 2.0};
    EXPECT_THROW(symbol_deltas(l.trace, s, 4), DetectionError);
    s.t_sym = 0.0;
    EXPECT_THROW(symbol_deltas(l.trace, s, 4), DetectionError);
}

TEST(Detect, DeltaDefinition) {
    IntensityTrace tr;
    tr.times = {0.0, 0.5, 1.0, 1.5, 2.0, 2.5};
    const double c[6] = {0.2, 0.9, 0.4, 0.3, 0.1, 0.0};
    for (double v : c) tr.values.push_back(Vec3(v, -v, 0.0));
    const auto d = symbol_deltas(tr, {0.0, 1.0, 1.0}, 3);
    EXPECT_DOUBLE_EQ(d[0][0], 0.7);
    EXPECT_DOUBLE_EQ(d[0][1], 0.0);
    EXPECT_DOUBLE_EQ(d[1][1], 0.1);
    EXPECT_DOUBLE_EQ(d[2][2], 0.0);
}

TEST(Detect, OnesAreMonotoneInThreshold) {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 10; ++trial) {
        const auto l = clean_link(1.0, 30, trial);
        const auto deltas = symbol_deltas(l.trace, {3.0, 1.0, 1.0}, 30);
        std::size_t prev = SIZE_MAX;
        for (double tau : linspace(0.0, 1.0, 100)) {
            const auto ones = decide(deltas, tau).count_ones();
            EXPECT_LE(ones, prev);
            prev = ones;
        }
    }
}

TEST(Ber, TrivialCases) {
    const auto a = from_strings("0110", "1010", "0001");
    EXPECT_EQ(bit_error_rate(a, a), 0.0);
    BitMatrix comp = a;
    for (auto& row : comp.bits)
        for (auto& v : row) v ^= 1;
    EXPECT_EQ(bit_error_rate(a, comp), 1.0);
    BitMatrix one(4), other(4);
    one.bits[0] = {0, 1, 1, 0};
    other.bits[0] = {0, 1, 1, 1};
    EXPECT_DOUBLE_EQ(bit_error_rate(one, other), 1.0 / 12.0);
    EXPECT_THROW(bit_error_rate(BitMatrix(3), BitMatrix(4)), DomainError);
}

TEST(Sweep, ExtremeThresholdsAreComplementary) {
    const auto l = clean_link(2.0, 40, 21);
    const SyncEstimate s{10.0, 2.0, 2.0};
    const std::vector<double> taus = {0.0, 1e9};
    const auto r = threshold_sweep(l.trace, s, l.bits, taus);
    // deltas are >= 0, so tau = 0 decides all ones
    EXPECT_DOUBLE_EQ(r.points[0].ber, 0.5);
    EXPECT_DOUBLE_EQ(r.points[1].ber, 0.5);
    EXPECT_DOUBLE_EQ(r.points[0].ber + r.points[1].ber, 1.0);
    EXPECT_EQ(r.best_tau, 0.0);
    EXPECT_THROW(threshold_sweep(l.trace, s, l.bits, std::vector<double>{}), DomainError);
}

TEST(Sweep, Linspace) {
    EXPECT_EQ(linspace(0.0, 1.0, 3), (std::vector<double>{0.0, 0.5, 1.0}));
    EXPECT_EQ(linspace(2.0, 5.0, 1), (std::vector<double>{2.0}));
    EXPECT_EQ(linspace(0.0, 1.0, 101)[100], 1.0);
}
