#ifndef INKFLOW_MODEM_HPP
#define INKFLOW_MODEM_HPP

// On-off keying over the three ink channels: injection scheduling, link
// signal synthesis with inter-symbol interference, preamble
// synchronization, the difference detector and bit error rates.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "inkflow/cir_model.hpp"
#include "inkflow/unmixing.hpp"

namespace inkflow::modem {

struct ProtocolParams {
    double t_sym = 2.0;   // [s]
    double t_inj = 0.1;   // [s]
    std::size_t preamble_len = 4;
    // pump drive levels; metadata only, no voltage-to-flow model
    double v_idle = 40.0;
    double v_1 = 110.0;
    double v_0 = 40.0;

    void validate() const {
        detail::require_positive(t_sym, "t_sym");
        if (!(t_inj >= 0.0 && t_inj <= t_sym)) throw DomainError("t_inj must lie in [0, t_sym]");
    }
};

/// s_{i,k}: one bit sequence per ink, all of equal length.
struct BitMatrix {
    std::array<std::vector<std::uint8_t>, kInks> bits;

    BitMatrix() = default;
    explicit BitMatrix(std::size_t n) {
        for (auto& b : bits) b.assign(n, 0);
    }

    std::size_t n_bits() const noexcept { return bits[0].size(); }
    std::uint8_t& at(int ink, std::size_t k) { return bits[ink].at(k); }
    std::uint8_t at(int ink, std::size_t k) const { return bits[ink].at(k); }

    void validate() const {
        for (const auto& row : bits) {
            if (row.size() != bits[0].size())
                throw DomainError("bit sequences must have equal length");
            for (auto v : row)
                if (v > 1) throw DomainError("bits must be 0 or 1");
        }
    }

    std::size_t count_ones() const {
        std::size_t n = 0;
        for (const auto& row : bits) n += static_cast<std::size_t>(std::count(row.begin(), row.end(), 1));
        return n;
    }

    friend bool operator==(const BitMatrix&, const BitMatrix&) = default;
};

/// Balanced random payload: exactly floor(n/2) ones per ink, shuffled.
inline BitMatrix balanced_random_bits(std::size_t n, std::uint64_t seed) {
    BitMatrix m(n);
    std::mt19937_64 rng(seed);
    for (auto& row : m.bits) {
        std::fill(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(n / 2), 1);
        std::shuffle(row.begin(), row.end(), rng);
    }
    return m;
}

struct InjectionEvent {
    double start = 0.0;     // [s]
    double duration = 0.0;  // [s]
    double amplitude = 1.0;
    std::size_t symbol = 0;  // symbol index including the preamble
};

struct Schedule {
    std::array<std::vector<InjectionEvent>, kInks> events;
    double t_sym = 0.0;
    std::size_t n_symbols = 0;  // preamble + payload
};

/// Prepends `preamble_len` ones to every ink; a 1 in symbol k injects for
/// t_inj at k * t_sym with unit amplitude, a 0 injects nothing.
inline Schedule generate_schedule(const BitMatrix& bits, const ProtocolParams& proto) {
    bits.validate();
    proto.validate();
    Schedule s;
    s.t_sym = proto.t_sym;
    s.n_symbols = proto.preamble_len + bits.n_bits();
    for (int i = 0; i < kInks; ++i) {
        for (std::size_t k = 0; k < s.n_symbols; ++k) {
            const bool one = k < proto.preamble_len || bits.at(i, k - proto.preamble_len) == 1;
            if (one)
                s.events[i].push_back(
                    {static_cast<double>(k) * proto.t_sym, proto.t_inj, 1.0, k});
        }
    }
    return s;
}

inline double last_event_end(const Schedule& s) {
    double end = 0.0;
    for (const auto& evs : s.events)
        for (const auto& e : evs) end = std::max(end, e.start + e.duration);
    return end;
}

/// Statistical stand-in for multi-ink occlusion and misalignment. Disabled
/// when all magnitudes are zero.
struct MumoPerturbation {
    double attenuation_mean = 0.0;    // e.g. 0.20 for the observed ~20 % drop
    double attenuation_jitter = 0.0;  // std of the per-pulse amplitude factor
    double misalignment_std = 0.0;    // per-pulse timing jitter [s]
    std::uint64_t seed = 0;

    bool enabled() const noexcept {
        return attenuation_mean > 0.0 || attenuation_jitter > 0.0 || misalignment_std > 0.0;
    }

    void validate() const {
        if (!(attenuation_mean >= 0.0 && attenuation_mean < 1.0))
            throw DomainError("attenuation_mean must lie in [0, 1)");
        if (!(attenuation_jitter >= 0.0) || !(misalignment_std >= 0.0))
            throw DomainError("perturbation jitters must be >= 0");
    }
};

inline constexpr double kMinAttenuationFactor = 1e-3;

/// Applies the perturbation to a schedule. An event is concurrent when
/// another ink injects in the same symbol; its amplitude is scaled by a
/// factor ~ N(1 - attenuation_mean, attenuation_jitter) clamped to (0, 1].
/// Every event's start is shifted by N(0, misalignment_std).
inline Schedule perturb_schedule(const Schedule& schedule, const MumoPerturbation& perturb) {
    perturb.validate();
    if (!perturb.enabled()) return schedule;
    Schedule out = schedule;
    std::vector<std::array<bool, kInks>> active(schedule.n_symbols, {false, false, false});
    for (int i = 0; i < kInks; ++i)
        for (const auto& e : schedule.events[i])
            if (e.symbol < active.size()) active[e.symbol][i] = true;
    std::mt19937_64 rng(perturb.seed);
    std::normal_distribution<double> standard(0.0, 1.0);
    for (int i = 0; i < kInks; ++i) {
        for (auto& e : out.events[i]) {
            const double shift = perturb.misalignment_std * standard(rng);
            const double z = standard(rng);
            e.start += shift;
            bool concurrent = false;
            if (e.symbol < active.size())
                for (int other = 0; other < kInks; ++other)
                    concurrent = concurrent || (other != i && active[e.symbol][other]);
            if (concurrent) {
                const double factor = (1.0 - perturb.attenuation_mean) + perturb.attenuation_jitter * z;
                e.amplitude *= std::clamp(factor, kMinAttenuationFactor, 1.0);
            }
        }
    }
    return out;
}

/// Continuous-time ink intensities of a realized (already perturbed)
/// schedule: c_i(t) = sum_e amp_e * pulse(t - start_e).
class LinkSignal {
public:
    LinkSignal(Schedule realized, std::array<cir::CirParams, kInks> cir, double sample_period)
        : schedule_(std::move(realized)), cir_(cir) {
        for (int i = 0; i < kInks; ++i) {
            cir_[i].validate();
            auto& evs = schedule_.events[i];
            std::sort(evs.begin(), evs.end(),
                      [](const InjectionEvent& a, const InjectionEvent& b) { return a.start < b.start; });
            for (const auto& e : evs) {
                if (!(e.duration >= 0.0)) throw DomainError("negative injection duration");
                substeps_[i].push_back(cir::convolution_substeps(e.duration, sample_period));
            }
        }
    }

    Vec3 operator()(double t) const {
        Vec3 c = Vec3::Zero();
        for (int i = 0; i < kInks; ++i) {
            const auto& evs = schedule_.events[i];
            for (std::size_t e = 0; e < evs.size() && evs[e].start <= t; ++e)
                c[i] += evs[e].amplitude *
                        cir::pulse_value(cir_[i], evs[e].duration, t - evs[e].start, substeps_[i][e]);
        }
        return c;
    }

    IntensityTrace trace(std::span<const double> times) const {
        IntensityTrace out;
        out.times.assign(times.begin(), times.end());
        out.values.reserve(times.size());
        for (double t : times) out.values.push_back((*this)(t));
        return out;
    }

    const Schedule& schedule() const noexcept { return schedule_; }
    const std::array<cir::CirParams, kInks>& cir() const noexcept { return cir_; }

    /// Events (ink-major flat index) whose CIR peak falls after `end`.
    std::vector<std::size_t> truncated_events(double end) const {
        std::vector<std::size_t> out;
        std::size_t flat = 0;
        for (int i = 0; i < kInks; ++i) {
            const double latency = cir::peak_time(cir_[i]);
            for (const auto& e : schedule_.events[i]) {
                if (e.start + e.duration + latency > end) out.push_back(flat);
                ++flat;
            }
        }
        return out;
    }

private:
    Schedule schedule_;
    std::array<cir::CirParams, kInks> cir_;
    std::array<std::vector<std::size_t>, kInks> substeps_;
};

/// Ground-truth intensities on `times`. Fails if the grid ends before the
/// CIR peak of any event.
inline IntensityTrace synthesize_link(const Schedule& schedule,
                                      const std::array<cir::CirParams, kInks>& cir,
                                      const MumoPerturbation& perturb,
                                      std::span<const double> times) {
    if (times.empty()) throw SynthesisError("empty time grid", {});
    cir::detail::require_grid(times);
    const double period = times.size() > 1 ? cir::min_spacing(times) : schedule.t_sym;
    const LinkSignal signal(perturb_schedule(schedule, perturb), cir, period);
    const auto truncated = signal.truncated_events(times.back());
    if (!truncated.empty()) {
        std::string list;
        for (std::size_t k = 0; k < truncated.size() && k < 10; ++k)
            list += (k ? ", " : "") + std::to_string(truncated[k]);
        if (truncated.size() > 10) list += ", ...";
        throw SynthesisError("time grid too short; truncated events: " + list, truncated);
    }
    return signal.trace(times);
}

enum class PeriodSource { estimated, nominal };

struct SyncConfig {
    double peak_fraction = 0.5;    // of the maximum of the searched segment
    double min_separation = 0.5;   // fraction of the nominal t_sym
    double peak_offset = 0.0;      // expected first peak time minus window start [s]
    double search_horizon = 0.0;   // > 0: only the first `horizon` seconds are searched
    // Which period the detector windows use. The preamble estimate is always
    // reported in SyncEstimate::t_sym_measured.
    PeriodSource period = PeriodSource::estimated;
};

struct SyncEstimate {
    double t_start = 0.0;
    double t_sym = 0.0;           // period used for symbol windows
    double t_sym_measured = 0.0;  // mean preamble peak spacing
};

/// Local maxima of `x` (plateaus count once, at their first sample) at or
/// above `level`, thinned so that kept peaks are at least `separation`
/// apart, the higher peak winning a conflict.
inline std::vector<std::size_t> find_peaks(std::span<const double> t, std::span<const double> x,
                                           double level, double separation) {
    std::vector<std::size_t> cand;
    const std::size_t n = x.size();
    for (std::size_t k = 0; k < n; ++k) {
        if (x[k] < level) continue;
        const bool left = k == 0 || x[k] > x[k - 1];
        if (!left) continue;
        std::size_t r = k;
        while (r + 1 < n && x[r + 1] == x[k]) ++r;
        const bool right = r + 1 >= n || x[r + 1] < x[k];
        if (right) cand.push_back(k);
    }
    std::vector<std::size_t> kept;
    for (std::size_t k : cand) {
        if (!kept.empty() && t[k] - t[kept.back()] < separation) {
            if (x[k] > x[kept.back()]) kept.back() = k;
            continue;
        }
        kept.push_back(k);
    }
    return kept;
}

/// Sub-sample peak position from the parabola through the peak sample and
/// its two neighbours.
inline double refine_peak_time(std::span<const double> t, std::span<const double> x,
                               std::size_t k) {
    if (k == 0 || k + 1 >= x.size()) return t[k];
    const double den = x[k - 1] - 2.0 * x[k] + x[k + 1];
    if (!(den < 0.0)) return t[k];
    const double delta = std::clamp(0.5 * (x[k - 1] - x[k + 1]) / den, -0.5, 0.5);
    return delta >= 0.0 ? t[k] + delta * (t[k + 1] - t[k]) : t[k] + delta * (t[k] - t[k - 1]);
}

/// Locates the preamble from the peaks of the summed intensity. t_start is
/// the first peak minus `cfg.peak_offset`; the measured period is the mean
/// spacing of the preamble peaks (nominal t_sym if preamble_len == 1).
/// Peak times are refined to sub-sample resolution.
inline SyncEstimate synchronize(const IntensityTrace& trace, const ProtocolParams& proto,
                                const SyncConfig& cfg = {}) {
    proto.validate();
    if (proto.preamble_len < 1) throw SyncError("synchronization needs a preamble");
    std::vector<double> times, sum;
    for (std::size_t k = 0; k < trace.size(); ++k) {
        if (cfg.search_horizon > 0.0 && !trace.times.empty() &&
            trace.times[k] - trace.times.front() > cfg.search_horizon)
            break;
        times.push_back(trace.times[k]);
        sum.push_back(trace.values[k].sum());
    }
    if (sum.empty()) throw SyncError("sync failure: empty trace");
    const double peak = *std::max_element(sum.begin(), sum.end());
    if (!(peak > 0.0)) throw SyncError("sync failure: no signal");
    const auto peaks =
        find_peaks(times, sum, cfg.peak_fraction * peak, cfg.min_separation * proto.t_sym);
    if (peaks.size() < proto.preamble_len)
        throw SyncError("sync failure: found " + std::to_string(peaks.size()) + " of " +
                        std::to_string(proto.preamble_len) + " preamble peaks");
    SyncEstimate est;
    const double first = refine_peak_time(times, sum, peaks.front());
    const double last = refine_peak_time(times, sum, peaks[proto.preamble_len - 1]);
    est.t_start = first - cfg.peak_offset;
    est.t_sym_measured = proto.preamble_len > 1
                             ? (last - first) / static_cast<double>(proto.preamble_len - 1)
                             : proto.t_sym;
    est.t_sym = cfg.period == PeriodSource::nominal ? proto.t_sym : est.t_sym_measured;
    return est;
}

/// Moves the window origin from the preamble start to the first payload symbol.
inline SyncEstimate payload_sync(const SyncEstimate& s, std::size_t preamble_len) {
    return {s.t_start + static_cast<double>(preamble_len) * s.t_sym, s.t_sym, s.t_sym_measured};
}

struct DetectionReport {
    BitMatrix bits;
    std::array<std::vector<double>, kInks> deltas;
    double tau = 0.0;
    SyncEstimate sync;
};

/// Delta_{i,k} = max over T_k of c_i minus c_i at the first sample of T_k,
/// with T_k = [t_start + k t_sym, t_start + (k+1) t_sym).
inline std::array<std::vector<double>, kInks> symbol_deltas(const IntensityTrace& trace,
                                                            const SyncEstimate& sync,
                                                            std::size_t n_bits) {
    if (!(sync.t_sym > 0.0)) throw DetectionError("symbol period must be > 0");
    std::array<std::vector<double>, kInks> deltas;
    for (auto& d : deltas) d.resize(n_bits);
    const auto& t = trace.times;
    for (std::size_t k = 0; k < n_bits; ++k) {
        const double lo = sync.t_start + static_cast<double>(k) * sync.t_sym;
        const double hi = lo + sync.t_sym;
        const auto first = std::lower_bound(t.begin(), t.end(), lo);
        const auto last = std::lower_bound(first, t.end(), hi);
        if (first == last)
            throw DetectionError("symbol window " + std::to_string(k) + " [" + std::to_string(lo) +
                                 ", " + std::to_string(hi) + ") contains no samples");
        const auto a = static_cast<std::size_t>(first - t.begin());
        const auto b = static_cast<std::size_t>(last - t.begin());
        for (int i = 0; i < kInks; ++i) {
            double mx = trace.values[a][i];
            for (std::size_t q = a + 1; q < b; ++q) mx = std::max(mx, trace.values[q][i]);
            deltas[i][k] = mx - trace.values[a][i];
        }
    }
    return deltas;
}

/// Decides s_{i,k} = 1 iff Delta_{i,k} >= tau.
inline BitMatrix decide(const std::array<std::vector<double>, kInks>& deltas, double tau) {
    BitMatrix bits(deltas[0].size());
    for (int i = 0; i < kInks; ++i)
        for (std::size_t k = 0; k < deltas[i].size(); ++k) bits.at(i, k) = deltas[i][k] >= tau ? 1 : 0;
    return bits;
}

inline DetectionReport detect(const IntensityTrace& trace, const SyncEstimate& sync,
                              std::size_t n_bits, double tau) {
    DetectionReport r;
    r.deltas = symbol_deltas(trace, sync, n_bits);
    r.bits = decide(r.deltas, tau);
    r.tau = tau;
    r.sync = sync;
    return r;
}

inline double bit_error_rate(const BitMatrix& tx, const BitMatrix& rx) {
    if (tx.n_bits() != rx.n_bits()) throw DomainError("bit matrix dimension mismatch");
    tx.validate();
    rx.validate();
    const std::size_t total = kInks * tx.n_bits();
    if (total == 0) return 0.0;
    std::size_t errors = 0;
    for (int i = 0; i < kInks; ++i)
        for (std::size_t k = 0; k < tx.n_bits(); ++k) errors += tx.at(i, k) != rx.at(i, k);
    return static_cast<double>(errors) / static_cast<double>(total);
}

struct SweepPoint {
    double tau;
    double ber;
};

struct SweepResult {
    std::vector<SweepPoint> points;
    double best_tau = 0.0;  // smallest tau attaining the minimum BER
    double best_ber = 1.0;
};

inline SweepResult threshold_sweep(const IntensityTrace& trace, const SyncEstimate& sync,
                                   const BitMatrix& tx, std::span<const double> taus) {
    if (taus.empty()) throw DomainError("threshold sweep needs at least one tau");
    const auto deltas = symbol_deltas(trace, sync, tx.n_bits());
    SweepResult r;
    r.points.reserve(taus.size());
    bool first = true;
    for (double tau : taus) {
        const double ber = bit_error_rate(tx, decide(deltas, tau));
        r.points.push_back({tau, ber});
        if (first || ber < r.best_ber || (ber == r.best_ber && tau < r.best_tau)) {
            r.best_ber = ber;
            r.best_tau = tau;
            first = false;
        }
    }
    return r;
}

/// count points evenly spaced on [lo, hi]
inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
    std::vector<double> v(count);
    for (std::size_t k = 0; k < count; ++k)
        v[k] = count == 1 ? lo
                          : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1);
    return v;
}

}  // namespace inkflow::modem

#endif
