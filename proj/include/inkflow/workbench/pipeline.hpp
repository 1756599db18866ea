#ifndef INKFLOW_WORKBENCH_PIPELINE_HPP
#define INKFLOW_WORKBENCH_PIPELINE_HPP

// End-to-end runs behind the CLI subcommands. Every run is a pure function
// of its inputs and seeds; files are written only into the given directory.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "inkflow/cir_model.hpp"
#include "inkflow/hydrodynamics.hpp"
#include "inkflow/modem.hpp"
#include "inkflow/optics.hpp"
#include "inkflow/unmixing.hpp"
#include "inkflow/workbench/formats.hpp"
#include "inkflow/workbench/scenario.hpp"

namespace inkflow::workbench {

namespace fs = std::filesystem;
using nlohmann::json;

/// Scenario with every derived quantity computed and external inputs loaded.
struct ResolvedScenario {
    LinkScenario scenario;
    hydro::FlowSummary flow{};
    std::array<cir::CirParams, kInks> cir{};
    optics::AbsorptionModel model;
    std::string hash;
    Diagnostics diagnostics;
};

inline cir::CirParams fit_from_trace_file(const fs::path& trace_file, Ink ink, double injection_time,
                                          double window_end, double l_c, double v_max,
                                          const cir::FitGrid& grid, Diagnostics* diag);

inline ResolvedScenario resolve(const LinkScenario& s) {
    ResolvedScenario r;
    r.scenario = s;
    r.hash = scenario_hash(s);
    try {
        r.flow = hydro::summarize(s.geometry, s.flow, &r.diagnostics);
    } catch (const DomainError& e) {
        throw ConfigError("geometry/flow", e.what());
    }
    for (int i = 0; i < kInks; ++i) {
        const CirSpec& spec = s.cir[i];
        if (spec.source == CirSpec::Source::fit_from_trace) {
            r.cir[i] = fit_from_trace_file(spec.trace, static_cast<Ink>(i), spec.injection_time,
                                           spec.window_end, s.geometry.l_c, r.flow.v_max, {},
                                           &r.diagnostics);
            continue;
        }
        cir::CirParams p;
        p.init = {spec.alpha, spec.beta};
        p.l_c = s.geometry.l_c;
        p.v_max = r.flow.v_max;
        p.scale_c = spec.scale_c ? *spec.scale_c : cir::unit_peak_scale(p.init);
        r.cir[i] = p;
    }
    r.model = s.calibration_file.empty() ? optics::default_absorption_model()
                                         : load_calibration(s.calibration_file);
    return r;
}

/// Time from injection to the peak of the summed three-ink pulse, found by
/// a 1 ms scan of the noise-free response.
inline double summed_peak_latency(const ResolvedScenario& r) {
    const double t_inj = r.scenario.proto.t_inj;
    const double start = r.flow.arrival_time;
    const std::size_t n = cir::convolution_substeps(t_inj, 1.0 / r.scenario.sample_rate);
    double best_t = start, best_v = -1.0;
    for (double t = start; t < start + 10.0; t += 1e-3) {
        double v = 0.0;
        for (int i = 0; i < kInks; ++i) v += cir::pulse_value(r.cir[i], t_inj, t, n);
        if (v > best_v) {
            best_v = v;
            best_t = t;
        }
    }
    return best_t;
}

/// Sync parameters: symbol windows open `window_guard` before the nominal
/// arrival of each symbol's pulse.
inline modem::SyncConfig sync_config(const ResolvedScenario& r) {
    modem::SyncConfig c;
    c.peak_fraction = r.scenario.sync.peak_fraction;
    c.min_separation = r.scenario.sync.min_separation;
    c.search_horizon = r.scenario.sync.search_horizon;
    c.period = r.scenario.sync.period;
    c.peak_offset = summed_peak_latency(r) - r.flow.arrival_time + r.scenario.sync.window_guard;
    return c;
}

inline json flow_json(const hydro::FlowSummary& f) {
    return {{"v_avg_m_per_s", f.v_avg},   {"v_max_m_per_s", f.v_max},
            {"reynolds", f.reynolds},     {"peclet", f.peclet},
            {"regime", hydro::to_string(f.regime)}, {"arrival_time_s", f.arrival_time}};
}

inline json diagnostics_json(const Diagnostics& d) {
    json arr = json::array();
    for (const auto& e : d.entries()) arr.push_back({{"code", e.code}, {"message", e.message}});
    return arr;
}

inline json cir_json(const std::array<cir::CirParams, kInks>& cir) {
    json j;
    for (int i = 0; i < kInks; ++i)
        j[kInkNames[i]] = {{"alpha", cir[i].init.alpha},
                           {"beta", cir[i].init.beta},
                           {"scale_c", cir[i].scale_c},
                           {"peak_time_s", cir::peak_time(cir[i])}};
    return j;
}

inline std::vector<double> sample_grid(double rate, double duration) {
    const std::size_t n = optics::frame_count(rate, duration);
    std::vector<double> t(n);
    for (std::size_t k = 0; k < n; ++k) t[k] = optics::sample_time(k, rate);
    return t;
}

struct SimulationResult {
    modem::BitMatrix tx;
    IntensityTrace truth;
    std::vector<optics::SpectralFrame> frames;
    double duration = 0.0;
    json manifest;
};

/// schedule -> synthesize -> sample_sensor. The simulated span runs to the
/// last injection plus the scenario's CIR tail.
inline SimulationResult simulate(const ResolvedScenario& r, const modem::BitMatrix& bits) {
    const LinkScenario& s = r.scenario;
    SimulationResult out;
    out.tx = bits;
    const auto schedule = modem::generate_schedule(bits, s.proto);
    out.duration = modem::last_event_end(schedule) + s.tail;
    const auto times = sample_grid(s.sample_rate, out.duration);

    modem::MumoPerturbation perturb = s.perturb;
    perturb.seed = derive_seed(s.seed, SeedStream::perturbation);
    out.truth = modem::synthesize_link(schedule, r.cir, perturb, times);

    optics::NoiseConfig noise = s.noise;
    noise.seed = derive_seed(s.seed, SeedStream::noise);
    const auto& truth = out.truth;
    auto lookup = [&truth, rate = s.sample_rate](double t) -> Vec3 {
        const auto k = static_cast<std::size_t>(std::llround(t * rate));
        return truth.values.at(k);
    };
    out.frames = optics::sample_sensor(lookup, r.model, s.sample_rate, out.duration, noise);

    json m;
    m["format"] = "inkflow-manifest";
    m["version"] = 1;
    m["scenario"] = s.name;
    m["scenario_hash"] = r.hash;
    m["seed"] = s.seed;
    m["derived"] = flow_json(r.flow);
    m["cir"] = cir_json(r.cir);
    m["duration_s"] = out.duration;
    m["frames"] = out.frames.size();
    m["payload_bits_per_ink"] = bits.n_bits();
    json events;
    for (int i = 0; i < kInks; ++i) events[kInkNames[i]] = schedule.events[i].size();
    m["injections"] = events;
    m["diagnostics"] = diagnostics_json(r.diagnostics);
    m["config"] = scenario_to_json(s);
    out.manifest = m;
    return out;
}

inline modem::BitMatrix scenario_bits(const LinkScenario& s) {
    return modem::balanced_random_bits(s.payload_bits, derive_seed(s.seed, SeedStream::bits));
}

struct SimulateFiles {
    fs::path sensor, intensity, bits, manifest;
};

inline SimulateFiles simulate_files(const fs::path& dir) {
    return {dir / "sensor.csv", dir / "intensity.csv", dir / "bits.txt", dir / "manifest.json"};
}

/// Writes sensor.csv, intensity.csv, bits.txt and manifest.json into `out_dir`.
inline SimulationResult run_simulate(const ResolvedScenario& r, const modem::BitMatrix& bits,
                                     const fs::path& out_dir) {
    auto result = simulate(r, bits);
    const auto files = simulate_files(out_dir);
    save_trace(files.sensor, to_trace_file(result.frames, r.hash));
    save_trace(files.intensity, to_trace_file(result.truth, r.hash));
    save_bits(files.bits, bits);
    result.manifest["files"] = {{"sensor", files.sensor.filename().string()},
                                {"intensity", files.intensity.filename().string()},
                                {"bits", files.bits.filename().string()}};
    save_json(files.manifest, result.manifest);
    return result;
}

// ---------------------------------------------------------------------------
// Calibration

struct Window {
    double begin = 0.0;
    double end = 0.0;  // exclusive
};

struct CalibrationWindows {
    Window reference;
    std::array<std::vector<Window>, kInks> pulses;
};

inline json windows_to_json(const CalibrationWindows& w) {
    json j;
    j["format"] = "inkflow-windows";
    j["version"] = 1;
    j["reference_s"] = {w.reference.begin, w.reference.end};
    for (int i = 0; i < kInks; ++i) {
        json arr = json::array();
        for (const auto& p : w.pulses[i]) arr.push_back({p.begin, p.end});
        j[kInkNames[i]] = arr;
    }
    return j;
}

inline CalibrationWindows windows_from_json(const json& j, const std::string& name) {
    CalibrationWindows w;
    auto window = [&](const json& v, const std::string& where) {
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
            throw ConfigError(where, "expected [begin_s, end_s]");
        Window out{v[0].get<double>(), v[1].get<double>()};
        if (!(out.end > out.begin)) throw ConfigError(where, "window end must exceed its begin");
        return out;
    };
    if (!j.is_object() || !j.contains("reference_s"))
        throw ConfigError(name + ".reference_s", "missing ink-free reference window");
    w.reference = window(j.at("reference_s"), name + ".reference_s");
    for (int i = 0; i < kInks; ++i) {
        const std::string key = kInkNames[i];
        if (!j.contains(key) || !j.at(key).is_array())
            throw ConfigError(name + "." + key, "expected a list of pulse windows");
        for (std::size_t k = 0; k < j.at(key).size(); ++k)
            w.pulses[i].push_back(window(j.at(key)[k], name + "." + key + "[" + std::to_string(k) + "]"));
    }
    return w;
}

inline std::vector<optics::SpectralFrame> frames_in(const std::vector<optics::SpectralFrame>& frames,
                                                    const Window& w, const std::string& label) {
    if (frames.empty()) throw CalibrationError(label + ": empty trace");
    constexpr double eps = 1e-9;
    // the last window may extend one sample period past the final frame
    const double period = frames.size() > 1 ? (frames.back().t - frames.front().t) /
                                                  static_cast<double>(frames.size() - 1)
                                            : 0.0;
    if (w.begin < frames.front().t - eps || w.end > frames.back().t + period + eps)
        throw CalibrationError(label + ": window [" + std::to_string(w.begin) + ", " +
                               std::to_string(w.end) + ") outside trace bounds");
    std::vector<optics::SpectralFrame> out;
    for (const auto& f : frames)
        if (f.t >= w.begin && f.t < w.end) out.push_back(f);
    return out;
}

struct CalibrationResult {
    optics::AbsorptionModel model;
    double condition = 0.0;
};

/// Averages the ink-free reference window over all three traces for i0, then
/// runs the peak-absorbance calibration and checks the estimator can be built.
inline CalibrationResult run_calibrate(const std::array<std::vector<optics::SpectralFrame>, kInks>& traces,
                                       const CalibrationWindows& windows) {
    std::vector<optics::SpectralFrame> reference;
    for (int i = 0; i < kInks; ++i) {
        auto f = frames_in(traces[i], windows.reference, std::string(kInkNames[i]) + " reference");
        reference.insert(reference.end(), f.begin(), f.end());
    }
    const Vec8 i0 = unmix::reference_intensity(reference);
    unmix::CalibrationPulseSet set;
    for (int i = 0; i < kInks; ++i)
        for (std::size_t k = 0; k < windows.pulses[i].size(); ++k)
            set.pulses[i].push_back(frames_in(traces[i], windows.pulses[i][k],
                                              std::string(kInkNames[i]) + " pulse " + std::to_string(k)));
    CalibrationResult out;
    out.model = unmix::calibrate(set, i0);
    out.condition = unmix::build_estimator(out.model).condition;
    return out;
}

struct CalibrationRecording {
    std::array<std::vector<optics::SpectralFrame>, kInks> traces;
    std::array<IntensityTrace, kInks> truth;
    CalibrationWindows windows;
};

/// Single-ink pulse trains for calibration: `n_p` pulses per ink spaced
/// `spacing` apart after a `lead` of clean water. Each pulse amplitude is
/// chosen so the sampled intensity maximum inside its window is exactly 1
/// (including the residual tail of earlier pulses).
inline CalibrationRecording simulate_calibration(const ResolvedScenario& r, std::size_t n_p,
                                                 double spacing = 10.0, double lead = 1.0) {
    if (n_p < 1) throw ConfigError("n_p", "need at least one calibration pulse");
    const LinkScenario& s = r.scenario;
    if (!(spacing > 0.0)) throw ConfigError("spacing", "must be > 0");
    const double duration = lead + static_cast<double>(n_p) * spacing;
    const auto times = sample_grid(s.sample_rate, duration);
    const std::size_t n_sub = cir::convolution_substeps(s.proto.t_inj, 1.0 / s.sample_rate);

    CalibrationRecording rec;
    rec.windows.reference = {0.0, std::max(lead + r.flow.arrival_time - 0.2, 1.0 / s.sample_rate)};
    std::mt19937_64 jitter_rng(derive_seed(s.seed, SeedStream::calibration));
    std::normal_distribution<double> standard(0.0, 1.0);
    for (int i = 0; i < kInks; ++i) {
        std::vector<double> c(times.size(), 0.0);
        for (std::size_t k = 0; k < n_p; ++k) {
            const Window w{lead + static_cast<double>(k) * spacing,
                           lead + static_cast<double>(k + 1) * spacing};
            rec.windows.pulses[i].push_back(w);
            const double start = w.begin + s.perturb.misalignment_std * standard(jitter_rng);
            std::vector<double> p(times.size(), 0.0);
            double amplitude = std::numeric_limits<double>::infinity();
            for (std::size_t q = 0; q < times.size(); ++q) {
                p[q] = cir::pulse_value(r.cir[i], s.proto.t_inj, times[q] - start, n_sub);
                if (times[q] >= w.begin && times[q] < w.end && p[q] > 0.0)
                    amplitude = std::min(amplitude, (1.0 - c[q]) / p[q]);
            }
            if (!std::isfinite(amplitude))
                throw ConfigError("spacing", "calibration pulse does not reach the receiver within its window");
            for (std::size_t q = 0; q < times.size(); ++q) c[q] += amplitude * p[q];
        }
        IntensityTrace truth;
        truth.times = times;
        for (double v : c) {
            Vec3 x = Vec3::Zero();
            x[i] = v;
            truth.values.push_back(x);
        }
        optics::NoiseConfig noise = s.noise;
        noise.seed = detail::splitmix64(derive_seed(s.seed, SeedStream::calibration) + 1 + static_cast<std::uint64_t>(i));
        auto lookup = [&truth, rate = s.sample_rate](double t) -> Vec3 {
            return truth.values.at(static_cast<std::size_t>(std::llround(t * rate)));
        };
        rec.traces[i] = optics::sample_sensor(lookup, r.model, s.sample_rate, duration, noise);
        rec.truth[i] = std::move(truth);
    }
    return rec;
}

// ---------------------------------------------------------------------------
// Estimation

inline TraceFile run_estimate(const TraceFile& sensor, const optics::AbsorptionModel& model) {
    const auto est = unmix::build_estimator(model);
    const auto frames = to_frames(sensor);
    for (std::size_t k = 0; k < frames.size(); ++k)
        for (int j = 0; j < kChannels; ++j)
            if (!(frames[k].intensities[j] > 0.0))
                throw DomainError("non-positive intensity at data row " + std::to_string(k + 1) +
                                  " (t = " + format_double(frames[k].t) + "), channel " +
                                  std::to_string(kWavelengthsNm[j]) + " nm");
    return to_trace_file(unmix::estimate_trace(frames, est), sensor.scenario_hash);
}

// ---------------------------------------------------------------------------
// CIR fitting

/// Extracts one ink's isolated pulse from an intensity trace, with times
/// relative to the injection and optionally cut at `window_end`.
inline cir::SampledTrace pulse_segment(const IntensityTrace& trace, Ink ink, double injection_time,
                                       double window_end) {
    cir::SampledTrace seg;
    for (std::size_t k = 0; k < trace.size(); ++k) {
        const double t = trace.times[k];
        if (t < injection_time) continue;
        if (window_end > 0.0 && t >= window_end) break;
        seg.times.push_back(t - injection_time);
        seg.values.push_back(trace.values[k][index(ink)]);
    }
    return seg;
}

inline cir::CirParams fit_from_trace_file(const fs::path& trace_file, Ink ink, double injection_time,
                                          double window_end, double l_c, double v_max,
                                          const cir::FitGrid& grid, Diagnostics* diag) {
    const auto trace = to_intensity(load_trace(trace_file));
    const auto seg = pulse_segment(trace, ink, injection_time, window_end);
    return cir::fit_cir(seg, l_c, v_max, grid, diag).params;
}

struct FitReport {
    cir::FitResult fit;
    double normalization = 0.0;
    json body;
};

inline constexpr double kNormalizationTolerance = 1e-6;

/// Fit plus plot-ready overlay (measured vs fitted) and the fitted initial
/// radial distribution f(s) on 101 points of [0, 1].
inline FitReport run_fit_cir(const IntensityTrace& trace, Ink ink, double l_c, double v_max,
                             const cir::FitGrid& grid, double injection_time = 0.0,
                             double window_end = 0.0) {
    const auto seg = pulse_segment(trace, ink, injection_time, window_end);
    Diagnostics diag;
    FitReport rep;
    rep.fit = cir::fit_cir(seg, l_c, v_max, grid, &diag);
    const auto& p = rep.fit.params;
    std::vector<double> fitted(seg.size(), 0.0);
    if (p.scale_c > 0.0) fitted = cir::cir_series(p, seg.times, &diag).values;
    rep.normalization = cir::beta_pdf_mass(p.init);

    json j;
    j["format"] = "inkflow-cir-fit";
    j["version"] = 1;
    j["ink"] = kInkNames[index(ink)];
    j["alpha"] = p.init.alpha;
    j["beta"] = p.init.beta;
    j["scale_c"] = p.scale_c;
    j["mse"] = rep.fit.mse;
    j["grid_resolution"] = {rep.fit.alpha_resolution, rep.fit.beta_resolution};
    j["arrival_time_s"] = p.arrival_time();
    j["curve"] = {{"t_s", seg.times}, {"measured", seg.values}, {"fitted", fitted}};
    std::vector<double> s_grid = modem::linspace(0.0, 1.0, 101);
    json f = json::array();
    for (double s : s_grid) {
        const auto v = cir::beta_pdf(s, p.init);
        f.push_back(v.is_singular() ? json(nullptr) : json(v.value()));
    }
    j["initial_distribution"] = {{"s", s_grid}, {"f", f}};
    j["normalization"] = {{"integral", rep.normalization},
                          {"ok", std::abs(rep.normalization - 1.0) <= kNormalizationTolerance}};
    j["diagnostics"] = diagnostics_json(diag);
    rep.body = j;
    return rep;
}

// ---------------------------------------------------------------------------
// Detection and BER sweeps

struct LinkEvaluation {
    modem::SyncEstimate sync;          // preamble-anchored
    modem::SyncEstimate payload_sync;  // first payload window
};

inline LinkEvaluation synchronize(const ResolvedScenario& r, const IntensityTrace& trace) {
    LinkEvaluation ev;
    ev.sync = modem::synchronize(trace, r.scenario.proto, sync_config(r));
    ev.payload_sync = modem::payload_sync(ev.sync, r.scenario.proto.preamble_len);
    return ev;
}

inline json run_detect(const ResolvedScenario& r, const IntensityTrace& trace, std::size_t n_bits,
                       double tau, const std::optional<modem::BitMatrix>& tx = std::nullopt) {
    const auto ev = synchronize(r, trace);
    const auto report = modem::detect(trace, ev.payload_sync, n_bits, tau);
    json j = report_to_json(report);
    if (tx) {
        j["ber"] = modem::bit_error_rate(*tx, report.bits);
        j["bits_compared"] = kInks * tx->n_bits();
    }
    return j;
}

struct SweepRow {
    std::string scenario;
    double t_sym;
    double tau;
    double ber;
};

struct SweepSummary {
    std::string scenario;
    double t_sym = 0.0;
    double t_inj = 0.0;
    std::size_t bits_compared = 0;
    double min_ber = 1.0;
    double best_tau = 0.0;
    modem::SyncEstimate sync;
};

struct SweepTable {
    std::vector<SweepRow> rows;
    std::vector<SweepSummary> summary;
};

/// simulate -> estimate -> sync -> threshold sweep, per scenario. Payload
/// bits come from `bits` if given, else from each scenario's seed.
inline SweepTable run_ber_sweep(const std::vector<ResolvedScenario>& scenarios,
                                const std::optional<modem::BitMatrix>& bits,
                                std::span<const double> taus) {
    if (scenarios.empty()) throw ConfigError("scenarios", "need at least one scenario");
    if (taus.empty()) throw ConfigError("taus", "need at least one threshold");
    SweepTable table;
    for (const auto& r : scenarios) {
        const std::string& label = r.scenario.name;
        try {
            const auto tx = bits ? *bits : scenario_bits(r.scenario);
            const auto sim = simulate(r, tx);
            const auto est = unmix::build_estimator(r.model);
            const auto trace = unmix::estimate_trace(sim.frames, est);
            const auto ev = synchronize(r, trace);
            const auto sweep = modem::threshold_sweep(trace, ev.payload_sync, tx, taus);
            for (const auto& pt : sweep.points) table.rows.push_back({label, r.scenario.proto.t_sym, pt.tau, pt.ber});
            table.summary.push_back({label, r.scenario.proto.t_sym, r.scenario.proto.t_inj,
                                     kInks * tx.n_bits(), sweep.best_ber, sweep.best_tau, ev.sync});
        } catch (const SyncError& e) {
            throw SyncError("scenario '" + label + "': " + e.what());
        } catch (const DetectionError& e) {
            throw DetectionError("scenario '" + label + "': " + e.what());
        } catch (const SynthesisError& e) {
            throw SynthesisError("scenario '" + label + "': " + e.what(), e.truncated_events());
        }
    }
    return table;
}

inline void write_sweep_rows(std::ostream& os, const SweepTable& t) {
    os << "scenario,t_sym_s,tau,ber\n";
    for (const auto& r : t.rows)
        os << r.scenario << ',' << format_double(r.t_sym) << ',' << format_double(r.tau) << ','
           << format_double(r.ber) << '\n';
}

inline void write_sweep_summary(std::ostream& os, const SweepTable& t) {
    os << "scenario,t_sym_s,t_inj_s,bits_compared,min_ber,best_tau,sync_t_start_s,sync_t_sym_measured_s\n";
    for (const auto& s : t.summary)
        os << s.scenario << ',' << format_double(s.t_sym) << ',' << format_double(s.t_inj) << ','
           << s.bits_compared << ',' << format_double(s.min_ber) << ',' << format_double(s.best_tau) << ','
           << format_double(s.sync.t_start) << ',' << format_double(s.sync.t_sym_measured) << '\n';
}

}  // namespace inkflow::workbench

#endif
