// inkflow: command-line front end for the ink link simulator.
//
// Exit codes: 0 success, 1 usage, 2 config validation, 3 I/O, 4 numerical failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "inkflow/workbench/pipeline.hpp"

namespace fs = std::filesystem;
namespace wb = inkflow::workbench;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kConfig = 2, kIo = 3, kNumerical = 4 };

fs::path default_out_dir() {
    if (const char* env = std::getenv("INKFLOW_OUTPUT_DIR"); env && *env) return env;
    return ".";
}

// Shared scenario options: a file plus dotted-path overrides.
struct ScenarioOptions {
    std::string file;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<double> t_sym, t_inj, noise_rel, noise_abs;

    void add_to(CLI::App* app) {
        app->add_option("--scenario", file, "Scenario JSON file (defaults: evaluation parameters)");
        app->add_option("--set", sets, "Override a scenario field, e.g. protocol.t_sym_s=1");
        app->add_option("--seed", seed, "Scenario seed");
        app->add_option("--t-sym", t_sym, "Symbol period [s]");
        app->add_option("--t-inj", t_inj, "Injection time [s]");
        app->add_option("--noise-rel", noise_rel, "Relative sensor noise std");
        app->add_option("--noise-abs", noise_abs, "Absolute sensor noise std [counts]");
    }

    wb::LinkScenario load() const {
        json j = json::object();
        fs::path base;
        if (!file.empty()) {
            j = wb::load_json(file);
            base = fs::path(file).parent_path();
        }
        auto put = [&](const std::string& path, const json& value) {
            json* node = &j;
            std::stringstream ss(path);
            std::string key;
            std::vector<std::string> keys;
            while (std::getline(ss, key, '.')) keys.push_back(key);
            if (keys.empty()) throw inkflow::ConfigError(path, "empty override path");
            for (std::size_t k = 0; k + 1 < keys.size(); ++k) {
                if (!node->is_object()) throw inkflow::ConfigError(path, "not an object");
                node = &(*node)[keys[k]];
            }
            (*node)[keys.back()] = value;
        };
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw inkflow::ConfigError(s, "override must be path=value");
            const std::string path = s.substr(0, eq), text = s.substr(eq + 1);
            json value = json::parse(text, nullptr, false);
            if (value.is_discarded()) value = text;
            put(path, value);
        }
        if (seed) put("seed", *seed);
        if (t_sym) put("protocol.t_sym_s", *t_sym);
        if (t_inj) put("protocol.t_inj_s", *t_inj);
        if (noise_rel) put("noise.sigma_rel", *noise_rel);
        if (noise_abs) put("noise.sigma_abs_counts", *noise_abs);
        return wb::scenario_from_json(j, base);
    }
};

void print_derived(const wb::ResolvedScenario& r) {
    const auto& f = r.flow;
    std::cout << "scenario " << r.scenario.name << " [" << r.hash << "]\n"
              << "  v_avg = " << f.v_avg << " m/s, v_max = " << f.v_max << " m/s\n"
              << "  Re = " << f.reynolds << " (" << inkflow::hydro::to_string(f.regime) << "), Pe = " << f.peclet
              << "\n"
              << "  arrival time = " << f.arrival_time << " s\n";
    for (const auto& d : r.diagnostics.entries()) std::cout << "  warning [" << d.code << "]: " << d.message << "\n";
}

std::vector<double> parse_taus(const std::string& spec) {
    // "lo:hi:count" or a comma-separated list
    if (spec.find(':') != std::string::npos) {
        std::stringstream ss(spec);
        std::string a, b, c;
        std::getline(ss, a, ':');
        std::getline(ss, b, ':');
        std::getline(ss, c, ':');
        const double lo = wb::parse_double(a, "--taus"), hi = wb::parse_double(b, "--taus");
        const double n = wb::parse_double(c, "--taus");
        if (!(n >= 1.0)) throw inkflow::ConfigError("--taus", "count must be >= 1");
        return inkflow::modem::linspace(lo, hi, static_cast<std::size_t>(n));
    }
    std::vector<double> out;
    for (auto part : wb::split(spec, ',')) out.push_back(wb::parse_double(part, "--taus"));
    if (out.empty()) throw inkflow::ConfigError("--taus", "empty threshold list");
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"inkflow - multi-ink flow channel link simulator and receiver toolkit"};
    app.require_subcommand(1);

    // simulate ---------------------------------------------------------------
    ScenarioOptions sim_opts;
    std::string sim_bits, sim_out;
    auto* sim = app.add_subcommand("simulate", "Simulate a transmission: sensor + ground-truth traces");
    sim_opts.add_to(sim);
    sim->add_option("--bits", sim_bits, "Payload bit file (default: seeded balanced random bits)");
    sim->add_option("--out", sim_out, "Output directory (default: $INKFLOW_OUTPUT_DIR or .)");

    // simulate-calibration -----------------------------------------------------
    ScenarioOptions cal_sim_opts;
    std::size_t cal_np = 30;
    double cal_spacing = 10.0;
    std::string cal_sim_out;
    auto* cal_sim = app.add_subcommand("simulate-calibration", "Simulate single-ink calibration pulse trains");
    cal_sim_opts.add_to(cal_sim);
    cal_sim->add_option("--pulses", cal_np, "Calibration pulses per ink")->check(CLI::PositiveNumber);
    cal_sim->add_option("--spacing", cal_spacing, "Pulse spacing [s]")->check(CLI::PositiveNumber);
    cal_sim->add_option("--out", cal_sim_out, "Output directory");

    // calibrate ----------------------------------------------------------------
    std::string cal_files[3], cal_windows, cal_out;
    auto* cal = app.add_subcommand("calibrate", "Estimate the absorption matrix from single-ink pulse traces");
    cal->add_option("--cyan", cal_files[0], "Cyan pulse sensor trace")->required();
    cal->add_option("--magenta", cal_files[1], "Magenta pulse sensor trace")->required();
    cal->add_option("--yellow", cal_files[2], "Yellow pulse sensor trace")->required();
    cal->add_option("--windows", cal_windows, "Pulse/reference window file")->required();
    cal->add_option("--out", cal_out, "Calibration file to write (default: <out dir>/calibration.json)");

    // estimate -----------------------------------------------------------------
    std::string est_trace, est_cal, est_out;
    auto* est = app.add_subcommand("estimate", "Convert a sensor trace into ink intensities");
    est->add_option("--trace", est_trace, "Sensor trace")->required();
    est->add_option("--calibration", est_cal, "Calibration file (default: built-in synthetic model)");
    est->add_option("--out", est_out, "Intensity trace to write (default: <out dir>/estimate.csv)");

    // fit-cir ------------------------------------------------------------------
    ScenarioOptions fit_opts;
    std::string fit_trace, fit_ink = "cyan", fit_out;
    double fit_inj = 0.0, fit_end = 0.0;
    inkflow::cir::FitGrid grid;
    auto* fit = app.add_subcommand("fit-cir", "Fit (alpha, beta, C) to an isolated pulse");
    fit_opts.add_to(fit);
    fit->add_option("--trace", fit_trace, "Intensity trace")->required();
    fit->add_option("--ink", fit_ink, "cyan | magenta | yellow");
    fit->add_option("--injection-time", fit_inj, "Pulse release time within the trace [s]");
    fit->add_option("--window-end", fit_end, "Ignore samples at or after this time [s]");
    fit->add_option("--alpha-min", grid.alpha_lo);
    fit->add_option("--alpha-max", grid.alpha_hi);
    fit->add_option("--alpha-steps", grid.alpha_steps);
    fit->add_option("--beta-min", grid.beta_lo);
    fit->add_option("--beta-max", grid.beta_hi);
    fit->add_option("--beta-steps", grid.beta_steps);
    fit->add_option("--out", fit_out, "Report to write (default: <out dir>/fit_<ink>.json)");

    // detect -------------------------------------------------------------------
    ScenarioOptions det_opts;
    std::string det_trace, det_tx, det_out;
    std::size_t det_n = 0;
    double det_tau = 0.5;
    auto* det = app.add_subcommand("detect", "Synchronize and run the difference detector");
    det_opts.add_to(det);
    det->add_option("--trace", det_trace, "Intensity trace")->required();
    det->add_option("--tau", det_tau, "Detection threshold");
    det->add_option("--n-bits", det_n, "Payload bits per ink (default: from --tx)");
    det->add_option("--tx", det_tx, "Transmitted bit file, for BER");
    det->add_option("--out", det_out, "Report to write (default: <out dir>/detection.json)");

    // ber-sweep ----------------------------------------------------------------
    std::vector<std::string> sweep_files;
    std::vector<std::string> sweep_sets;
    std::string sweep_bits, sweep_taus = "0:1:101", sweep_out;
    auto* sweep = app.add_subcommand("ber-sweep", "BER versus threshold for one or more scenarios");
    sweep->add_option("--scenario", sweep_files, "Scenario files (repeatable)")->required();
    sweep->add_option("--set", sweep_sets, "Override applied to every scenario");
    sweep->add_option("--bits", sweep_bits, "Payload bit file shared by all scenarios");
    sweep->add_option("--taus", sweep_taus, "lo:hi:count or comma-separated thresholds");
    sweep->add_option("--out", sweep_out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }

    auto out_dir = [](const std::string& given) { return given.empty() ? default_out_dir() : fs::path(given); };

    try {
        if (*sim) {
            const auto r = wb::resolve(sim_opts.load());
            print_derived(r);
            const auto bits = sim_bits.empty() ? wb::scenario_bits(r.scenario) : wb::load_bits(sim_bits);
            const auto dir = out_dir(sim_out);
            const auto res = wb::run_simulate(r, bits, dir);
            std::cout << "wrote " << res.frames.size() << " frames (" << res.duration << " s) to " << dir.string()
                      << "\n";
        } else if (*cal_sim) {
            const auto r = wb::resolve(cal_sim_opts.load());
            print_derived(r);
            const auto rec = wb::simulate_calibration(r, cal_np, cal_spacing);
            const auto dir = out_dir(cal_sim_out);
            for (int i = 0; i < inkflow::kInks; ++i) {
                wb::save_trace(dir / (std::string(inkflow::kInkNames[i]) + ".csv"), wb::to_trace_file(rec.traces[i], r.hash));
            }
            wb::save_json(dir / "windows.json", wb::windows_to_json(rec.windows));
            std::cout << "wrote " << cal_np << " pulses per ink to " << dir.string() << "\n";
        } else if (*cal) {
            std::array<std::vector<inkflow::optics::SpectralFrame>, inkflow::kInks> traces;
            for (int i = 0; i < inkflow::kInks; ++i) traces[i] = wb::to_frames(wb::load_trace(cal_files[i]));
            const auto windows = wb::windows_from_json(wb::load_json(cal_windows), cal_windows);
            const auto res = wb::run_calibrate(traces, windows);
            const fs::path path = cal_out.empty() ? default_out_dir() / "calibration.json" : fs::path(cal_out);
            wb::save_calibration(path, res.model, res.condition);
            std::cout << "condition number " << res.condition << "\nwrote " << path.string() << "\n";
        } else if (*est) {
            const auto model =
                est_cal.empty() ? inkflow::optics::default_absorption_model() : wb::load_calibration(est_cal);
            const auto out = wb::run_estimate(wb::load_trace(est_trace), model);
            const fs::path path = est_out.empty() ? default_out_dir() / "estimate.csv" : fs::path(est_out);
            wb::save_trace(path, out);
            std::cout << "wrote " << out.times.size() << " rows to " << path.string() << "\n";
        } else if (*fit) {
            const auto r = wb::resolve(fit_opts.load());
            const auto ink = inkflow::parse_ink(fit_ink);
            const auto trace = wb::to_intensity(wb::load_trace(fit_trace));
            const auto rep = wb::run_fit_cir(trace, ink, r.scenario.geometry.l_c, r.flow.v_max, grid, fit_inj, fit_end);
            const fs::path path = fit_out.empty() ? default_out_dir() / ("fit_" + std::string(inkflow::kInkNames[inkflow::index(ink)]) + ".json")
                                                  : fs::path(fit_out);
            wb::save_json(path, rep.body);
            std::cout << "alpha = " << rep.fit.params.init.alpha << ", beta = " << rep.fit.params.init.beta
                      << ", C = " << rep.fit.params.scale_c << ", mse = " << rep.fit.mse << "\nwrote " << path.string()
                      << "\n";
        } else if (*det) {
            const auto r = wb::resolve(det_opts.load());
            const auto trace = wb::to_intensity(wb::load_trace(det_trace));
            std::optional<inkflow::modem::BitMatrix> tx;
            if (!det_tx.empty()) tx = wb::load_bits(det_tx);
            const std::size_t n = det_n ? det_n : (tx ? tx->n_bits() : 0);
            if (n == 0) throw inkflow::ConfigError("--n-bits", "give --n-bits or --tx");
            const auto report = wb::run_detect(r, trace, n, det_tau, tx);
            const fs::path path = det_out.empty() ? default_out_dir() / "detection.json" : fs::path(det_out);
            wb::save_json(path, report);
            if (report.contains("ber")) std::cout << "BER = " << report["ber"].get<double>() << "\n";
            std::cout << "wrote " << path.string() << "\n";
        } else if (*sweep) {
            std::vector<wb::ResolvedScenario> scenarios;
            for (const auto& f : sweep_files) {
                ScenarioOptions o;
                o.file = f;
                o.sets = sweep_sets;
                scenarios.push_back(wb::resolve(o.load()));
            }
            std::optional<inkflow::modem::BitMatrix> bits;
            if (!sweep_bits.empty()) bits = wb::load_bits(sweep_bits);
            const auto taus = parse_taus(sweep_taus);
            const auto table = wb::run_ber_sweep(scenarios, bits, taus);
            const auto dir = out_dir(sweep_out);
            {
                auto os = wb::open_out(dir / "ber_sweep.csv");
                wb::write_sweep_rows(os, table);
            }
            {
                auto os = wb::open_out(dir / "ber_summary.csv");
                wb::write_sweep_summary(os, table);
            }
            for (const auto& s : table.summary)
                std::cout << s.scenario << ": T_sym = " << s.t_sym << " s, min BER = " << s.min_ber << " at tau = "
                          << s.best_tau << " (" << s.bits_compared << " bits)\n";
            std::cout << "wrote " << (dir / "ber_sweep.csv").string() << ", " << (dir / "ber_summary.csv").string()
                      << "\n";
        }
    } catch (const inkflow::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        switch (e.error_class()) {
        case inkflow::ErrorClass::config: return kConfig;
        case inkflow::ErrorClass::io: return kIo;
        case inkflow::ErrorClass::numerical: return kNumerical;
        }
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumerical;
    }
    return kOk;
}
