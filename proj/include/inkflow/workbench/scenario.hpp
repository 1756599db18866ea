#ifndef INKFLOW_WORKBENCH_SCENARIO_HPP
#define INKFLOW_WORKBENCH_SCENARIO_HPP

// Declarative link scenario. Config files are JSON with the unit in every
// key name (diameter_mm, q0_ml_per_min, ...); values are converted to SI
// on ingestion. Missing fields take the evaluation defaults below.

#include <array>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "inkflow/cir_model.hpp"
#include "inkflow/hydrodynamics.hpp"
#include "inkflow/modem.hpp"
#include "inkflow/optics.hpp"
#include "inkflow/workbench/formats.hpp"

namespace inkflow::workbench {

struct CirSpec {
    enum class Source { params, fit_from_trace };
    Source source = Source::params;
    double alpha = 3.0;
    double beta = 4.0;
    std::optional<double> scale_c;  // unset: unit instantaneous peak
    // fit_from_trace
    std::filesystem::path trace;
    double injection_time = 0.0;  // pulse release time in the trace [s]
    double window_end = 0.0;      // > 0: only samples before this time are fitted
};

struct SyncSpec {
    double peak_fraction = 0.5;
    double min_separation = 0.5;
    double window_guard = 0.1;  // [s]
    double search_horizon = 0.0;
    modem::PeriodSource period = modem::PeriodSource::estimated;
};

struct LinkScenario {
    std::string name = "scenario";
    hydro::ChannelGeometry geometry;
    hydro::FlowParams flow;
    std::array<CirSpec, kInks> cir;
    std::filesystem::path calibration_file;  // empty: synthetic default model
    optics::NoiseConfig noise;
    modem::ProtocolParams proto;
    modem::MumoPerturbation perturb;
    SyncSpec sync;
    double sample_rate = 19.0;  // [Hz]
    double tail = 10.0;         // simulated time after the last injection [s]
    std::size_t payload_bits = 100;
    std::uint64_t seed = 1;

    LinkScenario() {
        cir[0].alpha = 3.4;
        cir[0].beta = 4.6;
    }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

class Reader {
public:
    Reader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_, "expected an object");
    }

    std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

    bool has(const char* key) const { return j_.contains(key); }

    Reader child(const char* key) const {
        static const nlohmann::json empty = nlohmann::json::object();
        return Reader(j_.contains(key) ? j_.at(key) : empty, field(key));
    }

    double number(const char* key, double fallback) const {
        if (!j_.contains(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_number()) throw ConfigError(field(key), "expected a number");
        return v.get<double>();
    }

    double positive(const char* key, double fallback) const {
        const double v = number(key, fallback);
        if (!(v > 0.0)) throw ConfigError(field(key), "must be > 0");
        return v;
    }

    double non_negative(const char* key, double fallback) const {
        const double v = number(key, fallback);
        if (!(v >= 0.0)) throw ConfigError(field(key), "must be >= 0");
        return v;
    }

    std::uint64_t integer(const char* key, std::uint64_t fallback) const {
        if (!j_.contains(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_number_integer() || v.get<long long>() < 0)
            throw ConfigError(field(key), "expected a non-negative integer");
        return v.get<std::uint64_t>();
    }

    bool boolean(const char* key, bool fallback) const {
        if (!j_.contains(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_boolean()) throw ConfigError(field(key), "expected true or false");
        return v.get<bool>();
    }

    std::string string(const char* key, const std::string& fallback) const {
        if (!j_.contains(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_string()) throw ConfigError(field(key), "expected a string");
        return v.get<std::string>();
    }

    const nlohmann::json& raw() const { return j_; }
    const std::string& path() const { return path_; }

private:
    const nlohmann::json& j_;
    std::string path_;
};

inline std::filesystem::path resolve_path(const std::string& p, const std::filesystem::path& base) {
    std::filesystem::path path(p);
    return (path.is_relative() && !base.empty()) ? base / path : path;
}

}  // namespace detail

inline constexpr double kMlPerMinToSi = 1e-6 / 60.0;

/// Parses a scenario. Relative paths are resolved against `base_dir`.
inline LinkScenario scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
    const detail::Reader root(j, "");
    LinkScenario s;
    s.name = root.string("name", s.name);

    const auto geo = root.child("geometry");
    s.geometry.d_c = geo.positive("diameter_mm", s.geometry.d_c * 1e3) * 1e-3;
    s.geometry.l_c = geo.positive("length_cm", s.geometry.l_c * 1e2) * 1e-2;
    s.geometry.l_rx = geo.positive("rx_length_mm", s.geometry.l_rx * 1e3) * 1e-3;

    const auto flow = root.child("flow");
    s.flow.q0 = flow.positive("q0_ml_per_min", s.flow.q0 / kMlPerMinToSi) * kMlPerMinToSi;
    s.flow.nu = flow.positive("nu_m2_per_s", s.flow.nu);
    s.flow.diff_coeff = flow.positive("diffusion_m2_per_s", s.flow.diff_coeff);

    const auto cir = root.child("cir");
    for (int i = 0; i < kInks; ++i) {
        const auto ink = cir.child(kInkNames[i]);
        CirSpec& spec = s.cir[i];
        if (ink.has("fit_from_trace")) {
            spec.source = CirSpec::Source::fit_from_trace;
            spec.trace = detail::resolve_path(ink.string("fit_from_trace", ""), base_dir);
            spec.injection_time = ink.non_negative("injection_time_s", 0.0);
            spec.window_end = ink.non_negative("window_end_s", 0.0);
            continue;
        }
        spec.alpha = ink.positive("alpha", spec.alpha);
        spec.beta = ink.positive("beta", spec.beta);
        if (ink.has("scale_c")) {
            if (ink.raw().at("scale_c").is_string()) {
                if (ink.string("scale_c", "") != "unit-peak")
                    throw ConfigError(ink.field("scale_c"), "expected a number or \"unit-peak\"");
            } else {
                spec.scale_c = ink.positive("scale_c", 1.0);
            }
        }
        if (!spec.scale_c && spec.alpha < 1.0)
            throw ConfigError(ink.field("alpha"), "unit-peak scaling needs alpha >= 1; give scale_c");
    }

    const auto optics = root.child("optics");
    const std::string source = optics.string("source", "synthetic-default");
    if (source == "file") {
        const std::string f = optics.string("calibration_file", "");
        if (f.empty()) throw ConfigError(optics.field("calibration_file"), "required when source is \"file\"");
        s.calibration_file = detail::resolve_path(f, base_dir);
    } else if (source != "synthetic-default") {
        throw ConfigError(optics.field("source"), "expected \"synthetic-default\" or \"file\"");
    }

    const auto noise = root.child("noise");
    s.noise.sigma_rel = noise.non_negative("sigma_rel", 0.0);
    s.noise.sigma_abs = noise.non_negative("sigma_abs_counts", 0.0);
    s.noise.floor = noise.positive("floor_counts", 1.0);
    s.noise.quantize = noise.boolean("quantize_16bit", false);

    const auto proto = root.child("protocol");
    s.proto.t_sym = proto.positive("t_sym_s", s.proto.t_sym);
    s.proto.t_inj = proto.non_negative("t_inj_s", s.proto.t_inj);
    if (s.proto.t_inj > s.proto.t_sym) throw ConfigError(proto.field("t_inj_s"), "must not exceed t_sym_s");
    s.proto.preamble_len = proto.integer("preamble_len", s.proto.preamble_len);
    if (s.proto.preamble_len < 1) throw ConfigError(proto.field("preamble_len"), "must be >= 1");
    s.proto.v_idle = proto.number("v_idle_V", s.proto.v_idle);
    s.proto.v_1 = proto.number("v_1_V", s.proto.v_1);
    s.proto.v_0 = proto.number("v_0_V", s.proto.v_0);

    const auto pert = root.child("perturbation");
    s.perturb.attenuation_mean = pert.non_negative("attenuation_mean", 0.0);
    if (s.perturb.attenuation_mean >= 1.0)
        throw ConfigError(pert.field("attenuation_mean"), "must be < 1");
    s.perturb.attenuation_jitter = pert.non_negative("attenuation_jitter", 0.0);
    s.perturb.misalignment_std = pert.non_negative("misalignment_std_s", 0.0);

    const auto sync = root.child("sync");
    s.sync.peak_fraction = sync.positive("peak_fraction", s.sync.peak_fraction);
    if (s.sync.peak_fraction > 1.0) throw ConfigError(sync.field("peak_fraction"), "must be <= 1");
    s.sync.min_separation = sync.non_negative("min_separation", s.sync.min_separation);
    s.sync.window_guard = sync.non_negative("window_guard_s", s.sync.window_guard);
    s.sync.search_horizon = sync.non_negative("search_horizon_s", s.sync.search_horizon);
    const std::string period = sync.string("period", "estimated");
    if (period == "nominal")
        s.sync.period = modem::PeriodSource::nominal;
    else if (period == "estimated")
        s.sync.period = modem::PeriodSource::estimated;
    else
        throw ConfigError(sync.field("period"), "expected \"estimated\" or \"nominal\"");

    s.sample_rate = root.positive("sample_rate_hz", s.sample_rate);
    s.tail = root.positive("tail_s", s.tail);
    s.payload_bits = root.integer("payload_bits", s.payload_bits);
    s.seed = root.integer("seed", s.seed);
    return s;
}

namespace detail {

// Unit conversions are rounded to 15 significant digits so that
// parse(to_json(s)) reproduces the same canonical form (0.9e-3 m -> 0.9 mm,
// not 0.9000000000000001).
inline double converted(double v) {
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 15);
    double out = v;
    std::from_chars(buf.data(), res.ptr, out);
    return out;
}

}  // namespace detail

/// Canonical form (fixed key order, SI-derived units as in the input schema).
inline nlohmann::json scenario_to_json(const LinkScenario& s) {
    using detail::converted;
    nlohmann::json j;
    j["name"] = s.name;
    j["geometry"] = {{"diameter_mm", converted(s.geometry.d_c * 1e3)},
                     {"length_cm", converted(s.geometry.l_c * 1e2)},
                     {"rx_length_mm", converted(s.geometry.l_rx * 1e3)}};
    j["flow"] = {{"q0_ml_per_min", converted(s.flow.q0 / kMlPerMinToSi)},
                 {"nu_m2_per_s", s.flow.nu},
                 {"diffusion_m2_per_s", s.flow.diff_coeff}};
    for (int i = 0; i < kInks; ++i) {
        const CirSpec& c = s.cir[i];
        nlohmann::json ink;
        if (c.source == CirSpec::Source::fit_from_trace) {
            ink["fit_from_trace"] = c.trace.generic_string();
            ink["injection_time_s"] = c.injection_time;
            ink["window_end_s"] = c.window_end;
        } else {
            ink["alpha"] = c.alpha;
            ink["beta"] = c.beta;
            if (c.scale_c)
                ink["scale_c"] = *c.scale_c;
            else
                ink["scale_c"] = "unit-peak";
        }
        j["cir"][kInkNames[i]] = ink;
    }
    if (s.calibration_file.empty())
        j["optics"] = {{"source", "synthetic-default"}};
    else
        j["optics"] = {{"source", "file"}, {"calibration_file", s.calibration_file.generic_string()}};
    j["noise"] = {{"sigma_rel", s.noise.sigma_rel},
                  {"sigma_abs_counts", s.noise.sigma_abs},
                  {"floor_counts", s.noise.floor},
                  {"quantize_16bit", s.noise.quantize}};
    j["protocol"] = {{"t_sym_s", s.proto.t_sym},   {"t_inj_s", s.proto.t_inj},
                     {"preamble_len", s.proto.preamble_len}, {"v_idle_V", s.proto.v_idle},
                     {"v_1_V", s.proto.v_1},       {"v_0_V", s.proto.v_0}};
    j["perturbation"] = {{"attenuation_mean", s.perturb.attenuation_mean},
                         {"attenuation_jitter", s.perturb.attenuation_jitter},
                         {"misalignment_std_s", s.perturb.misalignment_std}};
    j["sync"] = {{"peak_fraction", s.sync.peak_fraction},
                 {"min_separation", s.sync.min_separation},
                 {"window_guard_s", s.sync.window_guard},
                 {"search_horizon_s", s.sync.search_horizon},
                 {"period", s.sync.period == modem::PeriodSource::nominal ? "nominal" : "estimated"}};
    j["sample_rate_hz"] = s.sample_rate;
    j["tail_s"] = s.tail;
    j["payload_bits"] = s.payload_bits;
    j["seed"] = s.seed;
    return j;
}

inline std::string scenario_hash(const LinkScenario& s) { return fnv1a_hex(scenario_to_json(s).dump()); }

inline LinkScenario load_scenario(const std::filesystem::path& p) {
    return scenario_from_json(load_json(p), p.parent_path());
}

/// Independent RNG streams derived from the scenario seed.
enum class SeedStream : std::uint64_t { bits = 1, perturbation = 2, noise = 3, calibration = 4 };

inline std::uint64_t derive_seed(std::uint64_t seed, SeedStream stream) {
    return detail::splitmix64(seed ^ (static_cast<std::uint64_t>(stream) * 0xd1b54a32d192ed03ULL));
}

}  // namespace inkflow::workbench

#endif
