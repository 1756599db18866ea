#ifndef INKFLOW_WORKBENCH_FORMATS_HPP
#define INKFLOW_WORKBENCH_FORMATS_HPP

// Text file formats: trace CSV files with a versioned '#' header block,
// calibration files, bit files and small helpers shared by the pipeline.
//
// Trace files look like
//
//   # inkflow-trace 1
//   # kind: sensor
//   # units: s,counts,counts,counts,counts,counts,counts,counts,counts
//   # scenario: 9f3c0d1e22a4b7c8
//   t,ch415,ch445,ch480,ch515,ch555,ch590,ch630,ch680
//   0,1200.5,2099.1,...
//
// Numbers are written in shortest round-trip form, so parse(write(x)) == x.
// The '#' block is optional on input; the column header decides the kind.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "inkflow/modem.hpp"
#include "inkflow/optics.hpp"
#include "inkflow/unmixing.hpp"

namespace inkflow::workbench {

inline constexpr int kTraceFormatVersion = 1;
inline constexpr int kCalibrationFormatVersion = 1;

enum class TraceKind { sensor, intensity };

inline const char* to_string(TraceKind k) { return k == TraceKind::sensor ? "sensor" : "intensity"; }

struct TraceFile {
    TraceKind kind = TraceKind::sensor;
    std::string scenario_hash;  // empty for external recordings
    std::vector<double> times;
    std::vector<std::vector<double>> rows;  // 8 or 3 values per row

    std::size_t width() const { return kind == TraceKind::sensor ? kChannels : kInks; }
    friend bool operator==(const TraceFile&, const TraceFile&) = default;
};

inline std::vector<std::string> column_names(TraceKind kind) {
    std::vector<std::string> cols{"t"};
    if (kind == TraceKind::sensor)
        for (int nm : kWavelengthsNm) cols.push_back("ch" + std::to_string(nm));
    else
        for (const char* ink : kInkNames) cols.emplace_back(ink);
    return cols;
}

inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& where) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw IoError(where + ": not a number: '" + std::string(s) + "'");
    return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const auto next = line.find(sep, pos);
        out.push_back(line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    return out;
}

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline void write_trace(std::ostream& os, const TraceFile& tf) {
    os << "# inkflow-trace " << kTraceFormatVersion << "\n";
    os << "# kind: " << to_string(tf.kind) << "\n";
    os << "# units: s";
    for (std::size_t c = 0; c < tf.width(); ++c) os << (tf.kind == TraceKind::sensor ? ",counts" : ",1");
    os << "\n";
    if (!tf.scenario_hash.empty()) os << "# scenario: " << tf.scenario_hash << "\n";
    const auto cols = column_names(tf.kind);
    for (std::size_t c = 0; c < cols.size(); ++c) os << (c ? "," : "") << cols[c];
    os << "\n";
    for (std::size_t k = 0; k < tf.times.size(); ++k) {
        os << format_double(tf.times[k]);
        for (double v : tf.rows[k]) os << ',' << format_double(v);
        os << '\n';
    }
}

inline TraceFile read_trace(std::istream& is, const std::string& name = "trace") {
    TraceFile tf;
    std::string line;
    std::size_t lineno = 0;
    bool have_columns = false;
    std::map<std::string, std::string> meta;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string where = name + ":" + std::to_string(lineno);
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t[0] == '#') {
            const std::string body = trim(std::string_view(t).substr(1));
            if (body.rfind("inkflow-trace", 0) == 0) {
                const int version = static_cast<int>(parse_double(trim(body.substr(13)), where));
                if (version != kTraceFormatVersion)
                    throw IoError(where + ": unsupported trace format version " + std::to_string(version));
                continue;
            }
            const auto colon = body.find(':');
            if (colon != std::string::npos)
                meta[trim(body.substr(0, colon))] = trim(body.substr(colon + 1));
            continue;
        }
        if (!have_columns) {
            std::vector<std::string> cols;
            for (auto c : split(t, ',')) cols.push_back(trim(c));
            if (cols == column_names(TraceKind::sensor))
                tf.kind = TraceKind::sensor;
            else if (cols == column_names(TraceKind::intensity))
                tf.kind = TraceKind::intensity;
            else
                throw IoError(where + ": unrecognized column header '" + t + "'");
            if (auto it = meta.find("kind"); it != meta.end() && it->second != to_string(tf.kind))
                throw IoError(where + ": declared kind '" + it->second + "' does not match columns");
            have_columns = true;
            continue;
        }
        const auto fields = split(t, ',');
        if (fields.size() != tf.width() + 1)
            throw IoError(where + ": expected " + std::to_string(tf.width() + 1) + " columns, got " +
                          std::to_string(fields.size()));
        const double time = parse_double(fields[0], where);
        if (!tf.times.empty() && !(time > tf.times.back()))
            throw IoError(where + ": timestamps must be strictly increasing");
        tf.times.push_back(time);
        std::vector<double> row;
        row.reserve(tf.width());
        for (std::size_t c = 1; c < fields.size(); ++c) row.push_back(parse_double(fields[c], where));
        tf.rows.push_back(std::move(row));
    }
    if (!have_columns) throw IoError(name + ": missing column header");
    if (auto it = meta.find("scenario"); it != meta.end()) tf.scenario_hash = it->second;
    return tf;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
    if (p.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(p.parent_path(), ec);
    }
    std::ofstream os(p, std::ios::binary);
    if (!os) throw IoError("cannot open '" + p.string() + "' for writing");
    return os;
}

inline std::ifstream open_in(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw IoError("cannot open '" + p.string() + "'");
    return is;
}

inline void save_trace(const std::filesystem::path& p, const TraceFile& tf) {
    auto os = open_out(p);
    write_trace(os, tf);
    if (!os) throw IoError("write failed: " + p.string());
}

inline TraceFile load_trace(const std::filesystem::path& p) {
    auto is = open_in(p);
    return read_trace(is, p.string());
}

inline TraceFile to_trace_file(const std::vector<optics::SpectralFrame>& frames, std::string hash = {}) {
    TraceFile tf;
    tf.kind = TraceKind::sensor;
    tf.scenario_hash = std::move(hash);
    for (const auto& f : frames) {
        tf.times.push_back(f.t);
        tf.rows.emplace_back(f.intensities.data(), f.intensities.data() + kChannels);
    }
    return tf;
}

inline TraceFile to_trace_file(const IntensityTrace& trace, std::string hash = {}) {
    TraceFile tf;
    tf.kind = TraceKind::intensity;
    tf.scenario_hash = std::move(hash);
    tf.times = trace.times;
    for (const auto& v : trace.values) tf.rows.emplace_back(v.data(), v.data() + kInks);
    return tf;
}

inline std::vector<optics::SpectralFrame> to_frames(const TraceFile& tf) {
    if (tf.kind != TraceKind::sensor) throw IoError("expected a sensor trace (8 channels)");
    std::vector<optics::SpectralFrame> frames(tf.times.size());
    for (std::size_t k = 0; k < frames.size(); ++k) {
        frames[k].t = tf.times[k];
        for (int j = 0; j < kChannels; ++j) frames[k].intensities[j] = tf.rows[k][j];
    }
    return frames;
}

inline IntensityTrace to_intensity(const TraceFile& tf) {
    if (tf.kind != TraceKind::intensity) throw IoError("expected an intensity trace (3 inks)");
    IntensityTrace trace;
    trace.times = tf.times;
    for (const auto& r : tf.rows) trace.values.emplace_back(r[0], r[1], r[2]);
    return trace;
}

// ---------------------------------------------------------------------------
// Calibration file: JSON, i0 plus B row-major (one row per channel).

inline nlohmann::json calibration_to_json(const optics::AbsorptionModel& m, double condition) {
    nlohmann::json j;
    j["format"] = "inkflow-calibration";
    j["version"] = kCalibrationFormatVersion;
    j["channels_nm"] = kWavelengthsNm;
    j["inks"] = kInkNames;
    std::vector<double> i0(m.i0.data(), m.i0.data() + kChannels);
    j["i0_counts"] = i0;
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < kChannels; ++r) rows.push_back({m.b(r, 0), m.b(r, 1), m.b(r, 2)});
    j["absorption"] = rows;
    j["condition_number"] = condition;
    return j;
}

inline optics::AbsorptionModel calibration_from_json(const nlohmann::json& j, const std::string& name) {
    try {
        if (j.at("format").get<std::string>() != "inkflow-calibration")
            throw IoError(name + ": not an inkflow calibration file");
        if (j.at("version").get<int>() != kCalibrationFormatVersion)
            throw IoError(name + ": unsupported calibration version");
        const auto i0 = j.at("i0_counts").get<std::vector<double>>();
        const auto rows = j.at("absorption").get<std::vector<std::vector<double>>>();
        if (i0.size() != kChannels || rows.size() != kChannels)
            throw IoError(name + ": expected 8 channels");
        optics::AbsorptionModel m;
        for (int r = 0; r < kChannels; ++r) {
            if (rows[r].size() != kInks) throw IoError(name + ": expected 3 absorption columns");
            m.i0[r] = i0[r];
            for (int c = 0; c < kInks; ++c) m.b(r, c) = rows[r][c];
        }
        m.validate();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(name + ": " + e.what());
    } catch (const DomainError& e) {
        throw IoError(name + ": " + e.what());
    }
}

inline void save_json(const std::filesystem::path& p, const nlohmann::json& j) {
    auto os = open_out(p);
    os << j.dump(2) << '\n';
    if (!os) throw IoError("write failed: " + p.string());
}

inline nlohmann::json load_json(const std::filesystem::path& p) {
    auto is = open_in(p);
    try {
        return nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(p.string() + ": " + e.what());
    }
}

inline void save_calibration(const std::filesystem::path& p, const optics::AbsorptionModel& m,
                             double condition) {
    save_json(p, calibration_to_json(m, condition));
}

inline optics::AbsorptionModel load_calibration(const std::filesystem::path& p) {
    return calibration_from_json(load_json(p), p.string());
}

// ---------------------------------------------------------------------------
// Bit files: one line of 0/1 characters per ink, optionally prefixed with
// "cyan:" etc.; '#' starts a comment.

inline void write_bits(std::ostream& os, const modem::BitMatrix& bits) {
    for (int i = 0; i < kInks; ++i) {
        os << kInkNames[i] << ": ";
        for (auto b : bits.bits[i]) os << static_cast<char>('0' + b);
        os << '\n';
    }
}

inline modem::BitMatrix read_bits(std::istream& is, const std::string& name = "bits") {
    modem::BitMatrix m;
    std::string line;
    int ink = 0;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string t = trim(line.substr(0, line.find('#')));
        if (t.empty()) continue;
        if (ink >= kInks) throw IoError(name + ":" + std::to_string(lineno) + ": more than 3 bit rows");
        if (const auto colon = t.find(':'); colon != std::string::npos) {
            if (parse_ink(trim(t.substr(0, colon))) != static_cast<Ink>(ink))
                throw IoError(name + ":" + std::to_string(lineno) + ": rows must be ordered cyan, magenta, yellow");
            t = trim(t.substr(colon + 1));
        }
        for (char ch : t) {
            if (ch == ' ') continue;
            if (ch != '0' && ch != '1')
                throw IoError(name + ":" + std::to_string(lineno) + ": invalid bit character '" +
                              std::string(1, ch) + "'");
            m.bits[ink].push_back(static_cast<std::uint8_t>(ch - '0'));
        }
        ++ink;
    }
    if (ink != kInks) throw IoError(name + ": expected 3 bit rows");
    try {
        m.validate();
    } catch (const DomainError& e) {
        throw IoError(name + ": " + e.what());
    }
    return m;
}

inline void save_bits(const std::filesystem::path& p, const modem::BitMatrix& bits) {
    auto os = open_out(p);
    write_bits(os, bits);
}

inline modem::BitMatrix load_bits(const std::filesystem::path& p) {
    auto is = open_in(p);
    return read_bits(is, p.string());
}

// ---------------------------------------------------------------------------
// Detection report: JSON with per-symbol deltas for debugging.

inline nlohmann::json report_to_json(const modem::DetectionReport& r) {
    nlohmann::json j;
    j["format"] = "inkflow-detection";
    j["version"] = 1;
    j["tau"] = r.tau;
    j["sync"] = {{"t_start_s", r.sync.t_start},
                 {"t_sym_s", r.sync.t_sym},
                 {"t_sym_measured_s", r.sync.t_sym_measured}};
    for (int i = 0; i < kInks; ++i) {
        std::string s;
        for (auto b : r.bits.bits[i]) s.push_back(static_cast<char>('0' + b));
        j["inks"][kInkNames[i]] = {{"bits", s}, {"deltas", r.deltas[i]}};
    }
    return j;
}

inline modem::DetectionReport report_from_json(const nlohmann::json& j) {
    modem::DetectionReport r;
    try {
        r.tau = j.at("tau").get<double>();
        r.sync.t_start = j.at("sync").at("t_start_s").get<double>();
        r.sync.t_sym = j.at("sync").at("t_sym_s").get<double>();
        r.sync.t_sym_measured = j.at("sync").at("t_sym_measured_s").get<double>();
        for (int i = 0; i < kInks; ++i) {
            const auto& ink = j.at("inks").at(kInkNames[i]);
            for (char ch : ink.at("bits").get<std::string>())
                r.bits.bits[i].push_back(static_cast<std::uint8_t>(ch - '0'));
            r.deltas[i] = ink.at("deltas").get<std::vector<double>>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("detection report: ") + e.what());
    }
    return r;
}

// 64-bit FNV-1a; stable across platforms, used for scenario hashes.
inline std::string fnv1a_hex(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int k = 15; k >= 0; --k, h >>= 4) out[static_cast<std::size_t>(k)] = digits[h & 0xf];
    return out;
}

}  // namespace inkflow::workbench

#endif
