#pragma once

// Plain-text key=value configuration: spectral model and run settings.
//
// Every quantity carries its unit in the key name (_t tesla, _hz hertz,
// _s seconds). Unknown keys are rejected so typos cannot silently fall
// back to defaults.

#include "pedmr/analysis.hpp"
#include "pedmr/detector.hpp"
#include "pedmr/ensemble.hpp"
#include "pedmr/error.hpp"
#include "pedmr/io.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace pedmr {

/// Ordered key=value pairs with the line each key came from.
struct KeyValues {
    std::vector<std::pair<std::string, std::string>> entries;

    static KeyValues parse(std::istream& in, const std::string& origin)
    {
        KeyValues kv;
        std::map<std::string, int> seen;
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            std::string_view v = io::trim(line);
            if (line_no == 1 && v.starts_with("\xEF\xBB\xBF")) v = io::trim(v.substr(3));
            if (const auto hash = v.find('#'); hash != std::string_view::npos) v = io::trim(v.substr(0, hash));
            if (v.empty()) continue;
            const auto eq = v.find('=');
            const auto where = origin + ":" + std::to_string(line_no);
            if (eq == std::string_view::npos) throw ConfigError(where + ": expected key = value");
            std::string key(io::trim(v.substr(0, eq)));
            std::string value(io::trim(v.substr(eq + 1)));
            if (key.empty()) throw ConfigError(where + ": empty key");
            if (auto it = seen.find(key); it != seen.end()) {
                throw ConfigError(where + ": duplicate key '" + key + "' (first on line " + std::to_string(it->second) +
                                  ")");
            }
            seen[key] = line_no;
            kv.entries.emplace_back(std::move(key), std::move(value));
        }
        return kv;
    }

    static KeyValues load(const std::filesystem::path& path)
    {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open " + path.string());
        return parse(in, path.string());
    }
};

namespace detail {

inline double to_double(const std::string& key, const std::string& value)
{
    const auto d = io::parse_double(value);
    if (!d || !std::isfinite(*d)) throw ConfigError("key '" + key + "': '" + value + "' is not a finite number");
    return *d;
}

inline long long to_int(const std::string& key, const std::string& value)
{
    long long v = 0;
    const auto s = io::trim(value);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ConfigError("key '" + key + "': '" + value + "' is not an integer");
    }
    return v;
}

/// Applies spectral-model keys; returns false if the key is not one of them.
inline bool apply_spectral_key(SpectralModel& m, std::map<int, SpectralLine>& lines, std::map<int, int>& line_fields,
                               const std::string& key, const std::string& value)
{
    if (key == "f_mw_hz") {
        m.f_mw = to_double(key, value);
        return true;
    }
    if (key == "b1_t") {
        m.b1 = to_double(key, value);
        return true;
    }
    if (!key.starts_with("line")) return false;
    const auto dot = key.find('.');
    if (dot == std::string::npos) return false;
    const auto index = to_int(key, key.substr(4, dot - 4));
    if (index < 1) throw ConfigError("key '" + key + "': line index must be >= 1");
    auto& l = lines[static_cast<int>(index)];
    const auto field = key.substr(dot + 1);
    int bit = 0;
    if (field == "species") {
        const auto s = species_from_name(value);
        if (!s) throw ConfigError("key '" + key + "': unknown species '" + value + "'");
        l.species = *s;
        bit = 1;
    } else if (field == "g") {
        l.g_center = to_double(key, value);
        bit = 2;
    } else if (field == "offset_t") {
        l.field_offset = to_double(key, value);
        bit = 4;
    } else if (field == "fwhm_t") {
        l.fwhm = to_double(key, value);
        bit = 8;
    } else if (field == "weight") {
        l.weight = to_double(key, value);
        bit = 16;
    } else {
        throw ConfigError("key '" + key + "': unknown line field '" + field + "'");
    }
    line_fields[static_cast<int>(index)] |= bit;
    return true;
}

inline void finish_lines(SpectralModel& m, const std::map<int, SpectralLine>& lines,
                         const std::map<int, int>& line_fields)
{
    if (lines.empty()) return;
    m.lines.clear();
    for (const auto& [index, line] : lines) {
        // offset defaults to 0; everything else must be given
        if ((line_fields.at(index) | 4) != 31) {
            throw ConfigError("line" + std::to_string(index) + ": needs species, g, fwhm_t and weight");
        }
        m.lines.push_back(line);
    }
}

} // namespace detail

/// Spectral model from key=value text (f_mw_hz, b1_t, lineN.species/g/offset_t/fwhm_t/weight).
/// Without any lineN keys the standard four-line model is used.
inline SpectralModel spectral_model_from(const KeyValues& kv)
{
    SpectralModel m = SpectralModel::standard();
    std::map<int, SpectralLine> lines;
    std::map<int, int> fields;
    for (const auto& [k, v] : kv.entries) {
        if (!detail::apply_spectral_key(m, lines, fields, k, v)) {
            throw ConfigError("spectral model: unknown key '" + k + "'");
        }
    }
    detail::finish_lines(m, lines, fields);
    m.validate();
    return m;
}

inline std::string spectral_model_text(const SpectralModel& m)
{
    std::ostringstream os;
    os << "f_mw_hz = " << io::format_double(m.f_mw) << '\n';
    os << "b1_t = " << io::format_double(m.b1) << '\n';
    for (std::size_t i = 0; i < m.lines.size(); ++i) {
        const auto& l = m.lines[i];
        const auto p = "line" + std::to_string(i + 1) + '.';
        os << p << "species = " << species_name(l.species) << '\n';
        os << p << "g = " << io::format_double(l.g_center) << '\n';
        os << p << "offset_t = " << io::format_double(l.field_offset) << '\n';
        os << p << "fwhm_t = " << io::format_double(l.fwhm) << '\n';
        os << p << "weight = " << io::format_double(l.weight) << '\n';
    }
    return os.str();
}

struct RabiSettings {
    double b0 = 0.3512;
    double t_max = 600e-9;
    double step = 5e-9;
};

struct EchoMapSettings {
    double tau1 = 200e-9;
    double tau2_from = 0.0;
    double tau2_to = 900e-9;
    double tau2_step = 10e-9;
    double b0_from = 0.345;
    double b0_to = 0.353;
    double b0_step = 0.1e-3;
    double plateau_fraction = 0.25; ///< tail of the tau2 axis defining the plateau
};

enum class Background { None, Linear };

struct EchoDecaySettings {
    double b0 = 0.3512;
    double tau_from = 200e-9;
    double tau_to = 6e-6;
    double tau_step = 100e-9;
    /// The off-echo reference at the same total length uses
    /// tau1 = tau - offset, tau2 = tau + offset.
    double reference_offset = 150e-9;
    Background background = Background::Linear;
    double background_fraction = 0.25;
};

struct SpectrumSettings {
    double b0_from = 0.345;
    double b0_to = 0.353;
    double b0_step = 0.05e-3;
    double angle_deg = 180.0;
};

enum class FitModel { Monoexp, Gaussian };

struct FitSettings {
    FitModel model = FitModel::Monoexp;
    Background background = Background::None;
    double background_fraction = 0.25;
    bool weighted = false;
};

struct RunConfig {
    SpectralModel model = SpectralModel::standard();
    QuadratureSpec quad = [] {
        QuadratureSpec q;
        q.scheme = QuadratureSpec::Scheme::Grid;
        q.far_points = 0;
        return q;
    }();
    /// Set when the config file fixes far_points; otherwise each experiment
    /// picks its own default.
    bool far_points_explicit = false;
    PairParams pair = [] {
        PairParams p;
        p.r_s = 2.3e6;
        p.r_t = 1.0 / 140e-6;
        return p;
    }();
    TransientKernel kernel;
    BoxcarWindow window;
    unsigned threads = 1;

    RabiSettings rabi;
    EchoMapSettings echo_map;
    EchoDecaySettings echo_decay;
    SpectrumSettings spectrum;
    FitSettings fit;

    void validate() const
    {
        model.validate();
        quad.validate();
        pair.validate();
        kernel.validate();
        window.validate();
        auto positive = [](double v, const char* what) {
            if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(what) + " must be positive");
        };
        auto range = [&](double from, double to, double step, const char* what) {
            positive(step, what);
            if (!(to >= from) || !std::isfinite(from) || !std::isfinite(to)) {
                throw ConfigError(std::string(what) + ": need from <= to");
            }
        };
        positive(rabi.t_max, "rabi.t_max_s");
        positive(rabi.step, "rabi.step_s");
        range(echo_map.tau2_from, echo_map.tau2_to, echo_map.tau2_step, "echo_map.tau2 range");
        range(echo_map.b0_from, echo_map.b0_to, echo_map.b0_step, "echo_map.b0 range");
        if (echo_map.tau1 < 0.0 || echo_map.tau2_from < 0.0) throw ConfigError("echo_map: delays must be >= 0");
        if (!(echo_map.plateau_fraction > 0.0 && echo_map.plateau_fraction <= 1.0)) {
            throw ConfigError("echo_map.plateau_fraction must be in (0, 1]");
        }
        range(echo_decay.tau_from, echo_decay.tau_to, echo_decay.tau_step, "echo_decay.tau range");
        if (echo_decay.reference_offset < 0.0 || echo_decay.reference_offset > echo_decay.tau_from) {
            throw ConfigError("echo_decay.reference_offset_s must lie in [0, tau_from_s]");
        }
        if (!(echo_decay.background_fraction > 0.0 && echo_decay.background_fraction <= 1.0)) {
            throw ConfigError("echo_decay.background_fraction must be in (0, 1]");
        }
        range(spectrum.b0_from, spectrum.b0_to, spectrum.b0_step, "spectrum.b0 range");
        if (!(fit.background_fraction > 0.0 && fit.background_fraction <= 1.0)) {
            throw ConfigError("fit.background_fraction must be in (0, 1]");
        }
        if (threads < 1) throw ConfigError("threads must be >= 1");
    }

    /// Quadrature with the per-experiment far_points default applied.
    QuadratureSpec quadrature_for(int default_far_points) const
    {
        QuadratureSpec q = quad;
        if (!far_points_explicit) q.far_points = default_far_points;
        return q;
    }
};

namespace detail {

inline Background background_from(const std::string& key, const std::string& v)
{
    if (v == "none") return Background::None;
    if (v == "linear") return Background::Linear;
    throw ConfigError("key '" + key + "': expected none or linear");
}

inline std::string_view background_name(Background b)
{
    return b == Background::None ? "none" : "linear";
}

inline bool to_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("key '" + key + "': expected true or false");
}

} // namespace detail

/// Builds a RunConfig from key=value entries. A `spectral_model` key names a
/// file (relative to `base_dir`) with spectral-model keys; the same keys may
/// also appear inline and take precedence.
inline RunConfig run_config_from(const KeyValues& kv, const std::filesystem::path& base_dir = {})
{
    RunConfig c;
    std::map<int, SpectralLine> lines;
    std::map<int, int> fields;

    for (const auto& [k, v] : kv.entries) {
        if (k == "spectral_model") {
            auto path = std::filesystem::path(v);
            if (path.is_relative()) path = base_dir / path;
            c.model = spectral_model_from(KeyValues::load(path));
        }
    }

    using detail::to_double;
    const std::map<std::string, std::function<void(const std::string&, const std::string&)>> setters = {
        {"spectral_model", [](auto&, auto&) {}},
        {"quadrature",
         [&](auto& k, auto& v) {
             const auto s = scheme_from_name(v);
             if (!s) throw ConfigError("key '" + k + "': unknown scheme '" + v + "'");
             c.quad.scheme = *s;
         }},
        {"points", [&](auto& k, auto& v) { c.quad.points_per_spin = static_cast<int>(detail::to_int(k, v)); }},
        {"seed", [&](auto& k, auto& v) { c.quad.seed = static_cast<std::uint64_t>(detail::to_int(k, v)); }},
        {"far_points",
         [&](auto& k, auto& v) {
             c.quad.far_points = static_cast<int>(detail::to_int(k, v));
             c.far_points_explicit = true;
         }},
        {"revival_factor", [&](auto& k, auto& v) { c.quad.revival_factor = to_double(k, v); }},
        {"max_points_per_line",
         [&](auto& k, auto& v) { c.quad.max_points_per_line = static_cast<int>(detail::to_int(k, v)); }},
        {"threads",
         [&](auto& k, auto& v) {
             const auto t = detail::to_int(k, v);
             if (t < 1) throw ConfigError("threads must be >= 1");
             c.threads = static_cast<unsigned>(t);
         }},
        {"r_s", [&](auto& k, auto& v) { c.pair.r_s = to_double(k, v); }},
        {"r_t", [&](auto& k, auto& v) { c.pair.r_t = to_double(k, v); }},
        {"gamma_phi", [&](auto& k, auto& v) { c.pair.gamma_phi = to_double(k, v); }},
        {"j_ex", [&](auto& k, auto& v) { c.pair.j_ex = to_double(k, v); }},
        {"omega1_leak", [&](auto& k, auto& v) { c.pair.omega1_leak = to_double(k, v); }},
        {"kernel.tau_rise_s", [&](auto& k, auto& v) { c.kernel.tau_rise = to_double(k, v); }},
        {"kernel.tau_fall_s", [&](auto& k, auto& v) { c.kernel.tau_fall = to_double(k, v); }},
        {"kernel.tau_slow_s", [&](auto& k, auto& v) { c.kernel.tau_slow = to_double(k, v); }},
        {"kernel.overshoot", [&](auto& k, auto& v) { c.kernel.overshoot = to_double(k, v); }},
        {"kernel.gain", [&](auto& k, auto& v) { c.kernel.gain = to_double(k, v); }},
        {"boxcar.t_start_s", [&](auto& k, auto& v) { c.window.t_start = to_double(k, v); }},
        {"boxcar.t_end_s", [&](auto& k, auto& v) { c.window.t_end = to_double(k, v); }},
        {"rabi.b0_t", [&](auto& k, auto& v) { c.rabi.b0 = to_double(k, v); }},
        {"rabi.t_max_s", [&](auto& k, auto& v) { c.rabi.t_max = to_double(k, v); }},
        {"rabi.step_s", [&](auto& k, auto& v) { c.rabi.step = to_double(k, v); }},
        {"echo_map.tau1_s", [&](auto& k, auto& v) { c.echo_map.tau1 = to_double(k, v); }},
        {"echo_map.tau2_from_s", [&](auto& k, auto& v) { c.echo_map.tau2_from = to_double(k, v); }},
        {"echo_map.tau2_to_s", [&](auto& k, auto& v) { c.echo_map.tau2_to = to_double(k, v); }},
        {"echo_map.tau2_step_s", [&](auto& k, auto& v) { c.echo_map.tau2_step = to_double(k, v); }},
        {"echo_map.b0_from_t", [&](auto& k, auto& v) { c.echo_map.b0_from = to_double(k, v); }},
        {"echo_map.b0_to_t", [&](auto& k, auto& v) { c.echo_map.b0_to = to_double(k, v); }},
        {"echo_map.b0_step_t", [&](auto& k, auto& v) { c.echo_map.b0_step = to_double(k, v); }},
        {"echo_map.plateau_fraction", [&](auto& k, auto& v) { c.echo_map.plateau_fraction = to_double(k, v); }},
        {"echo_decay.b0_t", [&](auto& k, auto& v) { c.echo_decay.b0 = to_double(k, v); }},
        {"echo_decay.tau_from_s", [&](auto& k, auto& v) { c.echo_decay.tau_from = to_double(k, v); }},
        {"echo_decay.tau_to_s", [&](auto& k, auto& v) { c.echo_decay.tau_to = to_double(k, v); }},
        {"echo_decay.tau_step_s", [&](auto& k, auto& v) { c.echo_decay.tau_step = to_double(k, v); }},
        {"echo_decay.reference_offset_s",
         [&](auto& k, auto& v) { c.echo_decay.reference_offset = to_double(k, v); }},
        {"echo_decay.background",
         [&](auto& k, auto& v) { c.echo_decay.background = detail::background_from(k, v); }},
        {"echo_decay.background_fraction",
         [&](auto& k, auto& v) { c.echo_decay.background_fraction = to_double(k, v); }},
        {"spectrum.b0_from_t", [&](auto& k, auto& v) { c.spectrum.b0_from = to_double(k, v); }},
        {"spectrum.b0_to_t", [&](auto& k, auto& v) { c.spectrum.b0_to = to_double(k, v); }},
        {"spectrum.b0_step_t", [&](auto& k, auto& v) { c.spectrum.b0_step = to_double(k, v); }},
        {"spectrum.angle_deg", [&](auto& k, auto& v) { c.spectrum.angle_deg = to_double(k, v); }},
        {"fit.model",
         [&](auto& k, auto& v) {
             if (v == "monoexp") c.fit.model = FitModel::Monoexp;
             else if (v == "gaussian") c.fit.model = FitModel::Gaussian;
             else throw ConfigError("key '" + k + "': expected monoexp or gaussian");
         }},
        {"fit.background", [&](auto& k, auto& v) { c.fit.background = detail::background_from(k, v); }},
        {"fit.background_fraction", [&](auto& k, auto& v) { c.fit.background_fraction = to_double(k, v); }},
        {"fit.weighted", [&](auto& k, auto& v) { c.fit.weighted = detail::to_bool(k, v); }},
    };

    for (const auto& [k, v] : kv.entries) {
        if (auto it = setters.find(k); it != setters.end()) {
            it->second(k, v);
        } else if (!detail::apply_spectral_key(c.model, lines, fields, k, v)) {
            throw ConfigError("unknown configuration key '" + k + "'");
        }
    }
    detail::finish_lines(c.model, lines, fields);
    c.validate();
    return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path)
{
    return run_config_from(KeyValues::load(path), path.parent_path());
}

/// Every effective setting, one key per line, in a fixed order.
inline std::string resolved_config_text(const RunConfig& c)
{
    std::ostringstream os;
    auto d = [](double v) { return io::format_double(v); };
    os << "# resolved configuration\n";
    os << spectral_model_text(c.model);
    os << "quadrature = " << scheme_name(c.quad.scheme) << '\n';
    os << "points = " << c.quad.points_per_spin << '\n';
    os << "seed = " << c.quad.seed << '\n';
    if (c.far_points_explicit) os << "far_points = " << c.quad.far_points << '\n';
    os << "revival_factor = " << d(c.quad.revival_factor) << '\n';
    os << "max_points_per_line = " << c.quad.max_points_per_line << '\n';
    os << "threads = " << c.threads << '\n';
    os << "r_s = " << d(c.pair.r_s) << '\n';
    os << "r_t = " << d(c.pair.r_t) << '\n';
    os << "gamma_phi = " << d(c.pair.gamma_phi) << '\n';
    os << "j_ex = " << d(c.pair.j_ex) << '\n';
    os << "omega1_leak = " << d(c.pair.omega1_leak) << '\n';
    os << "kernel.tau_rise_s = " << d(c.kernel.tau_rise) << '\n';
    os << "kernel.tau_fall_s = " << d(c.kernel.tau_fall) << '\n';
    os << "kernel.tau_slow_s = " << d(c.kernel.tau_slow) << '\n';
    os << "kernel.overshoot = " << d(c.kernel.overshoot) << '\n';
    os << "kernel.gain = " << d(c.kernel.gain) << '\n';
    os << "boxcar.t_start_s = " << d(c.window.t_start) << '\n';
    os << "boxcar.t_end_s = " << d(c.window.t_end) << '\n';
    os << "rabi.b0_t = " << d(c.rabi.b0) << '\n';
    os << "rabi.t_max_s = " << d(c.rabi.t_max) << '\n';
    os << "rabi.step_s = " << d(c.rabi.step) << '\n';
    os << "echo_map.tau1_s = " << d(c.echo_map.tau1) << '\n';
    os << "echo_map.tau2_from_s = " << d(c.echo_map.tau2_from) << '\n';
    os << "echo_map.tau2_to_s = " << d(c.echo_map.tau2_to) << '\n';
    os << "echo_map.tau2_step_s = " << d(c.echo_map.tau2_step) << '\n';
    os << "echo_map.b0_from_t = " << d(c.echo_map.b0_from) << '\n';
    os << "echo_map.b0_to_t = " << d(c.echo_map.b0_to) << '\n';
    os << "echo_map.b0_step_t = " << d(c.echo_map.b0_step) << '\n';
    os << "echo_map.plateau_fraction = " << d(c.echo_map.plateau_fraction) << '\n';
    os << "echo_decay.b0_t = " << d(c.echo_decay.b0) << '\n';
    os << "echo_decay.tau_from_s = " << d(c.echo_decay.tau_from) << '\n';
    os << "echo_decay.tau_to_s = " << d(c.echo_decay.tau_to) << '\n';
    os << "echo_decay.tau_step_s = " << d(c.echo_decay.tau_step) << '\n';
    os << "echo_decay.reference_offset_s = " << d(c.echo_decay.reference_offset) << '\n';
    os << "echo_decay.background = " << detail::background_name(c.echo_decay.background) << '\n';
    os << "echo_decay.background_fraction = " << d(c.echo_decay.background_fraction) << '\n';
    os << "spectrum.b0_from_t = " << d(c.spectrum.b0_from) << '\n';
    os << "spectrum.b0_to_t = " << d(c.spectrum.b0_to) << '\n';
    os << "spectrum.b0_step_t = " << d(c.spectrum.b0_step) << '\n';
    os << "spectrum.angle_deg = " << d(c.spectrum.angle_deg) << '\n';
    os << "fit.model = " << (c.fit.model == FitModel::Monoexp ? "monoexp" : "gaussian") << '\n';
    os << "fit.background = " << detail::background_name(c.fit.background) << '\n';
    os << "fit.background_fraction = " << d(c.fit.background_fraction) << '\n';
    os << "fit.weighted = " << (c.fit.weighted ? "true" : "false") << '\n';
    return os.str();
}

} // namespace pedmr
