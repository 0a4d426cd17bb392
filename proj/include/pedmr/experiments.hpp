#pragma once

// Measurement protocols on top of the ensemble, detector and
// analysis modules: Rabi nutation, echo map, echo decay, field spectrum.

#include "pedmr/analysis.hpp"
#include "pedmr/config.hpp"
#include "pedmr/detector.hpp"
#include "pedmr/ensemble.hpp"
#include "pedmr/io.hpp"
#include "pedmr/sequence.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace pedmr {

struct ExperimentResult {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    /// Flat key=value report (written as summary.txt).
    std::vector<std::pair<std::string, std::string>> summary;
    /// Additional output files: name -> content (DSL text, per-line tables, ...).
    std::map<std::string, std::string> files;
    std::optional<FitResult> fit;

    std::string csv() const
    {
        std::string out;
        for (std::size_t i = 0; i < columns.size(); ++i) out += (i ? "," : "") + columns[i];
        out += '\n';
        for (const auto& r : rows) {
            for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + io::format_double(r[i]);
            out += '\n';
        }
        return out;
    }

    std::string summary_text() const
    {
        std::string out;
        for (const auto& [k, v] : summary) out += k + '=' + v + '\n';
        return out;
    }

    const std::string& summary_value(const std::string& key) const
    {
        for (const auto& [k, v] : summary) {
            if (k == key) return v;
        }
        throw InvalidArgument("no summary entry '" + key + "'");
    }
};

namespace detail {

inline std::vector<double> charges(const std::vector<double>& q, const RunConfig& c)
{
    std::vector<double> out(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) out[i] = boxcar_q(q[i], c.kernel, c.window);
    return out;
}

inline pseq::CompiledProgram compile_text(const std::string& text, double omega1)
{
    return pseq::compile(pseq::parse_or_throw(text), omega1);
}

inline void require_axes(const pseq::CompiledProgram& p, std::size_t n, const char* experiment)
{
    if (p.axes.size() != n) {
        throw ConfigError(std::string(experiment) + ": sequence must have exactly " + std::to_string(n) +
                          " sweep axis" + (n == 1 ? "" : "es"));
    }
}

} // namespace detail

/// Interior local extrema of y (strict on one side), in x order.
/// kind = +1 for maxima, -1 for minima.
inline std::vector<std::size_t> local_extrema(const std::vector<double>& y, int kind)
{
    std::vector<std::size_t> out;
    for (std::size_t i = 1; i + 1 < y.size(); ++i) {
        const double a = kind * y[i - 1], b = kind * y[i], c = kind * y[i + 1];
        if (b > a && b >= c) out.push_back(i);
    }
    return out;
}

/// Vertex of the parabola through three neighbouring samples.
inline double parabolic_vertex(const std::vector<double>& x, const std::vector<double>& y, std::size_t i)
{
    if (i == 0 || i + 1 >= x.size()) return x[i];
    const double x0 = x[i - 1], x1 = x[i], x2 = x[i + 1];
    const double y0 = y[i - 1], y1 = y[i], y2 = y[i + 1];
    const double den = (x0 - x1) * (x0 - x2) * (x1 - x2);
    const double a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / den;
    const double b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / den;
    if (!(a != 0.0)) return x1;
    const double v = -b / (2.0 * a);
    return std::clamp(v, x0, x2);
}

/// Sign changes of y over samples with x in [lo, hi); exact zeros are skipped.
inline int sign_alternations(const std::vector<double>& x, const std::vector<double>& y, double lo, double hi)
{
    int count = 0, last = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] < lo || x[i] >= hi) continue;
        const int s = (y[i] > 0.0) - (y[i] < 0.0);
        if (s != 0 && last != 0 && s != last) ++count;
        if (s != 0) last = s;
    }
    return count;
}

/// Dip of one echo-map field line (dQ already relative to the plateau).
struct EchoLine {
    double b0 = 0.0;
    double plateau = 0.0;
    double tau2_min = 0.0;
    double dq_min = 0.0;
    double fwhm = std::numeric_limits<double>::quiet_NaN();
};

/// Full width of the dip at half its depth below zero, from linear
/// interpolation between samples; NaN if a flank never recovers.
inline double dip_fwhm(const std::vector<double>& x, const std::vector<double>& dq, std::size_t imin)
{
    const double half = 0.5 * dq[imin];
    if (!(half < 0.0)) return std::numeric_limits<double>::quiet_NaN();
    double left = std::numeric_limits<double>::quiet_NaN(), right = left;
    for (std::size_t i = imin; i > 0; --i) {
        if (dq[i - 1] >= half) {
            left = x[i - 1] + (half - dq[i - 1]) / (dq[i] - dq[i - 1]) * (x[i] - x[i - 1]);
            break;
        }
    }
    for (std::size_t i = imin; i + 1 < x.size(); ++i) {
        if (dq[i + 1] >= half) {
            right = x[i] + (half - dq[i]) / (dq[i + 1] - dq[i]) * (x[i + 1] - x[i]);
            break;
        }
    }
    return right - left;
}

/// Q(tau_rabi) for a swept pulse length at fixed field.
inline ExperimentResult run_rabi(const RunConfig& c, const std::optional<std::string>& sequence = std::nullopt)
{
    c.validate();
    ExperimentResult r;
    r.name = "rabi";
    const std::string text = sequence ? *sequence : pseq::build_rabi(c.rabi.t_max, c.rabi.step);
    const auto prog = detail::compile_text(text, drive_omega1(c.model));
    detail::require_axes(prog, 1, "rabi");
    const auto q = average_q(c.model, c.quadrature_for(0), prog.sequences, c.pair, c.rabi.b0, c.threads);
    const auto charge = detail::charges(q, c);

    r.columns = {"tau_rabi_s", "Q"};
    const auto& t = prog.axes[0].values;
    for (std::size_t i = 0; i < t.size(); ++i) r.rows.push_back({t[i], charge[i]});
    r.files["sequence.pseq"] = text;

    std::size_t best = 0;
    for (std::size_t i = 0; i < charge.size(); ++i) {
        if (std::abs(charge[i]) > std::abs(charge[best])) best = i;
    }
    const auto maxima = local_extrema(charge, +1);
    const auto minima = local_extrema(charge, -1);
    auto d = [](double v) { return io::format_double(v); };
    r.summary = {{"experiment", "rabi"},
                 {"b0_t", d(c.rabi.b0)},
                 {"omega1_rad_s", d(drive_omega1(c.model))},
                 {"q_max", d(charge[best])},
                 {"tau_at_q_max_s", d(t[best])}};
    if (!maxima.empty()) r.summary.emplace_back("first_maximum_s", d(parabolic_vertex(t, charge, maxima[0])));
    if (!minima.empty()) r.summary.emplace_back("first_minimum_s", d(parabolic_vertex(t, charge, minima[0])));

    std::vector<double> times;
    for (int k = 0; k <= 400; ++k) times.push_back(k * 0.5e-6);
    std::ostringstream tr;
    write_transient_csv(tr, q[best], c.kernel, times);
    r.files["transient.csv"] = tr.str();
    return r;
}

/// dQ(b0, tau2) relative to the large-|tau2 - tau1| plateau of each field line.
inline ExperimentResult run_echo_map(const RunConfig& c, const std::optional<std::string>& sequence = std::nullopt)
{
    c.validate();
    const auto& s = c.echo_map;
    ExperimentResult r;
    r.name = "echo-map";
    const std::string text = sequence ? *sequence : pseq::build_cp_echo(s.tau1, s.tau2_from, s.tau2_to, s.tau2_step);
    const auto prog = detail::compile_text(text, drive_omega1(c.model));
    detail::require_axes(prog, 1, "echo-map");
    const auto& tau2 = prog.axes[0].values;
    const double plateau_from = tau2.back() - s.plateau_fraction * (tau2.back() - tau2.front());
    const auto quad = c.quadrature_for(0);

    r.columns = {"b0_T", "tau2_s", "dQ"};
    std::ostringstream lines;
    lines << "b0_T,plateau_Q,tau2_min_s,dQ_min,fwhm_s\n";
    for (double b0 : pseq::expand_range(s.b0_from, s.b0_to, s.b0_step)) {
        const auto charge = detail::charges(average_q(c.model, quad, prog.sequences, c.pair, b0, c.threads), c);
        double plateau = 0.0;
        int n = 0;
        for (std::size_t i = 0; i < tau2.size(); ++i) {
            if (tau2[i] >= plateau_from) {
                plateau += charge[i];
                ++n;
            }
        }
        plateau /= n;
        std::vector<double> dq(charge.size());
        for (std::size_t i = 0; i < dq.size(); ++i) {
            dq[i] = charge[i] - plateau;
            r.rows.push_back({b0, tau2[i], dq[i]});
        }
        std::size_t imin = 0;
        for (std::size_t i = 0; i < dq.size(); ++i) {
            if (dq[i] < dq[imin]) imin = i;
        }
        lines << io::format_double(b0) << ',' << io::format_double(plateau) << ',' << io::format_double(tau2[imin])
              << ',' << io::format_double(dq[imin]) << ',' << io::format_double(dip_fwhm(tau2, dq, imin)) << '\n';
    }
    r.files["sequence.pseq"] = text;
    r.files["echo_lines.csv"] = lines.str();
    r.summary = {{"experiment", "echo-map"},
                 {"tau1_s", io::format_double(s.tau1)},
                 {"plateau_from_s", io::format_double(plateau_from)}};
    return r;
}

/// Per-line statistics of an echo map produced by run_echo_map.
inline std::vector<EchoLine> echo_lines(const ExperimentResult& map)
{
    std::vector<EchoLine> out;
    std::istringstream in(map.files.at("echo_lines.csv"));
    const auto t = io::read_csv(in);
    for (const auto& row : t.rows) out.push_back({row[0], row[1], row[2], row[3], row[4]});
    return out;
}

/// Field lines of an echo map as (tau2, dQ) columns, keyed by b0.
inline std::map<double, std::pair<std::vector<double>, std::vector<double>>> echo_map_lines(
    const ExperimentResult& map)
{
    std::map<double, std::pair<std::vector<double>, std::vector<double>>> out;
    for (const auto& row : map.rows) {
        auto& line = out[row[0]];
        line.first.push_back(row[1]);
        line.second.push_back(row[2]);
    }
    return out;
}

/// Echo amplitude dQ(tau1 + tau2) at tau1 = tau2, measured against an
/// off-echo reference of the same total length, then background-subtracted
/// and fitted with a mono-exponential.
inline ExperimentResult run_echo_decay(const RunConfig& c)
{
    c.validate();
    const auto& s = c.echo_decay;
    ExperimentResult r;
    r.name = "echo-decay";
    const double omega1 = drive_omega1(c.model);
    const std::string echo_text = pseq::build_echo_decay(s.tau_from, s.tau_to, s.tau_step);
    const std::string ref_text = pseq::build_echo_reference(s.tau_from, s.tau_to, s.tau_step, s.reference_offset);
    const auto echo = detail::compile_text(echo_text, omega1);
    const auto ref = detail::compile_text(ref_text, omega1);
    if (echo.sequences.size() != ref.sequences.size()) throw ConfigError("echo-decay: reference grid mismatch");

    const auto quad = c.quadrature_for(8);
    const auto qe = detail::charges(average_q(c.model, quad, echo.sequences, c.pair, s.b0, c.threads), c);
    const auto qr = detail::charges(average_q(c.model, quad, ref.sequences, c.pair, s.b0, c.threads), c);

    Series series;
    r.columns = {"total_tau_s", "dQ"};
    for (std::size_t i = 0; i < qe.size(); ++i) {
        const double total = 2.0 * echo.axes[0].values[i];
        series.x.push_back(total);
        series.y.push_back(qe[i] - qr[i]);
        r.rows.push_back({total, qe[i] - qr[i]});
    }
    r.files["sequence.pseq"] = echo_text;
    r.files["reference.pseq"] = ref_text;

    const Series fitted =
        s.background == Background::Linear ? subtract_linear_background(series, s.background_fraction) : series;
    r.fit = fit_monoexp(fitted);
    const auto& f = *r.fit;
    auto d = [](double v) { return io::format_double(v); };
    r.summary = {{"experiment", "echo-decay"},
                 {"b0_t", d(s.b0)},
                 {"background", std::string(detail::background_name(s.background))},
                 {"tau_echo_s", d(f.value("tau"))},
                 {"tau_echo_sigma_s", d(f.sigma("tau"))},
                 {"decay_rate_per_s", d(1.0 / f.value("tau"))},
                 {"converged", f.converged ? "true" : "false"}};
    return r;
}

/// Q under a fixed pulse swept over the static field.
inline ExperimentResult run_spectrum(const RunConfig& c, const std::optional<std::string>& sequence = std::nullopt)
{
    c.validate();
    const auto& s = c.spectrum;
    ExperimentResult r;
    r.name = "spectrum";
    const std::string text = sequence ? *sequence : pseq::build_single_pulse(s.angle_deg);
    const auto prog = detail::compile_text(text, drive_omega1(c.model));
    detail::require_axes(prog, 0, "spectrum");
    const auto quad = c.quadrature_for(0);

    std::vector<double> b0s = pseq::expand_range(s.b0_from, s.b0_to, s.b0_step), charge;
    r.columns = {"b0_T", "Q"};
    for (double b0 : b0s) {
        charge.push_back(detail::charges(average_q(c.model, quad, prog.sequences, c.pair, b0, c.threads), c)[0]);
        r.rows.push_back({b0, charge.back()});
    }
    r.files["sequence.pseq"] = text;

    double qmax = 0.0;
    for (double v : charge) qmax = std::max(qmax, v);
    std::string peaks;
    for (auto i : local_extrema(charge, +1)) {
        if (charge[i] < 0.25 * qmax) continue; // skips pulse-profile sidelobes
        peaks += (peaks.empty() ? "" : ";") + io::format_double(parabolic_vertex(b0s, charge, i));
    }
    r.summary = {{"experiment", "spectrum"}, {"q_max", io::format_double(qmax)}, {"peaks_t", peaks}};
    return r;
}

/// Fit of an imported series with the configured model and background.
inline FitResult run_fit(const RunConfig& c, const Series& s)
{
    FitOptions opt;
    opt.weighted = c.fit.weighted;
    const Series input =
        c.fit.background == Background::Linear ? subtract_linear_background(s, c.fit.background_fraction) : s;
    return c.fit.model == FitModel::Monoexp ? fit_monoexp(input, std::nullopt, opt)
                                            : fit_gaussian(input, std::nullopt, opt);
}

/// Spectrum peak positions (T) parsed back from the summary.
inline std::vector<double> spectrum_peaks(const ExperimentResult& r)
{
    std::vector<double> out;
    for (auto p : io::split(r.summary_value("peaks_t"), ';')) {
        if (auto v = io::parse_double(p)) out.push_back(*v);
    }
    return out;
}

} // namespace pedmr
