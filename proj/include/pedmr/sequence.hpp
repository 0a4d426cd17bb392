#pragma once

// Pulse-sequence language (".pseq", version 1).
//
//   #pseq v1
//   let tau1 = 200ns
//   pulse 90 x              # rotation angle in degrees, phase x | y | -x | -y
//   delay tau1
//   pulse 180 x
//   delay tau2
//   pulse 90 x
//   pulse_t 40ns x          # pulse given by its length instead of its angle
//   sweep tau2 from 0ns to 900ns step 10ns
//
// Durations are non-negative decimals with a mandatory unit suffix
// (ns, us, ms). At most two sweep axes. Identifiers may be used before the
// line that declares them.

#include "pedmr/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace pedmr::pseq {

inline constexpr int max_sweep_axes = 2;

enum class TimeUnit { Nanosecond, Microsecond, Millisecond };

inline double unit_scale(TimeUnit u)
{
    switch (u) {
    case TimeUnit::Nanosecond: return 1e-9;
    case TimeUnit::Microsecond: return 1e-6;
    case TimeUnit::Millisecond: return 1e-3;
    }
    return 0.0;
}

inline std::string_view unit_suffix(TimeUnit u)
{
    switch (u) {
    case TimeUnit::Nanosecond: return "ns";
    case TimeUnit::Microsecond: return "us";
    case TimeUnit::Millisecond: return "ms";
    }
    return "";
}

/// A duration literal exactly as written: magnitude plus unit.
struct Duration {
    double value = 0.0;
    TimeUnit unit = TimeUnit::Nanosecond;

    double seconds() const { return value * unit_scale(unit); }
    bool operator==(const Duration&) const = default;
};

/// Either a literal or the name of a `let` / `sweep` variable.
using DurationRef = std::variant<Duration, std::string>;

enum class Phase { X, Y, MinusX, MinusY };

inline double phase_radians(Phase p)
{
    switch (p) {
    case Phase::X: return 0.0;
    case Phase::Y: return 0.5 * std::numbers::pi;
    case Phase::MinusX: return std::numbers::pi;
    case Phase::MinusY: return 1.5 * std::numbers::pi;
    }
    return 0.0;
}

inline std::string_view phase_name(Phase p)
{
    switch (p) {
    case Phase::X: return "x";
    case Phase::Y: return "y";
    case Phase::MinusX: return "-x";
    case Phase::MinusY: return "-y";
    }
    return "";
}

struct PulseStmt {
    double angle_deg = 0.0;
    Phase phase = Phase::X;
    bool operator==(const PulseStmt&) const = default;
};

struct TimedPulseStmt {
    DurationRef duration;
    Phase phase = Phase::X;
    bool operator==(const TimedPulseStmt&) const = default;
};

struct DelayStmt {
    DurationRef duration;
    bool operator==(const DelayStmt&) const = default;
};

using Statement = std::variant<PulseStmt, TimedPulseStmt, DelayStmt>;

struct LetDecl {
    std::string name;
    Duration value;
    bool operator==(const LetDecl&) const = default;
};

struct SweepDecl {
    std::string name;
    Duration from;
    Duration to;
    Duration step;
    bool operator==(const SweepDecl&) const = default;
};

/// Parsed but unresolved program.
struct Program {
    std::vector<Statement> statements;
    std::vector<LetDecl> lets;
    std::vector<SweepDecl> sweeps;
    bool operator==(const Program&) const = default;
};

enum class DiagCode {
    Syntax = 1,
    Unit = 2,
    UndefinedVariable = 3,
    SweepAxisOverflow = 4,
    InvalidDefinition = 5, ///< duplicate name, non-positive step, empty range
};

inline std::string_view diag_code_name(DiagCode c)
{
    switch (c) {
    case DiagCode::Syntax: return "E1-syntax";
    case DiagCode::Unit: return "E2-unit";
    case DiagCode::UndefinedVariable: return "E3-undefined-variable";
    case DiagCode::SweepAxisOverflow: return "E4-sweep-axis-overflow";
    case DiagCode::InvalidDefinition: return "E5-invalid-definition";
    }
    return "";
}

struct Diagnostic {
    DiagCode code;
    int line = 0;   // 1-based
    int column = 0; // 1-based
    std::string token;
    std::string message;

    std::string format() const
    {
        std::ostringstream os;
        os << line << ':' << column << ": " << diag_code_name(code) << ": " << message;
        if (!token.empty()) os << " ('" << token << "')";
        return os.str();
    }
};

struct ParseResult {
    Program program;
    std::vector<Diagnostic> diagnostics;

    bool ok() const { return diagnostics.empty(); }
};

/// Thrown by helpers that require a clean parse (e.g. loading a .pseq file).
class ParseError : public Error {
public:
    explicit ParseError(std::vector<Diagnostic> diags)
        : Error(summary(diags)), diagnostics(std::move(diags))
    {
    }

    std::vector<Diagnostic> diagnostics;

private:
    static std::string summary(const std::vector<Diagnostic>& d)
    {
        std::string out;
        for (const auto& x : d) {
            if (!out.empty()) out += '\n';
            out += x.format();
        }
        return out;
    }
};

namespace detail {

struct Token {
    std::string text;
    int column;
};

inline std::vector<Token> tokenize_line(std::string_view line)
{
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < line.size()) {
        const char c = line[i];
        if (c == '#') break;
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (c == '=') {
            out.push_back({"=", static_cast<int>(i) + 1});
            ++i;
            continue;
        }
        const std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i])) && line[i] != '=' &&
               line[i] != '#') {
            ++i;
        }
        out.push_back({std::string(line.substr(start, i - start)), static_cast<int>(start) + 1});
    }
    return out;
}

inline bool is_identifier(std::string_view s)
{
    if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
    return std::all_of(s.begin(), s.end(),
                       [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

inline bool is_keyword(std::string_view s)
{
    return s == "let" || s == "pulse" || s == "pulse_t" || s == "delay" || s == "sweep" || s == "from" ||
           s == "to" || s == "step";
}

// Length of the leading unsigned decimal ("12", "12.5", ".5", "12.").
inline std::size_t decimal_prefix(std::string_view s)
{
    std::size_t i = 0;
    bool digits = false;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
        ++i;
        digits = true;
    }
    if (i < s.size() && s[i] == '.') {
        ++i;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
            ++i;
            digits = true;
        }
    }
    return digits ? i : 0;
}

inline std::optional<double> parse_decimal(std::string_view s)
{
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v, std::chars_format::fixed);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

class LineParser {
public:
    LineParser(int line_no, std::vector<Token> tokens, std::vector<Diagnostic>& diags)
        : line_(line_no), tokens_(std::move(tokens)), diags_(diags)
    {
    }

    const std::vector<Token>& tokens() const { return tokens_; }

    void error(DiagCode code, const Token& tok, std::string msg)
    {
        diags_.push_back({code, line_, tok.column, tok.text, std::move(msg)});
    }

    void error_at_end(std::string msg)
    {
        const int col = tokens_.empty() ? 1
                                        : tokens_.back().column + static_cast<int>(tokens_.back().text.size());
        diags_.push_back({DiagCode::Syntax, line_, col, "", std::move(msg)});
    }

    bool expect_count(std::size_t n, std::string_view usage)
    {
        if (tokens_.size() < n) {
            error_at_end("incomplete statement, expected: " + std::string(usage));
            return false;
        }
        if (tokens_.size() > n) {
            error(DiagCode::Syntax, tokens_[n], "unexpected token, expected: " + std::string(usage));
            return false;
        }
        return true;
    }

    std::optional<Duration> duration(const Token& tok)
    {
        const std::size_t n = decimal_prefix(tok.text);
        if (n == 0) {
            error(DiagCode::Syntax, tok, "expected a non-negative duration such as 200ns");
            return std::nullopt;
        }
        const auto value = parse_decimal(std::string_view(tok.text).substr(0, n));
        if (!value) {
            error(DiagCode::Syntax, tok, "malformed number");
            return std::nullopt;
        }
        const std::string_view suffix = std::string_view(tok.text).substr(n);
        if (suffix == "ns") return Duration{*value, TimeUnit::Nanosecond};
        if (suffix == "us") return Duration{*value, TimeUnit::Microsecond};
        if (suffix == "ms") return Duration{*value, TimeUnit::Millisecond};
        error(DiagCode::Unit, tok, suffix.empty() ? "missing time unit (ns, us or ms)" : "unknown time unit");
        return std::nullopt;
    }

    std::optional<DurationRef> duration_or_ident(const Token& tok)
    {
        if (is_identifier(tok.text)) {
            if (is_keyword(tok.text)) {
                error(DiagCode::Syntax, tok, "keyword used as identifier");
                return std::nullopt;
            }
            return DurationRef{tok.text};
        }
        if (auto d = duration(tok)) return DurationRef{*d};
        return std::nullopt;
    }

    std::optional<Phase> phase(const Token& tok)
    {
        if (tok.text == "x") return Phase::X;
        if (tok.text == "y") return Phase::Y;
        if (tok.text == "-x") return Phase::MinusX;
        if (tok.text == "-y") return Phase::MinusY;
        error(DiagCode::Syntax, tok, "phase must be one of x, y, -x, -y");
        return std::nullopt;
    }

    std::optional<double> angle(const Token& tok)
    {
        const std::size_t n = decimal_prefix(tok.text);
        if (n == 0 || n != tok.text.size()) {
            error(DiagCode::Syntax, tok, "expected a non-negative rotation angle in degrees");
            return std::nullopt;
        }
        auto v = parse_decimal(tok.text);
        if (!v) error(DiagCode::Syntax, tok, "malformed number");
        return v;
    }

    bool keyword(std::size_t idx, std::string_view kw)
    {
        if (tokens_[idx].text != kw) {
            error(DiagCode::Syntax, tokens_[idx], "expected '" + std::string(kw) + "'");
            return false;
        }
        return true;
    }

    int line() const { return line_; }

private:
    int line_;
    std::vector<Token> tokens_;
    std::vector<Diagnostic>& diags_;
};

struct PendingRef {
    std::string name;
    int line;
    int column;
};

inline void note_ref(const DurationRef& ref, const Token& tok, int line, std::vector<PendingRef>& refs)
{
    if (const auto* name = std::get_if<std::string>(&ref)) refs.push_back({*name, line, tok.column});
}

} // namespace detail

/// Parses DSL text. Always returns the statements that could be recovered plus
/// every diagnostic found; `ok()` is true only for a clean program.
inline ParseResult parse(std::string_view text)
{
    ParseResult result;
    auto& prog = result.program;
    auto& diags = result.diagnostics;
    std::vector<detail::PendingRef> refs;
    std::map<std::string, int, std::less<>> defined; // name -> line

    // Optional UTF-8 byte-order mark.
    if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = text.find('\n', pos);
        std::string_view raw = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        pos = (eol == std::string_view::npos) ? text.size() + 1 : eol + 1;
        ++line_no;
        if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);

        detail::LineParser lp(line_no, detail::tokenize_line(raw), diags);
        const auto& t = lp.tokens();
        if (t.empty()) continue;
        const std::string& head = t[0].text;

        auto define = [&](const detail::Token& tok) {
            if (auto it = defined.find(tok.text); it != defined.end()) {
                lp.error(DiagCode::InvalidDefinition, tok,
                         "'" + tok.text + "' already defined on line " + std::to_string(it->second));
                return false;
            }
            defined.emplace(tok.text, line_no);
            return true;
        };

        if (head == "pulse") {
            if (!lp.expect_count(3, "pulse <angle_deg> <phase>")) continue;
            auto a = lp.angle(t[1]);
            auto p = lp.phase(t[2]);
            if (a && p) prog.statements.emplace_back(PulseStmt{*a, *p});
        } else if (head == "pulse_t") {
            if (!lp.expect_count(3, "pulse_t <duration> <phase>")) continue;
            auto d = lp.duration_or_ident(t[1]);
            auto p = lp.phase(t[2]);
            if (d && p) {
                detail::note_ref(*d, t[1], line_no, refs);
                prog.statements.emplace_back(TimedPulseStmt{*d, *p});
            }
        } else if (head == "delay") {
            if (!lp.expect_count(2, "delay <duration>")) continue;
            if (auto d = lp.duration_or_ident(t[1])) {
                detail::note_ref(*d, t[1], line_no, refs);
                prog.statements.emplace_back(DelayStmt{*d});
            }
        } else if (head == "let") {
            if (!lp.expect_count(4, "let <name> = <duration>")) continue;
            if (!detail::is_identifier(t[1].text) || detail::is_keyword(t[1].text)) {
                lp.error(DiagCode::Syntax, t[1], "expected an identifier");
                continue;
            }
            if (!lp.keyword(2, "=")) continue;
            auto d = lp.duration(t[3]);
            if (d && define(t[1])) prog.lets.push_back({t[1].text, *d});
        } else if (head == "sweep") {
            if (!lp.expect_count(8, "sweep <name> from <duration> to <duration> step <duration>")) continue;
            if (!detail::is_identifier(t[1].text) || detail::is_keyword(t[1].text)) {
                lp.error(DiagCode::Syntax, t[1], "expected an identifier");
                continue;
            }
            if (!lp.keyword(2, "from") || !lp.keyword(4, "to") || !lp.keyword(6, "step")) continue;
            auto from = lp.duration(t[3]);
            auto to = lp.duration(t[5]);
            auto step = lp.duration(t[7]);
            if (!from || !to || !step) continue;
            if (prog.sweeps.size() >= max_sweep_axes) {
                lp.error(DiagCode::SweepAxisOverflow, t[1],
                         "at most " + std::to_string(max_sweep_axes) + " sweep axes are supported");
                continue;
            }
            if (!(step->seconds() > 0.0)) {
                lp.error(DiagCode::InvalidDefinition, t[7], "sweep step must be positive");
                continue;
            }
            if (to->seconds() < from->seconds()) {
                lp.error(DiagCode::InvalidDefinition, t[5], "sweep end lies before its start");
                continue;
            }
            if (define(t[1])) prog.sweeps.push_back({t[1].text, *from, *to, *step});
        } else {
            lp.error(DiagCode::Syntax, t[0], "unknown statement");
        }
    }

    for (const auto& r : refs) {
        if (!defined.contains(r.name)) {
            diags.push_back({DiagCode::UndefinedVariable, r.line, r.column, r.name,
                             "undefined variable '" + r.name + "'"});
        }
    }
    std::stable_sort(diags.begin(), diags.end(), [](const Diagnostic& a, const Diagnostic& b) {
        return a.line != b.line ? a.line < b.line : a.column < b.column;
    });
    return result;
}

/// Parses and throws ParseError on any diagnostic.
inline Program parse_or_throw(std::string_view text)
{
    auto r = parse(text);
    if (!r.ok()) throw ParseError(std::move(r.diagnostics));
    return std::move(r.program);
}

namespace detail {

inline std::string format_number(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed);
    return std::string(buf, res.ptr);
}

inline std::string format_duration(const Duration& d)
{
    return format_number(d.value) + std::string(unit_suffix(d.unit));
}

inline std::string format_ref(const DurationRef& r)
{
    if (const auto* d = std::get_if<Duration>(&r)) return format_duration(*d);
    return std::get<std::string>(r);
}

} // namespace detail

/// Canonical text form. parse(print(p)).program == p for every valid program.
inline std::string print(const Program& prog)
{
    std::ostringstream os;
    os << "#pseq v1\n";
    for (const auto& l : prog.lets) {
        os << "let " << l.name << " = " << detail::format_duration(l.value) << '\n';
    }
    for (const auto& st : prog.statements) {
        std::visit(
            [&](const auto& s) {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, PulseStmt>) {
                    os << "pulse " << detail::format_number(s.angle_deg) << ' ' << phase_name(s.phase) << '\n';
                } else if constexpr (std::is_same_v<T, TimedPulseStmt>) {
                    os << "pulse_t " << detail::format_ref(s.duration) << ' ' << phase_name(s.phase) << '\n';
                } else {
                    os << "delay " << detail::format_ref(s.duration) << '\n';
                }
            },
            st);
    }
    for (const auto& s : prog.sweeps) {
        os << "sweep " << s.name << " from " << detail::format_duration(s.from) << " to "
           << detail::format_duration(s.to) << " step " << detail::format_duration(s.step) << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Compilation to flat event timelines

struct PulseEvent {
    double angle = 0.0;    // rad
    double phase = 0.0;    // rad
    double duration = 0.0; // s
};

struct DelayEvent {
    double duration = 0.0; // s
};

using Event = std::variant<PulseEvent, DelayEvent>;

inline double event_duration(const Event& e)
{
    return std::visit([](const auto& x) { return x.duration; }, e);
}

/// One fully resolved timeline.
struct PulseSequence {
    std::vector<Event> events;
    std::vector<double> sweep_values; ///< value of each sweep axis at this point, s

    double total_duration() const
    {
        double t = 0.0;
        for (const auto& e : events) t += event_duration(e);
        return t;
    }

    /// Sum of pulse rotation angles in rad.
    double total_rotation() const
    {
        double a = 0.0;
        for (const auto& e : events) {
            if (const auto* p = std::get_if<PulseEvent>(&e)) a += p->angle;
        }
        return a;
    }
};

struct SweepAxis {
    std::string name;
    std::vector<double> values; // s
};

struct CompiledProgram {
    std::vector<SweepAxis> axes;
    /// One sequence per grid point; the first axis varies slowest.
    std::vector<PulseSequence> sequences;
};

/// floor((to - from) / step) + 1 explicit values, endpoints included when the
/// step divides the range.
inline std::vector<double> expand_range(double from, double to, double step)
{
    const double span = to - from;
    if (!(step > 0.0) || !(span >= 0.0)) throw InvalidArgument("invalid range");
    const auto count = static_cast<std::size_t>(std::floor(span / step * (1.0 + 1e-12) + 1e-9)) + 1;
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i) values[i] = from + static_cast<double>(i) * step;
    return values;
}

inline std::vector<double> expand_sweep(const SweepDecl& s)
{
    const double step = s.step.seconds();
    if (!(step > 0.0) || s.to.seconds() < s.from.seconds()) throw InvalidArgument("invalid sweep '" + s.name + "'");
    return expand_range(s.from.seconds(), s.to.seconds(), step);
}

/// Resolves variables and converts angles to durations with the Rabi
/// frequency `omega1` (rad/s). Angle-specified pulses need omega1 > 0;
/// length-specified pulses get angle = omega1 * duration.
inline CompiledProgram compile(const Program& prog, double omega1)
{
    if (!std::isfinite(omega1) || omega1 < 0.0) throw InvalidArgument("compile: omega1 must be >= 0");

    CompiledProgram out;
    std::map<std::string, double, std::less<>> lets;
    for (const auto& l : prog.lets) lets[l.name] = l.value.seconds();
    std::map<std::string, std::size_t, std::less<>> axis_index;
    for (const auto& s : prog.sweeps) {
        axis_index[s.name] = out.axes.size();
        out.axes.push_back({s.name, expand_sweep(s)});
    }

    std::size_t points = 1;
    for (const auto& a : out.axes) points *= a.values.size();

    std::vector<std::size_t> idx(out.axes.size(), 0);
    out.sequences.reserve(points);
    for (std::size_t n = 0; n < points; ++n) {
        // Row-major unravel: last axis fastest.
        std::size_t rem = n;
        for (std::size_t k = out.axes.size(); k-- > 0;) {
            idx[k] = rem % out.axes[k].values.size();
            rem /= out.axes[k].values.size();
        }
        auto resolve = [&](const DurationRef& r) -> double {
            if (const auto* d = std::get_if<Duration>(&r)) return d->seconds();
            const auto& name = std::get<std::string>(r);
            if (auto it = lets.find(name); it != lets.end()) return it->second;
            if (auto it = axis_index.find(name); it != axis_index.end()) {
                return out.axes[it->second].values[idx[it->second]];
            }
            throw InvalidArgument("compile: undefined variable '" + name + "'");
        };

        PulseSequence seq;
        for (std::size_t k = 0; k < out.axes.size(); ++k) seq.sweep_values.push_back(out.axes[k].values[idx[k]]);
        for (const auto& st : prog.statements) {
            if (const auto* p = std::get_if<PulseStmt>(&st)) {
                if (omega1 <= 0.0) throw InvalidArgument("compile: angle pulse requires omega1 > 0");
                const double angle = p->angle_deg * std::numbers::pi / 180.0;
                seq.events.emplace_back(PulseEvent{angle, phase_radians(p->phase), angle / omega1});
            } else if (const auto* tp = std::get_if<TimedPulseStmt>(&st)) {
                const double d = resolve(tp->duration);
                seq.events.emplace_back(PulseEvent{omega1 * d, phase_radians(tp->phase), d});
            } else {
                seq.events.emplace_back(DelayEvent{resolve(std::get<DelayStmt>(st).duration)});
            }
        }
        out.sequences.push_back(std::move(seq));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Builders for the canonical experiments

namespace detail {

inline std::string ns(double seconds)
{
    // Round to femtoseconds so that e.g. 2e-7 prints as 200ns, not 200.00000000000003ns.
    return format_number(std::round(seconds * 1e15) / 1e6) + "ns";
}

} // namespace detail

/// Single x pulse whose length is swept from 0 to t_max.
inline std::string build_rabi(double t_max, double step)
{
    if (!(t_max > 0.0) || !(step > 0.0)) throw InvalidArgument("build_rabi: ranges must be positive");
    std::ostringstream os;
    os << "#pseq v1\n# Rabi nutation: one pulse of swept length\n"
       << "pulse_t t_rabi x\n"
       << "sweep t_rabi from 0ns to " << detail::ns(t_max) << " step " << detail::ns(step) << '\n';
    return os.str();
}

/// pi/2 - tau1 - pi - tau2 - pi/2 with tau2 swept.
inline std::string build_cp_echo(double tau1, double tau2_from, double tau2_to, double tau2_step)
{
    if (!(tau1 > 0.0) || tau2_from < 0.0 || !(tau2_to > tau2_from) || !(tau2_step > 0.0)) {
        throw InvalidArgument("build_cp_echo: ranges must be positive");
    }
    std::ostringstream os;
    os << "#pseq v1\n# Carr-Purcell echo with tomography pulse\n"
       << "let tau1 = " << detail::ns(tau1) << '\n'
       << "pulse 90 x\ndelay tau1\npulse 180 x\ndelay tau2\npulse 90 x\n"
       << "sweep tau2 from " << detail::ns(tau2_from) << " to " << detail::ns(tau2_to) << " step "
       << detail::ns(tau2_step) << '\n';
    return os.str();
}

/// pi/2 - tau - pi - tau - pi/2 with tau swept (echo sampled at tau2 = tau1).
inline std::string build_echo_decay(double tau_from, double tau_to, double tau_step)
{
    if (!(tau_from > 0.0) || !(tau_to > tau_from) || !(tau_step > 0.0)) {
        throw InvalidArgument("build_echo_decay: ranges must be positive");
    }
    std::ostringstream os;
    os << "#pseq v1\n# Echo decay: refocused echo amplitude versus tau1 = tau2 = tau\n"
       << "pulse 90 x\ndelay tau\npulse 180 x\ndelay tau\npulse 90 x\n"
       << "sweep tau from " << detail::ns(tau_from) << " to " << detail::ns(tau_to) << " step "
       << detail::ns(tau_step) << '\n';
    return os.str();
}

/// Off-echo reference for build_echo_decay: the same total length with
/// tau1 = tau - offset and tau2 = tau + offset, so |tau2 - tau1| = 2 offset.
inline std::string build_echo_reference(double tau_from, double tau_to, double tau_step, double offset)
{
    if (!(tau_from > 0.0) || !(tau_to > tau_from) || !(tau_step > 0.0) || offset < 0.0 || offset > tau_from) {
        throw InvalidArgument("build_echo_reference: invalid ranges");
    }
    std::ostringstream os;
    os << "#pseq v1\n# Off-echo reference: tau1 = tau - offset, tau2 = tau + offset\n"
       << "pulse 90 x\ndelay tau\npulse 180 x\ndelay tau\ndelay " << detail::ns(2.0 * offset) << "\npulse 90 x\n"
       << "sweep tau from " << detail::ns(tau_from - offset) << " to " << detail::ns(tau_to - offset) << " step "
       << detail::ns(tau_step) << '\n';
    return os.str();
}

/// Single pulse of fixed angle (field sweeps).
inline std::string build_single_pulse(double angle_deg)
{
    std::ostringstream os;
    os << "#pseq v1\npulse " << detail::format_number(angle_deg) << " x\n";
    return os.str();
}

} // namespace pedmr::pseq
