#pragma once

// Background subtraction, Levenberg-Marquardt fits and the closed-form
// relations used to interpret echo widths and decay times.

#include "pedmr/constants.hpp"
#include "pedmr/error.hpp"
#include "pedmr/io.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace pedmr {

struct Series {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> sigma; ///< optional 1-sigma errors on y; empty if absent

    std::size_t size() const { return x.size(); }

    void validate(std::size_t min_points) const
    {
        if (x.size() != y.size()) throw InvalidArgument("series: x and y differ in length");
        if (!sigma.empty() && sigma.size() != y.size()) throw InvalidArgument("series: sigma length mismatch");
        if (x.size() < min_points) {
            throw InvalidArgument("series: need at least " + std::to_string(min_points) + " points");
        }
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw InvalidArgument("series: non-finite value");
            if (i > 0 && !(x[i] > x[i - 1])) throw InvalidArgument("series: x must be strictly increasing");
        }
        for (double s : sigma) {
            if (!(s > 0.0) || !std::isfinite(s)) throw InvalidArgument("series: sigma must be positive");
        }
    }

    /// Columns x, y and optionally sigma.
    static Series from_table(const io::Table& t)
    {
        Series s;
        for (const auto& row : t.rows) {
            if (row.size() < 2 || row.size() > 3) throw ConfigError("series csv: expected columns x,y[,sigma]");
            s.x.push_back(row[0]);
            s.y.push_back(row[1]);
            if (row.size() == 3) s.sigma.push_back(row[2]);
        }
        return s;
    }
};

/// Least-squares line through the points with x in [x_lo, x_hi], subtracted from every y.
inline Series subtract_linear_background(const Series& s, double x_lo, double x_hi)
{
    s.validate(2);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s.x[i] < x_lo || s.x[i] > x_hi) continue;
        sx += s.x[i];
        sy += s.y[i];
        ++n;
    }
    if (n < 2) throw InvalidArgument("background: fewer than two points in the baseline region");
    const double mx = sx / n, my = sy / n;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s.x[i] < x_lo || s.x[i] > x_hi) continue;
        sxx += (s.x[i] - mx) * (s.x[i] - mx);
        sxy += (s.x[i] - mx) * (s.y[i] - my);
    }
    if (!(sxx > 0.0)) throw InvalidArgument("background: degenerate x in the baseline region");
    const double slope = sxy / sxx;
    Series out = s;
    for (std::size_t i = 0; i < s.size(); ++i) out.y[i] -= my + slope * (s.x[i] - mx);
    return out;
}

/// Baseline region is the last `fraction` of the x range.
inline Series subtract_linear_background(const Series& s, double fraction = 0.25)
{
    if (!(fraction > 0.0 && fraction <= 1.0)) throw InvalidArgument("background: fraction must be in (0, 1]");
    if (s.x.empty()) throw InvalidArgument("background: empty series");
    const double lo = s.x.front(), hi = s.x.back();
    if (!(hi > lo)) throw InvalidArgument("background: degenerate x range");
    return subtract_linear_background(s, hi - fraction * (hi - lo), hi);
}

struct FitParam {
    std::string name;
    double value = 0.0;
    double sigma = 0.0;
};

struct FitResult {
    std::string model;
    std::vector<FitParam> params;
    double residual_norm = std::numeric_limits<double>::quiet_NaN();
    bool converged = false;
    bool singular = false;
    int iterations = 0;

    const FitParam& param(const std::string& name) const
    {
        for (const auto& p : params) {
            if (p.name == name) return p;
        }
        throw InvalidArgument("fit result has no parameter '" + name + "'");
    }
    double value(const std::string& name) const { return param(name).value; }
    double sigma(const std::string& name) const { return param(name).sigma; }

    std::string key_value() const
    {
        std::ostringstream os;
        os << "model=" << model << '\n';
        for (const auto& p : params) {
            os << p.name << '=' << io::format_double(p.value) << '\n';
            os << p.name << "_sigma=" << io::format_double(p.sigma) << '\n';
        }
        os << "residual_norm=" << io::format_double(residual_norm) << '\n';
        os << "converged=" << (converged ? "true" : "false") << '\n';
        os << "singular=" << (singular ? "true" : "false") << '\n';
        os << "iterations=" << iterations << '\n';
        return os.str();
    }

    std::string csv_header() const
    {
        std::string h = "model";
        for (const auto& p : params) h += ',' + p.name + ',' + p.name + "_sigma";
        return h + ",residual_norm,converged,singular,iterations";
    }

    std::string csv_row() const
    {
        std::string r = model;
        for (const auto& p : params) r += ',' + io::format_double(p.value) + ',' + io::format_double(p.sigma);
        r += ',' + io::format_double(residual_norm) + ',' + (converged ? "1" : "0") + ',' + (singular ? "1" : "0") +
             ',' + std::to_string(iterations);
        return r;
    }
};

struct FitOptions {
    int max_iterations = 200;
    double step_tolerance = 1e-10;
    bool weighted = false; ///< use 1/sigma weights when the series carries sigma
};

/// Damped Gauss-Newton (Levenberg-Marquardt) with Marquardt's diagonal
/// scaling. `model(x, p, grad)` returns f(x; p) and fills df/dp.
template <typename Model>
FitResult levenberg_marquardt(const Series& s, Model&& model, Eigen::VectorXd p, std::vector<std::string> names,
                              const FitOptions& opt = {})
{
    const int n = static_cast<int>(s.size());
    const int m = static_cast<int>(p.size());
    Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
    if (opt.weighted && !s.sigma.empty()) {
        for (int i = 0; i < n; ++i) w(i) = 1.0 / s.sigma[i];
    }

    Eigen::MatrixXd jac(n, m);
    Eigen::VectorXd res(n), grad(m);
    auto evaluate = [&](const Eigen::VectorXd& q, bool with_jacobian) {
        double cost = 0.0;
        for (int i = 0; i < n; ++i) {
            const double f = model(s.x[i], q, grad);
            res(i) = w(i) * (s.y[i] - f);
            if (with_jacobian) jac.row(i) = w(i) * grad.transpose();
            cost += res(i) * res(i);
        }
        return cost;
    };

    FitResult out;
    double cost = evaluate(p, true);
    double lambda = 1e-3;
    const double nu_up = 4.0;
    int iter = 0;
    while (iter < opt.max_iterations && std::isfinite(cost)) {
        ++iter;
        const Eigen::MatrixXd a = jac.transpose() * jac;
        const Eigen::VectorXd g = jac.transpose() * res;
        Eigen::VectorXd d = a.diagonal().cwiseSqrt();
        const double dmax = d.maxCoeff();
        if (!(dmax > 0.0)) {
            out.singular = true;
            break;
        }
        for (int k = 0; k < m; ++k) d(k) = std::max(d(k), 1e-15 * dmax);
        const Eigen::MatrixXd as = d.cwiseInverse().asDiagonal() * a * d.cwiseInverse().asDiagonal();
        const Eigen::VectorXd gs = d.cwiseInverse().asDiagonal() * g;

        bool accepted = false;
        while (lambda < 1e16) {
            Eigen::MatrixXd damped = as;
            damped.diagonal().array() += lambda;
            const Eigen::VectorXd step_s = damped.ldlt().solve(gs);
            const Eigen::VectorXd step = d.cwiseInverse().asDiagonal() * step_s;
            const Eigen::VectorXd trial = p + step;
            Eigen::VectorXd keep_res = res;
            const double trial_cost = evaluate(trial, false);
            if (std::isfinite(trial_cost) && trial_cost <= cost) {
                const Eigen::VectorXd p_scaled = d.asDiagonal() * p;
                const bool small = step_s.norm() <= opt.step_tolerance * (p_scaled.norm() + opt.step_tolerance);
                p = trial;
                cost = evaluate(p, true);
                lambda = std::max(lambda / 3.0, 1e-15);
                accepted = true;
                if (small || cost == 0.0) out.converged = true;
                break;
            }
            res = keep_res;
            lambda *= nu_up;
        }
        if (!accepted) {
            // No descent direction left: the current point is a minimum to
            // working precision.
            out.converged = true;
            break;
        }
        if (out.converged) break;
    }
    evaluate(p, true);

    out.iterations = iter;
    out.residual_norm = std::sqrt(cost);
    const Eigen::MatrixXd a = jac.transpose() * jac;
    Eigen::VectorXd d = a.diagonal().cwiseSqrt();
    Eigen::VectorXd sig = Eigen::VectorXd::Constant(m, std::numeric_limits<double>::infinity());
    if ((d.array() > 0.0).all()) {
        const Eigen::MatrixXd as = d.cwiseInverse().asDiagonal() * a * d.cwiseInverse().asDiagonal();
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(as);
        const double emin = es.eigenvalues().minCoeff(), emax = es.eigenvalues().maxCoeff();
        if (!(emin > 1e-14 * emax)) {
            out.singular = true;
        } else if (n > m) {
            const double s2 = cost / (n - m);
            const Eigen::MatrixXd cov_s = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
                                          es.eigenvectors().transpose();
            for (int k = 0; k < m; ++k) sig(k) = std::sqrt(s2 * cov_s(k, k)) / d(k);
        }
    } else {
        out.singular = true;
    }
    if (out.singular) out.converged = false;
    for (int k = 0; k < m; ++k) out.params.push_back({names[k], p(k), sig(k)});
    return out;
}

/// Starting values (A, tau, c) for A exp(-x/tau) + c: c from the tail, then
/// a straight-line fit of log|y - c| against x over the decaying part.
inline Eigen::Vector3d monoexp_initial_guess(const Series& s)
{
    const std::size_t n = s.size();
    const std::size_t tail = std::max<std::size_t>(1, n / 10);
    double c = 0.0;
    for (std::size_t i = n - tail; i < n; ++i) c += s.y[i];
    c /= static_cast<double>(tail);

    double peak = 0.0;
    for (std::size_t i = 0; i < n; ++i) peak = std::max(peak, std::abs(s.y[i] - c));
    const double span = s.x.back() - s.x.front();
    double sign = (s.y.front() - c) >= 0.0 ? 1.0 : -1.0;

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int used = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = sign * (s.y[i] - c);
        if (!(d > 0.1 * peak)) continue;
        const double ly = std::log(d);
        sx += s.x[i];
        sy += ly;
        sxx += s.x[i] * s.x[i];
        sxy += s.x[i] * ly;
        ++used;
    }
    double tau = span / 3.0, amp = s.y.front() - c;
    if (used >= 2) {
        const double den = used * sxx - sx * sx;
        if (den > 0.0) {
            const double slope = (used * sxy - sx * sy) / den;
            const double intercept = (sy - slope * sx) / used;
            if (slope < 0.0 && std::isfinite(slope)) {
                tau = -1.0 / slope;
                amp = sign * std::exp(intercept);
            }
        }
    }
    if (!(peak > 0.0)) amp = 0.0;
    return {amp, tau, c};
}

/// Fits A exp(-x/tau) + c.
inline FitResult fit_monoexp(const Series& s, std::optional<Eigen::Vector3d> init = std::nullopt,
                             const FitOptions& opt = {})
{
    s.validate(4);
    const Eigen::VectorXd p0 = init ? Eigen::VectorXd(*init) : Eigen::VectorXd(monoexp_initial_guess(s));
    auto model = [](double x, const Eigen::VectorXd& p, Eigen::VectorXd& g) {
        const double e = std::exp(-x / p(1));
        g(0) = e;
        g(1) = p(0) * e * x / (p(1) * p(1));
        g(2) = 1.0;
        return p(0) * e + p(2);
    };
    auto r = levenberg_marquardt(s, model, p0, {"A", "tau", "c"}, opt);
    r.model = "monoexp";
    return r;
}

inline double fwhm_factor()
{
    return 4.0 * std::numbers::ln2;
}

/// Starting values (center, fwhm, amp, c) from the first two moments of |y - c|.
inline Eigen::Vector4d gaussian_initial_guess(const Series& s)
{
    const std::size_t n = s.size();
    const double c = 0.5 * (s.y.front() + s.y.back());
    std::size_t ext = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(s.y[i] - c) > std::abs(s.y[ext] - c)) ext = i;
    }
    const double amp = s.y[ext] - c;
    const double sign = amp >= 0.0 ? 1.0 : -1.0;
    double sw = 0, swx = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = std::max(0.0, sign * (s.y[i] - c));
        sw += w;
        swx += w * s.x[i];
    }
    double center = s.x[ext], fwhm = (s.x.back() - s.x.front()) / 4.0;
    if (sw > 0.0) {
        center = swx / sw;
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double w = std::max(0.0, sign * (s.y[i] - c));
            var += w * (s.x[i] - center) * (s.x[i] - center);
        }
        var /= sw;
        if (var > 0.0) fwhm = std::sqrt(8.0 * std::numbers::ln2 * var);
    }
    return {center, fwhm, amp, c};
}

/// Fits amp exp(-4 ln2 (x - center)^2 / fwhm^2) + c.
inline FitResult fit_gaussian(const Series& s, std::optional<Eigen::Vector4d> init = std::nullopt,
                              const FitOptions& opt = {})
{
    s.validate(5);
    const Eigen::VectorXd p0 = init ? Eigen::VectorXd(*init) : Eigen::VectorXd(gaussian_initial_guess(s));
    auto model = [](double x, const Eigen::VectorXd& p, Eigen::VectorXd& g) {
        const double u = (x - p(0)) / p(1);
        const double e = std::exp(-fwhm_factor() * u * u);
        g(0) = p(2) * e * 2.0 * fwhm_factor() * u / p(1);
        g(1) = p(2) * e * 2.0 * fwhm_factor() * u * u / p(1);
        g(2) = e;
        g(3) = 1.0;
        return p(2) * e + p(3);
    };
    auto r = levenberg_marquardt(s, model, p0, {"center", "fwhm", "amp", "c"}, opt);
    if (!r.params.empty()) r.params[1].value = std::abs(r.params[1].value);
    r.model = "gaussian";
    return r;
}

/// Echo width expected from an inhomogeneous linewidth: 2h / (g muB dB).
inline double echo_width_from_linewidth(double delta_b, double g)
{
    if (!(delta_b > 0.0) || !(g > 0.0)) throw InvalidArgument("echo width: need delta_b > 0 and g > 0");
    return 2.0 * constants::planck / (g * constants::bohr_magneton * delta_b);
}

/// Echo decay time when dephasing (t2) and singlet recombination act together.
inline double tau_echo_combined(double t2, double r_s)
{
    if (!(t2 > 0.0) || r_s < 0.0 || std::isnan(r_s)) {
        throw InvalidArgument("tau_echo_combined: need t2 > 0 (or infinite) and r_s >= 0");
    }
    return 1.0 / (1.0 / t2 + r_s / 4.0);
}

struct InterfaceT2 {
    double value = 0.0;        ///< s
    bool extrapolated = false; ///< density differs from the 1e11 cm^-2 reference
};

/// Dipolar T2 of a donor at depth d (nm) below an interface with areal spin
/// density sigma (cm^-2); linear 1/sigma scaling away from 1e11 cm^-2.
inline InterfaceT2 t2_interface(double d_nm, double sigma_cm2)
{
    if (!(d_nm > 0.0) || !(sigma_cm2 > 0.0) || !std::isfinite(d_nm) || !std::isfinite(sigma_cm2)) {
        throw InvalidArgument("t2_interface: need d > 0 and sigma > 0");
    }
    constexpr double reference_density = 1e11;
    return {4e-8 * d_nm * d_nm * (reference_density / sigma_cm2), sigma_cm2 != reference_density};
}

} // namespace pedmr
