#pragma once

// Photocurrent response to a spin-pair deviation and its boxcar charge.

#include "pedmr/error.hpp"
#include "pedmr/io.hpp"

#include <cmath>
#include <ostream>
#include <span>

namespace pedmr {

struct TransientKernel {
    double tau_rise = 3e-6;
    double tau_fall = 11e-6;
    double tau_slow = 140e-6;
    double overshoot = 0.3; ///< beta, weight of the slow recovery lobe
    double gain = 1.0;      ///< current per unit q_raw

    void validate() const
    {
        const double all[] = {tau_rise, tau_fall, tau_slow, overshoot, gain};
        for (double v : all) {
            if (!std::isfinite(v)) throw ConfigError("kernel: non-finite parameter");
        }
        if (!(tau_rise > 0.0 && tau_rise < tau_fall && tau_fall < tau_slow)) {
            throw ConfigError("kernel: need 0 < tau_rise < tau_fall < tau_slow");
        }
        if (overshoot < 0.0) throw ConfigError("kernel: overshoot must be >= 0");
    }

    /// Unit-gain response K(t); zero at t = 0.
    double shape(double t) const
    {
        return (std::exp(-t / tau_fall) - std::exp(-t / tau_rise)) -
               overshoot * (std::exp(-t / tau_slow) - std::exp(-t / tau_fall));
    }

    /// Closed-form integral of K over [a, b].
    double integral(double a, double b) const
    {
        // int_a^b exp(-t/tau) dt = tau (exp(-a/tau) - exp(-b/tau))
        auto piece = [a, b](double tau) { return tau * (std::exp(-a / tau) - std::exp(-b / tau)); };
        return (piece(tau_fall) - piece(tau_rise)) - overshoot * (piece(tau_slow) - piece(tau_fall));
    }
};

struct BoxcarWindow {
    double t_start = 2e-6;
    double t_end = 22e-6;

    void validate() const
    {
        if (!std::isfinite(t_start) || !std::isfinite(t_end) || t_start < 0.0 || !(t_start < t_end)) {
            throw ConfigError("boxcar: need 0 <= t_start < t_end");
        }
    }
};

inline double transient(double q, const TransientKernel& kernel, double t)
{
    if (!(t >= 0.0)) throw InvalidArgument("transient: time must be >= 0");
    return kernel.gain * q * kernel.shape(t);
}

inline double boxcar_q(double q, const TransientKernel& kernel, const BoxcarWindow& window)
{
    window.validate();
    return kernel.gain * q * kernel.integral(window.t_start, window.t_end);
}

/// Writes "time_s,current_au" rows for the given sample times.
inline void write_transient_csv(std::ostream& os, double q, const TransientKernel& kernel,
                                std::span<const double> times)
{
    os << "time_s,current_au\n";
    for (double t : times) os << io::format_double(t) << ',' << io::format_double(transient(q, kernel, t)) << '\n';
}

} // namespace pedmr
