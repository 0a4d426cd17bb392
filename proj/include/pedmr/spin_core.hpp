#pragma once

// Density-matrix dynamics of a single weakly coupled P / Pb0 spin pair.
//
// Basis order is {|uu>, |ud>, |du>, |dd>} with spin a (donor) as the first
// tensor factor. Liouville space uses Eigen's column-major vectorisation,
// vec(rho)[i + 4 j] = rho(i, j), so vec(A rho B) = (B^T (x) A) vec(rho).

#include "pedmr/error.hpp"
#include "pedmr/matrix_exponential.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <string>

namespace pedmr {

using Complex = std::complex<double>;
using Mat2 = Eigen::Matrix<Complex, 2, 2>;
using Mat4 = Eigen::Matrix<Complex, 4, 4>;
using Vec4 = Eigen::Matrix<Complex, 4, 1>;
using Superop = Eigen::Matrix<Complex, 16, 16>;
using Vec16 = Eigen::Matrix<Complex, 16, 1>;

enum class PairBasis { UpUp = 0, UpDown = 1, DownUp = 2, DownDown = 3 };

namespace detail {

inline Mat4 kron(const Mat2& a, const Mat2& b)
{
    Mat4 out;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
    return out;
}

inline Superop kron(const Mat4& a, const Mat4& b)
{
    Superop out;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            out.block<4, 4>(4 * i, 4 * j) = a(i, j) * b;
    return out;
}

struct Pauli {
    Mat2 x, y, z, id;
    Pauli()
    {
        const Complex i1{0.0, 1.0};
        x << 0, 1, 1, 0;
        y << 0, -i1, i1, 0;
        z << 1, 0, 0, -1;
        id.setIdentity();
    }
};

inline const Pauli& pauli()
{
    static const Pauli p;
    return p;
}

} // namespace detail

/// Singlet and triplet projectors of the pair.
struct Projectors {
    Mat4 singlet; ///< |S><S|, |S> = (|ud> - |du>)/sqrt(2)
    Mat4 triplet; ///< identity minus singlet

    static const Projectors& get()
    {
        static const Projectors p = [] {
            Projectors out;
            Vec4 s = Vec4::Zero();
            s(1) = 1.0 / std::sqrt(2.0);
            s(2) = -1.0 / std::sqrt(2.0);
            out.singlet = s * s.adjoint();
            out.triplet = Mat4::Identity() - out.singlet;
            return out;
        }();
        return p;
    }
};

/// Rotating-frame Hamiltonian and dissipation parameters of one pair.
/// All frequencies are angular (rad/s), all rates in 1/s.
struct PairParams {
    double delta_a = 0.0;
    double delta_b = 0.0;
    double omega1 = 0.0;
    double phase = 0.0;
    double r_s = 0.0;
    double r_t = 0.0;
    double gamma_phi = 0.0; ///< pure dephasing 1/T2, applied to each spin
    double j_ex = 0.0;
    double omega1_leak = 0.0; ///< residual x-phase drive during free evolution

    void validate() const
    {
        const double all[] = {delta_a, delta_b, omega1, phase, r_s, r_t, gamma_phi, j_ex, omega1_leak};
        for (double v : all) {
            if (!std::isfinite(v)) throw InvalidArgument("PairParams: non-finite parameter");
        }
        if (r_s < 0 || r_t < 0 || gamma_phi < 0) {
            throw InvalidArgument("PairParams: rates must be non-negative");
        }
        if (omega1 < 0 || omega1_leak < 0) {
            throw InvalidArgument("PairParams: drive amplitude must be non-negative");
        }
    }
};

/// 4x4 density matrix of one pair. Trace may drop below one as pairs recombine.
struct PairState {
    Mat4 rho = Mat4::Zero();

    static PairState basis(PairBasis b)
    {
        PairState s;
        const auto k = static_cast<int>(b);
        s.rho(k, k) = 1.0;
        return s;
    }

    static PairState pure(const Vec4& psi)
    {
        return PairState{psi * psi.adjoint()};
    }

    /// Product state of two single-spin kets (first entry = spin up amplitude).
    static PairState product(const Eigen::Vector2cd& a, const Eigen::Vector2cd& b)
    {
        Vec4 psi;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                psi(2 * i + j) = a(i) * b(j);
        return pure(psi);
    }

    double trace() const { return rho.trace().real(); }

    bool is_finite() const { return rho.allFinite(); }

    /// Checks hermiticity, positivity and the trace bound. Returns an empty
    /// string when the state is valid, otherwise a description of the violation.
    std::string invariant_violation() const
    {
        if (!is_finite()) return "non-finite entries";
        if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-12) return "not Hermitian";
        const Mat4 herm = 0.5 * (rho + rho.adjoint());
        const Eigen::SelfAdjointEigenSolver<Mat4> es(herm, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -1e-10) return "negative eigenvalue";
        const double tr = trace();
        if (tr < -1e-12 || tr > 1.0 + 1e-12) return "trace outside [0, 1]";
        return {};
    }
};

inline Vec16 vectorize(const Mat4& m)
{
    return Eigen::Map<const Vec16>(m.data());
}

inline Mat4 unvectorize(const Vec16& v)
{
    return Eigen::Map<const Mat4>(v.data());
}

/// Coherent generator H/hbar in rad/s for a drive of amplitude `drive` and phase `phase`.
inline Mat4 pair_hamiltonian(const PairParams& p, double drive, double phase)
{
    using detail::kron;
    const auto& s = detail::pauli();
    const Mat2 transverse = std::cos(phase) * s.x + std::sin(phase) * s.y;
    Mat4 h = (0.5 * p.delta_a) * kron(s.z, s.id) + (0.5 * p.delta_b) * kron(s.id, s.z) +
             (0.5 * drive) * (kron(transverse, s.id) + kron(s.id, transverse));
    if (p.j_ex != 0.0) {
        h += (0.25 * p.j_ex) * (kron(s.x, s.x) + kron(s.y, s.y) + kron(s.z, s.z));
    }
    return h;
}

/// Full 16x16 Liouvillian: coherent part, singlet/triplet recombination as
/// anticommutators on P_S / P_T, and sigma_z dephasing on each spin.
inline Superop liouvillian(const PairParams& p, double drive, double phase)
{
    using detail::kron;
    const auto& s = detail::pauli();
    const auto& proj = Projectors::get();
    const Mat4 id4 = Mat4::Identity();

    const Mat4 h = pair_hamiltonian(p, drive, phase);
    const Complex minus_i{0.0, -1.0};
    Superop l = minus_i * (kron(id4, h) - kron(Mat4(h.transpose()), id4));

    if (p.r_s != 0.0) {
        l -= (0.5 * p.r_s) * (kron(id4, proj.singlet) + kron(Mat4(proj.singlet.transpose()), id4));
    }
    if (p.r_t != 0.0) {
        l -= (0.5 * p.r_t) * (kron(id4, proj.triplet) + kron(Mat4(proj.triplet.transpose()), id4));
    }
    if (p.gamma_phi != 0.0) {
        // L_k = sqrt(gamma/2) sigma_z^(k): single-spin coherences decay at gamma.
        const Mat4 za = kron(s.z, s.id);
        const Mat4 zb = kron(s.id, s.z);
        l += (0.5 * p.gamma_phi) * (kron(za, za) + kron(zb, zb) - 2.0 * Superop::Identity());
    }
    return l;
}

/// exp(L * duration) for a piecewise-constant segment.
inline Superop propagator(const PairParams& p, double drive, double phase, double duration)
{
    if (!(duration >= 0.0) || !std::isfinite(duration)) {
        throw InvalidArgument("propagator: duration must be finite and non-negative");
    }
    if (duration == 0.0) return Superop::Identity();
    return matrix_exp((liouvillian(p, drive, phase) * duration).eval());
}

inline PairState evolve(const Superop& u, const PairState& state)
{
    return PairState{unvectorize(u * vectorize(state.rho))};
}

namespace detail {

inline void check_inputs(const PairState& state, const PairParams& params)
{
    if (!state.is_finite()) throw InvalidArgument("non-finite density matrix");
    params.validate();
}

} // namespace detail

/// Evolution under the driven generator (rectangular pulse).
inline PairState propagate_pulse(const PairState& state, const PairParams& params, double duration)
{
    detail::check_inputs(state, params);
    return evolve(propagator(params, params.omega1, params.phase, duration), state);
}

/// Free evolution between pulses (drive off, apart from optional leakage).
inline PairState propagate_free(const PairState& state, const PairParams& params, double duration)
{
    detail::check_inputs(state, params);
    return evolve(propagator(params, params.omega1_leak, 0.0, duration), state);
}

/// Tr(P_S rho).
inline double singlet_fraction(const PairState& state)
{
    if (!state.is_finite()) throw InvalidArgument("non-finite density matrix");
    return (Projectors::get().singlet * state.rho).trace().real();
}

/// Deviation of the end-of-sequence singlet content from the steady state.
///
/// The end state is not renormalised: pairs lost to recombination during the
/// sequence no longer contribute to the post-sequence transient. The steady
/// state is normalised to unit trace.
inline double q_raw(const PairState& state_end, const PairState& state_steady)
{
    const double ss_trace = state_steady.trace();
    if (!(std::abs(ss_trace) > 0.0)) throw DegenerateState("q_raw: steady state has zero trace");
    if (!state_end.is_finite()) throw InvalidArgument("q_raw: non-finite end state");
    return singlet_fraction(state_end) - singlet_fraction(state_steady) / ss_trace;
}

/// Steady-state configuration between shots: both spins down.
inline PairState steady_state()
{
    return PairState::basis(PairBasis::DownDown);
}

} // namespace pedmr
