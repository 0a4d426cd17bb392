#pragma once

// Reference implementations used only by the tests. They share no code with
// the library beyond the plain parameter structs.

#include "pedmr/spin_core.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>

namespace oracle {

using LComplex = std::complex<long double>;
using LMat = Eigen::Matrix<LComplex, Eigen::Dynamic, Eigen::Dynamic>;
using CMat = Eigen::MatrixXcd;

/// exp(a) by Taylor series in long double with scaling and squaring.
inline CMat expm_taylor(const CMat& a)
{
    const long double norm = a.cwiseAbs().colwise().sum().maxCoeff();
    int s = 0;
    while (std::ldexp(norm, -s) > 0.25L) ++s;
    LMat x = a.cast<LComplex>() * LComplex(std::ldexp(1.0L, -s));
    const auto n = a.rows();
    LMat term = LMat::Identity(n, n);
    LMat sum = term;
    for (int k = 1; k < 40; ++k) {
        term = (term * x) / LComplex(static_cast<long double>(k));
        sum += term;
    }
    for (int k = 0; k < s; ++k) sum = (sum * sum).eval();
    return sum.cast<std::complex<double>>();
}

inline Eigen::Matrix2cd sx()
{
    Eigen::Matrix2cd m;
    m << 0, 1, 1, 0;
    return m;
}

inline Eigen::Matrix2cd sy()
{
    Eigen::Matrix2cd m;
    m << 0, std::complex<double>(0, -1), std::complex<double>(0, 1), 0;
    return m;
}

inline Eigen::Matrix2cd sz()
{
    Eigen::Matrix2cd m;
    m << 1, 0, 0, -1;
    return m;
}

/// Operator on spin a (first factor) or spin b.
inline Eigen::Matrix4cd on_a(const Eigen::Matrix2cd& m)
{
    Eigen::Matrix4cd out = Eigen::Matrix4cd::Zero();
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k) out(2 * i + k, 2 * j + k) = m(i, j);
    return out;
}

inline Eigen::Matrix4cd on_b(const Eigen::Matrix2cd& m)
{
    Eigen::Matrix4cd out = Eigen::Matrix4cd::Zero();
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k) out(2 * k + i, 2 * k + j) = m(i, j);
    return out;
}

inline Eigen::Matrix4cd singlet_projector()
{
    Eigen::Vector4cd s(0, 1, -1, 0);
    s /= std::sqrt(2.0);
    return s * s.adjoint();
}

inline Eigen::Matrix4cd hamiltonian(const pedmr::PairParams& p, double drive, double phase)
{
    const Eigen::Matrix2cd t = std::cos(phase) * sx() + std::sin(phase) * sy();
    Eigen::Matrix4cd h = 0.5 * p.delta_a * on_a(sz()) + 0.5 * p.delta_b * on_b(sz()) +
                         0.5 * drive * (on_a(t) + on_b(t));
    h += 0.25 * p.j_ex * (on_a(sx()) * on_b(sx()) + on_a(sy()) * on_b(sy()) + on_a(sz()) * on_b(sz()));
    return h;
}

/// Action of the master-equation generator on one density matrix.
inline Eigen::Matrix4cd generator_action(const pedmr::PairParams& p, double drive, double phase,
                                         const Eigen::Matrix4cd& rho)
{
    const std::complex<double> i1(0, 1);
    const Eigen::Matrix4cd h = hamiltonian(p, drive, phase);
    const Eigen::Matrix4cd ps = singlet_projector();
    const Eigen::Matrix4cd pt = Eigen::Matrix4cd::Identity() - ps;
    Eigen::Matrix4cd out = -i1 * (h * rho - rho * h);
    out -= 0.5 * p.r_s * (ps * rho + rho * ps);
    out -= 0.5 * p.r_t * (pt * rho + rho * pt);
    for (const Eigen::Matrix4cd& z : {on_a(sz()), on_b(sz())}) {
        const Eigen::Matrix4cd l = std::sqrt(0.5 * p.gamma_phi) * z;
        out += l * rho * l.adjoint() - 0.5 * (l.adjoint() * l * rho + rho * l.adjoint() * l);
    }
    return out;
}

/// 16x16 generator assembled column by column from its action on the
/// matrix units, in column-major vectorisation.
inline CMat liouvillian(const pedmr::PairParams& p, double drive, double phase)
{
    CMat l(16, 16);
    for (int c = 0; c < 16; ++c) {
        Eigen::Matrix4cd e = Eigen::Matrix4cd::Zero();
        e(c % 4, c / 4) = 1.0;
        const Eigen::Matrix4cd out = generator_action(p, drive, phase, e);
        for (int r = 0; r < 16; ++r) l(r, c) = out(r % 4, r / 4);
    }
    return l;
}

/// Density matrix after `duration` under a constant generator.
inline Eigen::Matrix4cd evolve(const pedmr::PairParams& p, double drive, double phase, double duration,
                               const Eigen::Matrix4cd& rho)
{
    const CMat u = expm_taylor(oracle::liouvillian(p, drive, phase) * duration);
    Eigen::VectorXcd v(16);
    for (int r = 0; r < 16; ++r) v(r) = rho(r % 4, r / 4);
    const Eigen::VectorXcd w = u * v;
    Eigen::Matrix4cd out;
    for (int r = 0; r < 16; ++r) out(r % 4, r / 4) = w(r);
    return out;
}

} // namespace oracle
