#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>

namespace pedmr {

namespace detail {

// Degree-13 Pade coefficients for exp(x) (Higham 2005, "The scaling and
// squaring method for the matrix exponential revisited").
inline constexpr std::array<double, 14> pade13 = {
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0,  129060195264000.0,   10559470521600.0,
    670442572800.0,      33522128640.0,       1323241920.0,
    40840800.0,          960960.0,            16380.0,
    182.0,               1.0};

// Largest 1-norm for which the [13/13] approximant is accurate to unit roundoff.
inline constexpr double pade13_theta = 5.371920351148152;

template <typename Derived>
double one_norm(const Eigen::MatrixBase<Derived>& a)
{
    return a.cwiseAbs().colwise().sum().maxCoeff();
}

} // namespace detail

/// Matrix exponential by [13/13] Pade approximation with scaling and squaring.
///
/// Works for any square Eigen matrix (fixed or dynamic size, real or complex).
/// The generators used here are non-normal (recombination makes the
/// Liouvillian non-Hermitian), so no eigendecomposition is attempted.
template <typename Derived>
typename Derived::PlainObject matrix_exp(const Eigen::MatrixBase<Derived>& a)
{
    using Matrix = typename Derived::PlainObject;
    using Scalar = typename Derived::Scalar;
    const auto& b = detail::pade13;

    const double norm = detail::one_norm(a);
    int squarings = 0;
    if (norm > detail::pade13_theta) {
        squarings = static_cast<int>(std::ceil(std::log2(norm / detail::pade13_theta)));
    }
    const Matrix x = a * Scalar(std::ldexp(1.0, -squarings));

    const Matrix ident = Matrix::Identity(a.rows(), a.cols());
    const Matrix x2 = x * x;
    const Matrix x4 = x2 * x2;
    const Matrix x6 = x4 * x2;

    const Matrix u_inner = Scalar(b[13]) * x6 + Scalar(b[11]) * x4 + Scalar(b[9]) * x2;
    const Matrix u = x * (x6 * u_inner + Scalar(b[7]) * x6 + Scalar(b[5]) * x4 +
                          Scalar(b[3]) * x2 + Scalar(b[1]) * ident);
    const Matrix v_inner = Scalar(b[12]) * x6 + Scalar(b[10]) * x4 + Scalar(b[8]) * x2;
    const Matrix v = x6 * v_inner + Scalar(b[6]) * x6 + Scalar(b[4]) * x4 +
                     Scalar(b[2]) * x2 + Scalar(b[0]) * ident;

    Matrix result = (v - u).partialPivLu().solve(v + u);
    for (int k = 0; k < squarings; ++k) {
        result = (result * result).eval();
    }
    return result;
}

} // namespace pedmr
