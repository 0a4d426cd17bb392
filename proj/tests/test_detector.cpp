#include "pedmr/detector.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>
#include <sstream>

using namespace pedmr;

namespace {

double simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
               double whole, double tol, int depth)
{
    const double m = 0.5 * (a + b);
    const double lm = f(0.5 * (a + m)), rm = f(0.5 * (m + b));
    const double left = (m - a) / 6 * (fa + 4 * lm + fm);
    const double right = (b - m) / 6 * (fm + 4 * rm + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15 * tol) return left + right + (left + right - whole) / 15;
    return simpson(f, a, m, fa, lm, fm, left, tol / 2, depth - 1) + simpson(f, m, b, fm, rm, fb, right, tol / 2, depth - 1);
}

// Adaptive Simpson with a tolerance relative to the integral of |f|.
double adaptive_integral(const std::function<double(double)>& f, double a, double b, double rel_tol)
{
    double scale = 0.0;
    for (int i = 0; i < 1000; ++i) scale += std::abs(f(a + (i + 0.5) * (b - a) / 1000)) * (b - a) / 1000;
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    return simpson(f, a, b, fa, fm, fb, (b - a) / 6 * (fa + 4 * fm + fb), rel_tol * scale, 40);
}

} // namespace

TEST(Detector, KernelStartsAtZero)
{
    const TransientKernel k;
    EXPECT_EQ(k.shape(0.0), 0.0);
    EXPECT_EQ(transient(0.0, k, 5e-6), 0.0);
    for (double t = 0; t < 200e-6; t += 1e-6) EXPECT_EQ(transient(0.0, k, t), 0.0);
    EXPECT_THROW(transient(1.0, k, -1e-9), InvalidArgument);
}

TEST(Detector, DefaultKernelShape)
{
    const TransientKernel k;
    std::vector<double> t, y;
    for (int i = 0; i <= 200000; ++i) {
        t.push_back(i * 1e-9);
        y.push_back(k.shape(t.back()));
    }
    std::size_t maxima = 0, argmax = 0, first_zero = 0;
    for (std::size_t i = 1; i + 1 < y.size(); ++i) {
        if (y[i] > y[i - 1] && y[i] >= y[i + 1] && y[i] > 0) {
            ++maxima;
            argmax = i;
        }
        if (!first_zero && y[i - 1] > 0 && y[i] <= 0) first_zero = i;
    }
    EXPECT_EQ(maxima, 1u);
    EXPECT_LT(t[argmax], 11e-6);
    ASSERT_GT(first_zero, 0u);
    double lobe = 0.0;
    for (std::size_t i = first_zero; i < y.size(); ++i) lobe = std::min(lobe, y[i]);
    EXPECT_LT(lobe, 0.0);
}

TEST(Detector, BoxcarIsLinearInQ)
{
    const TransientKernel k;
    const BoxcarWindow w;
    EXPECT_EQ(boxcar_q(0.0, k, w), 0.0);
    for (double q : {1e-3, 0.25, -0.7}) {
        EXPECT_DOUBLE_EQ(boxcar_q(2 * q, k, w), 2 * boxcar_q(q, k, w));
        EXPECT_DOUBLE_EQ(boxcar_q(q, k, w), q * boxcar_q(1.0, k, w));
    }
}

TEST(Detector, DefaultBoxcarMatchesQuadrature)
{
    const TransientKernel k;
    const BoxcarWindow w;
    const double ref = adaptive_integral([&](double t) { return k.shape(t); }, w.t_start, w.t_end, 1e-13);
    EXPECT_NEAR(boxcar_q(1.0, k, w), ref, 1e-9 * std::abs(ref));
}

TEST(DetectorProperty, ClosedFormMatchesQuadratureOn50Kernels)
{
    std::mt19937_64 rng(44);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int n = 0; n < 50; ++n) {
        TransientKernel k;
        k.tau_rise = 0.5e-6 + 5e-6 * u(rng);
        k.tau_fall = k.tau_rise * (1.2 + 8 * u(rng));
        k.tau_slow = k.tau_fall * (1.5 + 20 * u(rng));
        k.overshoot = 0.8 * u(rng);
        k.gain = 0.1 + 3 * u(rng);
        ASSERT_NO_THROW(k.validate());
        BoxcarWindow w;
        w.t_start = 10e-6 * u(rng);
        w.t_end = w.t_start + 1e-6 + 60e-6 * u(rng);
        const double ref =
            adaptive_integral([&](double t) { return k.gain * k.shape(t); }, w.t_start, w.t_end, 1e-13);
        EXPECT_NEAR(boxcar_q(1.0, k, w), ref, 1e-9 * std::abs(ref)) << n;
    }
}

TEST(Detector, Validation)
{
    TransientKernel k;
    k.tau_fall = k.tau_rise / 2;
    EXPECT_THROW(k.validate(), ConfigError);
    k = TransientKernel{};
    k.overshoot = -0.1;
    EXPECT_THROW(k.validate(), ConfigError);
    BoxcarWindow w;
    w.t_end = w.t_start;
    EXPECT_THROW(boxcar_q(1.0, TransientKernel{}, w), ConfigError);
}

TEST(Detector, TransientCsv)
{
    const TransientKernel k;
    std::ostringstream os;
    const std::vector<double> times = {0.0, 1e-6, 2e-6};
    write_transient_csv(os, 0.5, k, times);
    const std::string out = os.str();
    EXPECT_EQ(out.substr(0, out.find('\n')), "time_s,current_au");
    EXPECT_EQ(std::count(out.begin(), out.end(), '\n'), 4);
    EXPECT_NE(out.find("\n0,0\n"), std::string::npos);
}
