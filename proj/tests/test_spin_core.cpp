#include "generators.hpp"
#include "oracle.hpp"

#include "pedmr/ensemble.hpp"
#include "pedmr/spin_core.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

using namespace pedmr;
using gen::random_density;
using gen::random_params;

namespace {

constexpr double pi = std::numbers::pi;
constexpr double two_pi = 2.0 * std::numbers::pi;

double max_abs(const Eigen::MatrixXcd& m)
{
    return m.cwiseAbs().maxCoeff();
}

} // namespace

TEST(MatrixExponential, MatchesTaylorOracleOnRandomMatrices)
{
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int size : {1, 2, 4, 7, 16}) {
        for (double scale : {1e-3, 0.5, 3.0, 40.0}) {
            Eigen::MatrixXcd a(size, size);
            for (int i = 0; i < size; ++i)
                for (int j = 0; j < size; ++j) a(i, j) = {n(rng) * scale / size, n(rng) * scale / size};
            // Keep the spectrum in the decaying half-plane so entries stay O(1).
            a -= Eigen::MatrixXcd::Identity(size, size) * (a.cwiseAbs().colwise().sum().maxCoeff());
            const Eigen::MatrixXcd ref = oracle::expm_taylor(a);
            EXPECT_LT(max_abs(matrix_exp(a) - ref), 1e-11 * std::max(1.0, max_abs(ref)))
                << "size " << size << " scale " << scale;
        }
    }
}

TEST(MatrixExponential, ZeroDiagonalAndRealInputs)
{
    const Eigen::Matrix3d z = matrix_exp(Eigen::Matrix3d::Zero().eval());
    EXPECT_LT((z - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-15);
    const Eigen::Vector3d d(-2.0, 0.1, 1.5);
    const Eigen::Matrix3d e = matrix_exp(Eigen::Matrix3d(d.asDiagonal()));
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(e(i, i), std::exp(d(i)), 1e-14 * std::exp(d(i)));

    Eigen::Matrix2d rot;
    rot << 0.0, -pi / 3, pi / 3, 0.0;
    const Eigen::Matrix2d r = matrix_exp(rot);
    EXPECT_NEAR(r(0, 0), 0.5, 1e-14);
    EXPECT_NEAR(r(1, 0), std::sqrt(3.0) / 2, 1e-14);
}

TEST(SpinCore, PropagatorMatchesIndependentLiouvillianOn100Draws)
{
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> dur(1e-9, 300e-9);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        const PairParams p = random_params(rng);
        const double t = dur(rng);
        const Eigen::MatrixXcd ref = oracle::expm_taylor(oracle::liouvillian(p, p.omega1, p.phase) * t);
        const Eigen::MatrixXcd got = propagator(p, p.omega1, p.phase, t);
        worst = std::max(worst, max_abs(got - ref));
    }
    EXPECT_LT(worst, 1e-8);
}

TEST(SpinCore, GeneratorAgreesWithMasterEquationAction)
{
    std::mt19937_64 rng(5);
    for (int k = 0; k < 20; ++k) {
        const PairParams p = random_params(rng);
        const Superop l = liouvillian(p, p.omega1, p.phase);
        const Eigen::MatrixXcd ref = oracle::liouvillian(p, p.omega1, p.phase);
        EXPECT_LT(max_abs(l - ref), 1e-12 * max_abs(ref));
    }
}

TEST(SpinCore, ProjectorsAreComplementaryRankOne)
{
    const auto& pr = Projectors::get();
    EXPECT_LT(max_abs(pr.singlet * pr.singlet - pr.singlet), 1e-15);
    EXPECT_LT(max_abs(pr.triplet * pr.triplet - pr.triplet), 1e-15);
    EXPECT_LT(max_abs(pr.singlet + pr.triplet - Mat4::Identity()), 1e-15);
    EXPECT_NEAR(pr.singlet.trace().real(), 1.0, 1e-15);
    EXPECT_LT(max_abs(pr.singlet - oracle::singlet_projector()), 1e-15);
}

TEST(SpinCore, SingletFractionCheckpoints)
{
    EXPECT_NEAR(singlet_fraction(PairState::basis(PairBasis::DownDown)), 0.0, 1e-15);
    EXPECT_NEAR(singlet_fraction(PairState::basis(PairBasis::UpDown)), 0.5, 1e-15);
    EXPECT_NEAR(singlet_fraction(PairState::basis(PairBasis::UpUp)), 0.0, 1e-15);

    // Resonant pi/2 on spin a, spin b far detuned.
    PairParams p;
    p.omega1 = two_pi * 8.39e6;
    p.delta_b = two_pi * 2e9;
    const auto rho = propagate_pulse(steady_state(), p, (pi / 2) / p.omega1);
    EXPECT_NEAR(singlet_fraction(rho), 0.25, 1e-3);
}

TEST(SpinCore, ResonantPiAndTwoPiPulses)
{
    PairParams p;
    p.omega1 = two_pi * 8.39e6;
    const auto flipped = propagate_pulse(steady_state(), p, pi / p.omega1);
    EXPECT_NEAR(flipped.rho(0, 0).real(), 1.0, 1e-12);
    EXPECT_NEAR(singlet_fraction(flipped), 0.0, 1e-12);

    std::mt19937_64 rng(3);
    const PairState in{random_density(rng)};
    const auto out = propagate_pulse(in, p, two_pi / p.omega1);
    EXPECT_LT(max_abs(out.rho - in.rho), 1e-9);
}

TEST(SpinCore, SelectivePiPulseOnDetunedPair)
{
    PairParams p;
    p.omega1 = two_pi * 8.39e6;
    p.delta_b = two_pi * 500e6;
    const double t = pi / p.omega1;
    const auto rho = propagate_pulse(steady_state(), p, t);
    EXPECT_NEAR(singlet_fraction(rho), 0.5, 0.01);
    EXPECT_NEAR(rho.rho(1, 1).real(), 1.0, 1e-3);
    const Eigen::Matrix4cd ref = oracle::evolve(p, p.omega1, 0.0, t, steady_state().rho);
    EXPECT_LT(max_abs(rho.rho - ref), 1e-10);
}

TEST(SpinCore, FreeEvolutionExamples)
{
    PairParams p;
    p.delta_a = two_pi * 3e6;
    p.delta_b = -two_pi * 7e6;
    const auto dd = propagate_free(steady_state(), p, 1e-6);
    EXPECT_LT(max_abs(dd.rho - steady_state().rho), 1e-13);

    // Equal superposition of spin a: the <d|rho|u> coherence turns by i in 25 ns at 10 MHz.
    PairParams q;
    q.delta_a = two_pi * 10e6;
    const Eigen::Vector2cd plus(1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0));
    const Eigen::Vector2cd down(0.0, 1.0);
    const auto in = PairState::product(plus, down);
    const auto out = propagate_free(in, q, 25e-9);
    const int u = static_cast<int>(PairBasis::UpDown), d = static_cast<int>(PairBasis::DownDown);
    const Complex ratio = out.rho(d, u) / in.rho(d, u);
    EXPECT_NEAR(ratio.real(), 0.0, 1e-12);
    EXPECT_NEAR(ratio.imag(), 1.0, 1e-12);
}

TEST(SpinCore, SingletLossFromUpDown)
{
    // A large S-T0 splitting keeps the populations mixed, so |ud> (half
    // singlet) recombines at r_s / 2 until the pair is gone.
    PairParams p;
    p.delta_a = two_pi * 200e6;
    p.r_s = 1e6;
    for (double t : {0.2e-6, 1e-6, 3e-6}) {
        const auto rho = propagate_free(PairState::basis(PairBasis::UpDown), p, t);
        EXPECT_NEAR(rho.trace(), std::exp(-0.5 * p.r_s * t), 2e-3) << t;
    }
    // On resonance the mixing stops; compare with the oracle instead.
    PairParams r;
    r.r_s = 1e6;
    const auto rho = propagate_free(PairState::basis(PairBasis::UpDown), r, 1e-6);
    const Eigen::Matrix4cd ref = oracle::evolve(r, 0.0, 0.0, 1e-6, PairState::basis(PairBasis::UpDown).rho);
    EXPECT_LT(max_abs(rho.rho - ref), 1e-12);
    EXPECT_NEAR(rho.trace(), 0.5 + 0.5 * std::exp(-r.r_s * 1e-6), 1e-12);
}

TEST(SpinCore, QRawExamples)
{
    const auto ss = steady_state();
    EXPECT_DOUBLE_EQ(q_raw(ss, ss), 0.0);
    EXPECT_NEAR(q_raw(PairState::basis(PairBasis::UpDown), ss), 0.5, 1e-15);

    // Ideal echo with both spins on resonance returns the pair to |dd>.
    PairParams p;
    p.omega1 = two_pi * 8.39e6;
    const double t90 = (pi / 2) / p.omega1;
    auto rho = propagate_pulse(ss, p, t90);
    rho = propagate_free(rho, p, 200e-9);
    rho = propagate_pulse(rho, p, 2 * t90);
    rho = propagate_free(rho, p, 200e-9);
    rho = propagate_pulse(rho, p, t90);
    EXPECT_NEAR(q_raw(rho, ss), 0.0, 1e-12);

    // Hard pulses refocus static detunings.
    PairParams h;
    h.omega1 = two_pi * 2e9;
    h.delta_a = two_pi * 4e6;
    h.delta_b = -two_pi * 6e6;
    const double h90 = (pi / 2) / h.omega1;
    rho = propagate_pulse(ss, h, h90);
    rho = propagate_free(rho, h, 200e-9);
    rho = propagate_pulse(rho, h, 2 * h90);
    rho = propagate_free(rho, h, 200e-9);
    rho = propagate_pulse(rho, h, h90);
    EXPECT_NEAR(q_raw(rho, ss), 0.0, 1e-4);
}

TEST(SpinCore, ErrorPaths)
{
    PairState bad;
    bad.rho(0, 0) = std::numeric_limits<double>::quiet_NaN();
    PairParams p;
    EXPECT_THROW(propagate_free(bad, p, 1e-9), InvalidArgument);
    EXPECT_THROW(singlet_fraction(bad), InvalidArgument);
    EXPECT_THROW(propagate_free(steady_state(), p, -1e-9), InvalidArgument);
    EXPECT_THROW(q_raw(steady_state(), PairState{}), DegenerateState);
    p.r_s = -1.0;
    EXPECT_THROW(propagate_free(steady_state(), p, 1e-9), InvalidArgument);
}

TEST(SpinCoreProperty, TraceNeverIncreases)
{
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> dur(0.0, 2e-6);
    for (int k = 0; k < 50; ++k) {
        const PairParams p = random_params(rng);
        const PairState in{random_density(rng)};
        const auto out = propagate_pulse(in, p, dur(rng));
        EXPECT_LE(out.trace(), in.trace() + 1e-10);
        EXPECT_EQ(out.invariant_violation(), "");
    }
}

TEST(SpinCoreProperty, UnitaryLimitKeepsSpectrum)
{
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> dur(0.0, 1e-6);
    for (int k = 0; k < 30; ++k) {
        PairParams p = random_params(rng);
        p.r_s = p.r_t = p.gamma_phi = 0.0;
        const PairState in{random_density(rng)};
        const auto out = propagate_pulse(in, p, dur(rng));
        EXPECT_NEAR((out.rho * out.rho).trace().real(), (in.rho * in.rho).trace().real(), 1e-10);
        const Eigen::SelfAdjointEigenSolver<Mat4> a(in.rho, Eigen::EigenvaluesOnly);
        const Eigen::SelfAdjointEigenSolver<Mat4> b(Mat4(0.5 * (out.rho + out.rho.adjoint())), Eigen::EigenvaluesOnly);
        EXPECT_LT((a.eigenvalues() - b.eigenvalues()).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(SpinCoreProperty, SegmentsCompose)
{
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> dur(0.0, 500e-9);
    for (int k = 0; k < 30; ++k) {
        const PairParams p = random_params(rng);
        const PairState in{random_density(rng)};
        const double t1 = dur(rng), t2 = dur(rng);
        const auto once = propagate_free(in, p, t1 + t2);
        const auto twice = propagate_free(propagate_free(in, p, t1), p, t2);
        EXPECT_LT(max_abs(once.rho - twice.rho), 1e-9);
    }
}

TEST(SpinCoreProperty, PairPathsAgree)
{
    // Amplitude fast path, cached Liouville path and one-exponential-per-event path.
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> dur(0.0, 400e-9);
    std::uniform_int_distribution<int> phase(0, 3);
    for (int k = 0; k < 20; ++k) {
        PairParams p = random_params(rng);
        p.gamma_phi = 0.0;
        std::vector<pseq::PulseSequence> seqs(6);
        for (auto& s : seqs) {
            for (int e = 0; e < 5; ++e) {
                if (e % 2 == 0) {
                    const double d = dur(rng) / 4;
                    s.events.emplace_back(pseq::PulseEvent{p.omega1 * d, 0.5 * pi * phase(rng), d});
                } else {
                    s.events.emplace_back(pseq::DelayEvent{dur(rng)});
                }
            }
        }
        const auto fast = pair_q_amplitude(p, seqs);
        const auto full = pair_q_liouville(p, seqs);
        for (std::size_t i = 0; i < seqs.size(); ++i) {
            const double direct = pair_q_direct(p, seqs[i]);
            EXPECT_NEAR(fast[i], direct, 1e-10);
            EXPECT_NEAR(full[i], direct, 1e-10);
        }
    }
}
