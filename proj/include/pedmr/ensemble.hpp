#pragma once

// Inhomogeneously broadened ensemble of P / Pb0 spin pairs.
//
// Spin a of every pair is a 31P donor electron sitting in one hyperfine
// manifold; spin b is a Pb0 interface state. Each species contributes
// Gaussian lines; the ensemble observable is the weighted mean of the
// single-pair q_raw over the joint detuning distribution.

#include "pedmr/constants.hpp"
#include "pedmr/error.hpp"
#include "pedmr/sequence.hpp"
#include "pedmr/spin_core.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace pedmr {

enum class Species { PHyperfineLow, PHyperfineHigh, Pb0First, Pb0Second };

/// Which partner of the pair a species belongs to.
enum class Partner { Donor, Interface };

inline Partner partner_of(Species s)
{
    return (s == Species::PHyperfineLow || s == Species::PHyperfineHigh) ? Partner::Donor : Partner::Interface;
}

inline std::string_view species_name(Species s)
{
    switch (s) {
    case Species::PHyperfineLow: return "P-hyperfine-low";
    case Species::PHyperfineHigh: return "P-hyperfine-high";
    case Species::Pb0First: return "Pb0-1";
    case Species::Pb0Second: return "Pb0-2";
    }
    return "";
}

inline std::optional<Species> species_from_name(std::string_view n)
{
    for (auto s : {Species::PHyperfineLow, Species::PHyperfineHigh, Species::Pb0First, Species::Pb0Second}) {
        if (species_name(s) == n) return s;
    }
    return std::nullopt;
}

struct SpectralLine {
    Species species = Species::PHyperfineHigh;
    double g_center = 2.0;
    double field_offset = 0.0; ///< T, e.g. +-2.1 mT hyperfine shift
    double fwhm = 0.4e-3;      ///< T, Gaussian full width at half maximum
    double weight = 1.0;
};

/// B0 = h f / (g muB).
inline double resonance_field(double g, double f_mw)
{
    if (!(g > 0.0) || !(f_mw > 0.0)) throw InvalidArgument("resonance_field: g and f_mw must be positive");
    return constants::planck * f_mw / (g * constants::bohr_magneton);
}

/// Angular Rabi frequency g muB B1 / hbar.
inline double rabi_angular_frequency(double g, double b1)
{
    return g * constants::bohr_magneton * b1 / constants::hbar;
}

/// Rotating-frame detuning (rad/s) of a spin on `line`, shifted by the
/// sampled inhomogeneous `offset`, at static field b0.
inline double detuning(const SpectralLine& line, double b0, double offset, double f_mw)
{
    const double center = resonance_field(line.g_center, f_mw) + line.field_offset;
    return line.g_center * constants::bohr_magneton / constants::hbar * (b0 - center - offset);
}

struct SpectralModel {
    std::vector<SpectralLine> lines;
    double f_mw = 9.765e9; ///< Hz
    double b1 = 0.3e-3;    ///< T

    void validate() const
    {
        if (!(f_mw > 0.0) || !std::isfinite(f_mw)) throw ConfigError("spectral model: f_mw must be positive");
        if (!(b1 >= 0.0) || !std::isfinite(b1)) throw ConfigError("spectral model: b1 must be non-negative");
        for (auto partner : {Partner::Donor, Partner::Interface}) {
            double sum = 0.0;
            int count = 0;
            for (const auto& l : lines) {
                if (partner_of(l.species) != partner) continue;
                if (!(l.fwhm > 0.0)) {
                    throw ConfigError("spectral model: line " + std::string(species_name(l.species)) +
                                      " needs fwhm > 0");
                }
                if (!(l.weight >= 0.0) || !(l.g_center > 0.0)) {
                    throw ConfigError("spectral model: line " + std::string(species_name(l.species)) +
                                      " needs weight >= 0 and g > 0");
                }
                sum += l.weight;
                ++count;
            }
            const char* what = partner == Partner::Donor ? "donor (P)" : "interface (Pb0)";
            if (count == 0) throw ConfigError(std::string("spectral model: no ") + what + " line");
            if (std::abs(sum - 1.0) > 1e-9) {
                throw ConfigError(std::string("spectral model: ") + what + " line weights must sum to 1");
            }
        }
    }

    /// Hyperfine-split donor lines at g = 1.9985 (347.0 / 351.2 mT at 9.765 GHz),
    /// Pb0 doublet at g = 2.008 and 2.004 for B0 along [110].
    static SpectralModel standard()
    {
        SpectralModel m;
        const double hf_half = 2.1e-3;
        m.lines = {
            {Species::PHyperfineLow, 1.9985, -hf_half, 0.4e-3, 0.5},
            {Species::PHyperfineHigh, 1.9985, +hf_half, 0.4e-3, 0.5},
            {Species::Pb0First, 2.008, 0.0, 1.0e-3, 0.5},
            {Species::Pb0Second, 2.004, 0.0, 1.0e-3, 0.5},
        };
        return m;
    }
};

/// g-factor used to convert B1 into the common drive frequency of both spins:
/// the weighted donor g.
inline double drive_g(const SpectralModel& m)
{
    double g = 0.0;
    double w = 0.0;
    for (const auto& l : m.lines) {
        if (partner_of(l.species) == Partner::Donor) {
            g += l.weight * l.g_center;
            w += l.weight;
        }
    }
    if (!(w > 0.0)) throw ConfigError("spectral model: no weighted donor line");
    return g / w;
}

inline double drive_omega1(const SpectralModel& m)
{
    return rabi_angular_frequency(drive_g(m), m.b1);
}

struct QuadratureSpec {
    /// gauss-hermite: points_per_spin nodes per line.
    /// monte-carlo: points_per_spin seeded draws per spin.
    /// grid: uniform midpoint nodes on +-4 sigma of every line that is driven
    ///   at the current field, spaced finely enough that the first
    ///   discretisation revival of free precession lies beyond
    ///   revival_factor x the longest sequence; lines far from resonance
    ///   get far_points Gauss-Hermite nodes, or the same grid when
    ///   far_points is 0.
    enum class Scheme { GaussHermite, MonteCarlo, Grid };
    Scheme scheme = Scheme::GaussHermite;
    int points_per_spin = 32;
    std::uint64_t seed = 1;
    int far_points = 8;
    double revival_factor = 1.5;
    int max_points_per_line = 4096;

    void validate() const
    {
        if (points_per_spin < 1) throw ConfigError("quadrature: points_per_spin must be >= 1");
        if (scheme == Scheme::Grid) {
            if (far_points < 0) throw ConfigError("quadrature: far_points must be >= 0");
            if (!(revival_factor > 0.0)) throw ConfigError("quadrature: revival_factor must be positive");
            if (max_points_per_line < points_per_spin) {
                throw ConfigError("quadrature: max_points_per_line below points_per_spin");
            }
        }
    }
};

inline std::string_view scheme_name(QuadratureSpec::Scheme s)
{
    switch (s) {
    case QuadratureSpec::Scheme::GaussHermite: return "gauss-hermite";
    case QuadratureSpec::Scheme::MonteCarlo: return "monte-carlo";
    case QuadratureSpec::Scheme::Grid: return "grid";
    }
    return "";
}

inline std::optional<QuadratureSpec::Scheme> scheme_from_name(std::string_view n)
{
    using S = QuadratureSpec::Scheme;
    for (auto s : {S::GaussHermite, S::MonteCarlo, S::Grid}) {
        if (scheme_name(s) == n) return s;
    }
    return std::nullopt;
}

/// Nodes and weights for integrals against exp(-x^2) (physicists' Hermite),
/// from the eigen-decomposition of the Jacobi matrix (Golub-Welsch).
/// Nodes are returned in ascending order; weights sum to sqrt(pi).
inline std::pair<std::vector<double>, std::vector<double>> gauss_hermite(int n)
{
    if (n < 1) throw InvalidArgument("gauss_hermite: n must be >= 1");
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd sub(std::max(n - 1, 0));
    for (int k = 1; k < n; ++k) sub(k - 1) = std::sqrt(0.5 * k);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    std::vector<double> x(n), w(n);
    const double sqrt_pi = std::sqrt(std::numbers::pi);
    for (int i = 0; i < n; ++i) {
        x[i] = es.eigenvalues()(i);
        const double v0 = es.eigenvectors()(0, i);
        w[i] = sqrt_pi * v0 * v0;
    }
    // Exact antisymmetry of the nodes keeps symmetric integrands symmetric.
    for (int i = 0; i < n / 2; ++i) {
        const double xs = 0.5 * (x[n - 1 - i] - x[i]);
        const double ws = 0.5 * (w[n - 1 - i] + w[i]);
        x[i] = -xs;
        x[n - 1 - i] = xs;
        w[i] = w[n - 1 - i] = ws;
    }
    if (n % 2 == 1) x[n / 2] = 0.0;
    return {x, w};
}

/// One quadrature sample for a single spin.
struct SpinSample {
    double g = 2.0;
    double resonance = 0.0; ///< T, field at which this spin is on resonance
    double weight = 0.0;

    double detuning(double b0) const
    {
        return g * constants::bohr_magneton / constants::hbar * (b0 - resonance);
    }
};

inline double fwhm_to_sigma(double fwhm)
{
    return fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0)));
}

/// A line counts as driven when its nearest +-3 sigma edge lies within
/// 5 B1 of b0, i.e. its spins see at least a few percent inversion.
inline bool line_is_driven(double center, double sigma, double b0, double b1)
{
    return std::abs(b0 - center) - 3.0 * sigma <= 5.0 * b1;
}

/// Quadrature samples of the detuning distribution for one partner.
/// `b0` and `longest_sequence` (s) are only used by the grid scheme.
inline std::vector<SpinSample> spin_samples(const SpectralModel& model, Partner partner, const QuadratureSpec& quad,
                                            std::mt19937_64& rng, double b0 = 0.0, double longest_sequence = 0.0)
{
    std::vector<const SpectralLine*> lines;
    for (const auto& l : model.lines) {
        if (partner_of(l.species) == partner) lines.push_back(&l);
    }
    if (lines.empty()) throw ConfigError("spin_samples: empty species");

    std::vector<SpinSample> out;
    auto add_gauss_hermite = [&](const SpectralLine& l, double center, double sigma, int n) {
        const auto [x, w] = gauss_hermite(n);
        const double inv_sqrt_pi = 1.0 / std::sqrt(std::numbers::pi);
        for (std::size_t i = 0; i < x.size(); ++i) {
            out.push_back({l.g_center, center + std::sqrt(2.0) * sigma * x[i], l.weight * w[i] * inv_sqrt_pi});
        }
    };

    switch (quad.scheme) {
    case QuadratureSpec::Scheme::GaussHermite:
        for (const auto* l : lines) {
            add_gauss_hermite(*l, resonance_field(l->g_center, model.f_mw) + l->field_offset,
                              fwhm_to_sigma(l->fwhm), quad.points_per_spin);
        }
        break;
    case QuadratureSpec::Scheme::MonteCarlo: {
        std::uniform_real_distribution<double> pick(0.0, 1.0);
        std::normal_distribution<double> gauss(0.0, 1.0);
        const double w = 1.0 / quad.points_per_spin;
        for (int i = 0; i < quad.points_per_spin; ++i) {
            double u = pick(rng);
            const SpectralLine* chosen = lines.back();
            for (const auto* l : lines) {
                if (u < l->weight) {
                    chosen = l;
                    break;
                }
                u -= l->weight;
            }
            const double center = resonance_field(chosen->g_center, model.f_mw) + chosen->field_offset;
            out.push_back({chosen->g_center, center + fwhm_to_sigma(chosen->fwhm) * gauss(rng), w});
        }
        break;
    }
    case QuadratureSpec::Scheme::Grid: {
        constexpr double half_width = 4.0; // in sigma
        for (const auto* l : lines) {
            const double center = resonance_field(l->g_center, model.f_mw) + l->field_offset;
            const double sigma = fwhm_to_sigma(l->fwhm);
            if (quad.far_points > 0 && !line_is_driven(center, sigma, b0, model.b1)) {
                add_gauss_hermite(*l, center, sigma, quad.far_points);
                continue;
            }
            // Node spacing h (tesla) revives free precession after 1 / (gamma h).
            const double gamma = l->g_center * constants::bohr_magneton / constants::planck; // Hz/T
            const double needed = 2.0 * half_width * sigma * gamma * quad.revival_factor * longest_sequence;
            const int n = std::clamp(static_cast<int>(std::ceil(needed)), quad.points_per_spin,
                                     quad.max_points_per_line);
            const double h = 2.0 * half_width / n;
            std::vector<double> w(n);
            double norm = 0.0;
            for (int k = 0; k < n; ++k) {
                const double z = -half_width + (k + 0.5) * h;
                w[k] = std::exp(-0.5 * z * z);
                norm += w[k];
            }
            for (int k = 0; k < n; ++k) {
                const double z = -half_width + (k + 0.5) * h;
                out.push_back({l->g_center, center + sigma * z, l->weight * w[k] / norm});
            }
        }
        break;
    }
    }
    return out;
}

/// Memoised segment propagators for one pair. Durations along a sweep are
/// reached by chaining exp(G d_prev) exp(G (d - d_prev)), so a uniform sweep
/// costs one matrix exponential per generator plus one product per point.
///
/// `Matrix` is either the 16x16 Liouvillian propagator or, for dephasing-free
/// dynamics, the 4x4 non-unitary propagator exp(-i H_eff t).
template <typename Matrix>
class SegmentCache {
public:
    using GeneratorFn = Matrix (*)(const PairParams&, double drive, double phase);

    SegmentCache(const PairParams& params, GeneratorFn make) : params_(params), make_(make) {}

    const Matrix& pulse(double phase, double duration) { return lookup(generator(true, phase), duration); }
    const Matrix& free(double duration) { return lookup(generator(false, 0.0), duration); }

private:
    struct Generator {
        bool pulse;
        double phase;
        Matrix g;
        std::map<std::int64_t, Matrix> memo;
        std::int64_t last_key = 0;
        double last_duration = 0.0;
        bool has_last = false;
    };

    static std::int64_t key(double duration) { return std::llround(duration * 1e15); }

    Generator& generator(bool pulse, double phase)
    {
        for (auto& g : gens_) {
            if (g.pulse == pulse && g.phase == phase) return g;
        }
        const double drive = pulse ? params_.omega1 : params_.omega1_leak;
        gens_.push_back({pulse, phase, make_(params_, drive, pulse ? phase : 0.0), {}, 0, 0.0, false});
        return gens_.back();
    }

    const Matrix& lookup(Generator& g, double duration)
    {
        const std::int64_t k = key(duration);
        if (auto it = g.memo.find(k); it != g.memo.end()) return it->second;

        Matrix u;
        if (duration == 0.0) {
            u.setIdentity();
        } else if (g.has_last && duration > g.last_duration) {
            const double delta = duration - g.last_duration;
            const std::int64_t dk = key(delta);
            auto step = g.memo.find(dk);
            if (step == g.memo.end()) {
                step = g.memo.emplace(dk, matrix_exp((g.g * delta).eval())).first;
            }
            u.noalias() = step->second * g.memo.at(g.last_key);
        } else {
            u = matrix_exp((g.g * duration).eval());
        }
        g.last_key = k;
        g.last_duration = duration;
        g.has_last = true;
        return g.memo.emplace(k, u).first->second;
    }

    PairParams params_;
    GeneratorFn make_;
    std::vector<Generator> gens_; // free evolution plus one per pulse phase
};

/// -i H_eff with H_eff = H - (i/2)(r_s P_S + r_t P_T). Without dephasing the
/// master equation is exactly rho -> U rho U^dagger with U = exp(-i H_eff t).
inline Mat4 effective_generator(const PairParams& p, double drive, double phase)
{
    const auto& proj = Projectors::get();
    const Complex minus_i{0.0, -1.0};
    return minus_i * pair_hamiltonian(p, drive, phase) - 0.5 * (p.r_s * proj.singlet + p.r_t * proj.triplet);
}

namespace detail {

template <typename Matrix, typename Vector, typename Finish>
std::vector<double> run_sequences(SegmentCache<Matrix>& cache, const Vector& v0,
                                  std::span<const pseq::PulseSequence> sequences, Finish finish)
{
    std::vector<double> q(sequences.size());
    for (std::size_t s = 0; s < sequences.size(); ++s) {
        Vector v = v0;
        for (const auto& e : sequences[s].events) {
            if (const auto* p = std::get_if<pseq::PulseEvent>(&e)) {
                v = cache.pulse(p->phase, p->duration) * v;
            } else {
                v = cache.free(std::get<pseq::DelayEvent>(e).duration) * v;
            }
        }
        q[s] = finish(v);
    }
    return q;
}

} // namespace detail

/// q_raw of one pair for each sequence through the 16x16 Liouvillian.
inline std::vector<double> pair_q_liouville(const PairParams& params, std::span<const pseq::PulseSequence> sequences)
{
    SegmentCache<Superop> cache(params, &liouvillian);
    const PairState ss = steady_state();
    return detail::run_sequences(cache, vectorize(ss.rho), sequences,
                                 [&](const Vec16& v) { return q_raw(PairState{unvectorize(v)}, ss); });
}

/// Same observable propagating the pair amplitude vector; valid only for gamma_phi == 0.
inline std::vector<double> pair_q_amplitude(const PairParams& params, std::span<const pseq::PulseSequence> sequences)
{
    if (params.gamma_phi != 0.0) throw InvalidArgument("pair_q_amplitude: requires gamma_phi == 0");
    SegmentCache<Mat4> cache(params, &effective_generator);
    const Vec4 v0 = Vec4::Unit(static_cast<int>(PairBasis::DownDown));
    // Steady state |dd> has no singlet content.
    return detail::run_sequences(cache, v0, sequences, [](const Vec4& v) { return 0.5 * std::norm(v(1) - v(2)); });
}

/// q_raw of one pair for each sequence, starting from the steady state.
/// `params.omega1` is the drive during pulses.
inline std::vector<double> pair_q(const PairParams& params, std::span<const pseq::PulseSequence> sequences)
{
    return params.gamma_phi == 0.0 ? pair_q_amplitude(params, sequences) : pair_q_liouville(params, sequences);
}

/// Reference path: same observable through propagate_pulse / propagate_free,
/// one matrix exponential per event.
inline double pair_q_direct(const PairParams& params, const pseq::PulseSequence& sequence)
{
    PairState rho = steady_state();
    for (const auto& e : sequence.events) {
        if (const auto* p = std::get_if<pseq::PulseEvent>(&e)) {
            PairParams pp = params;
            pp.phase = p->phase;
            rho = propagate_pulse(rho, pp, p->duration);
        } else {
            rho = propagate_free(rho, params, std::get<pseq::DelayEvent>(e).duration);
        }
    }
    return q_raw(rho, steady_state());
}

/// Ensemble-averaged q_raw at static field b0 for a batch of sequences.
///
/// The drive amplitude is taken from the spectral model (B1 at the donor g);
/// detunings come from the quadrature samples; the dissipation parameters
/// come from `params_base`. Work is split over `threads` workers; the
/// reduction runs in pair-index order, so results do not depend on it.
inline std::vector<double> average_q(const SpectralModel& model, const QuadratureSpec& quad,
                                     std::span<const pseq::PulseSequence> sequences, const PairParams& params_base,
                                     double b0, unsigned threads = 1)
{
    model.validate();
    quad.validate();
    params_base.validate();
    if (!std::isfinite(b0)) throw InvalidArgument("average_q: non-finite b0");
    if (sequences.empty()) return {};

    double longest = 0.0;
    for (const auto& s : sequences) longest = std::max(longest, s.total_duration());
    std::mt19937_64 rng(quad.seed);
    const auto a = spin_samples(model, Partner::Donor, quad, rng, b0, longest);
    const auto b = spin_samples(model, Partner::Interface, quad, rng, b0, longest);
    const double omega1 = drive_omega1(model);

    const std::size_t n_seq = sequences.size();
    const std::size_t n_pairs = a.size() * b.size();
    // Pairs are summed in fixed blocks, then blocks in index order: the
    // result is independent of the thread count and memory stays bounded.
    constexpr std::size_t block = 64;
    const std::size_t n_blocks = (n_pairs + block - 1) / block;
    std::vector<double> block_sum(n_blocks * n_seq, 0.0);

    auto work = [&](std::size_t blk) {
        PairParams p = params_base;
        p.omega1 = omega1;
        double* out = block_sum.data() + blk * n_seq;
        const std::size_t end = std::min(n_pairs, (blk + 1) * block);
        for (std::size_t pair = blk * block; pair < end; ++pair) {
            const auto& sa = a[pair / b.size()];
            const auto& sb = b[pair % b.size()];
            p.delta_a = sa.detuning(b0);
            p.delta_b = sb.detuning(b0);
            const auto q = pair_q(p, sequences);
            const double w = sa.weight * sb.weight;
            for (std::size_t s = 0; s < n_seq; ++s) out[s] += w * q[s];
        }
    };

    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n_blocks)));
    if (threads == 1) {
        for (std::size_t i = 0; i < n_blocks; ++i) work(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n_blocks; i = next++) work(i);
            });
        }
    }

    std::vector<double> mean(n_seq, 0.0);
    for (std::size_t blk = 0; blk < n_blocks; ++blk) {
        for (std::size_t s = 0; s < n_seq; ++s) mean[s] += block_sum[blk * n_seq + s];
    }
    return mean;
}

inline double average_q(const SpectralModel& model, const QuadratureSpec& quad, const pseq::PulseSequence& sequence,
                        const PairParams& params_base, double b0)
{
    return average_q(model, quad, std::span<const pseq::PulseSequence>(&sequence, 1), params_base, b0).front();
}

} // namespace pedmr
