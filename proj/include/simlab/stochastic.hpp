#pragma once

#include <cmath>
#include <optional>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "simlab/nonlinearity.hpp"
#include "simlab/spectral_field.hpp"

namespace simlab {

/// Diagonal Q-Wiener noise over divergence-free Fourier modes.
///
/// sigma(k) = sigma0 * (1 + |k|^2)^{-decay_exponent/2} is the standard
/// deviation of the L^2-orthonormal mode coefficient.  One scalar degree of
/// freedom per k != 0 (the solenoidal direction), two components at k = 0.
/// decay_exponent > 2*alpha + 1 documents continuum trace class in H^{2 alpha};
/// on the finite lattice every trace is a finite sum computed from this spec.
struct NoiseSpec {
    double sigma0 = 1.0;
    double decay_exponent = 6.0;
    bool active_all = true;
    std::set<std::pair<int, int>> active_modes; // used when !active_all
    int band_cap = 0; // > 0: only modes with max(|m1|,|m2|) <= band_cap are forced

    bool active(int m1, int m2) const {
        if (band_cap > 0 && (std::abs(m1) > band_cap || std::abs(m2) > band_cap))
            return false;
        if (active_all) return true;
        return active_modes.count({m1, m2}) > 0;
    }

    double sigma(double k_sq) const {
        return sigma0 * std::pow(1.0 + k_sq, -decay_exponent / 2.0);
    }

    /// Same spectrum restricted to the dealias band of the given rule.
    /// Solver states are band-limited, so this is the noise they actually see.
    NoiseSpec restricted(const Lattice& lat, const DealiasRule& rule) const {
        NoiseSpec r = *this;
        const int cap = rule.max_freq(lat);
        r.band_cap = band_cap > 0 ? std::min(band_cap, cap) : cap;
        return r;
    }

    /// Symmetrise an explicit active set (Hermitian pairing needs -k with k).
    void insert_mode_pair(int m1, int m2) {
        active_modes.insert({m1, m2});
        active_modes.insert({-m1, -m2});
    }
};

/// Whether bin (i, j) carries a divergence-free degree of freedom on the
/// discrete torus.  Off-axis Nyquist modes (one index at -N/2, the other not
/// in {0, -N/2}) do not: their Hermitian mirror aliases back onto the same
/// Nyquist frequency, and requiring k . c = 0 at both bins forces c = 0.
/// Self-conjugate bins keep one real amplitude along k-perp.
inline bool has_solenoidal_dof(const Lattice& lat, int i, int j) {
    const int n = lat.n;
    const int im = (n - i) % n, jm = (n - j) % n;
    if (im == i && jm == j) return true; // self-conjugate, exact k-perp DOF
    return lat.freq(i) != -n / 2 && lat.freq(j) != -n / 2;
}

/// Tr[Q_gamma] = sum over active modes of sigma_k^2 (1 + |k|^2)^gamma,
/// with the k = 0 entry counted twice (its two components).  This equals
/// E ||W_1||^2_{H^gamma} for the process assembled by sample_wiener_increment.
inline double trace_in_sobolev(const NoiseSpec& noise, SobolevIndex gamma, const Lattice& lat) {
    double acc = 0.0;
    for (int i = 0; i < lat.n; ++i)
        for (int j = 0; j < lat.n; ++j) {
            const int m1 = lat.freq(i), m2 = lat.freq(j);
            if (!noise.active(m1, m2)) continue;
            if (!has_solenoidal_dof(lat, i, j)) continue;
            const double ksq = lat.k_sq(i, j);
            const double s = noise.sigma(ksq);
            const double term = s * s * std::pow(1.0 + ksq, gamma);
            acc += (m1 == 0 && m2 == 0) ? 2.0 * term : term;
        }
    return acc;
}

/// Exact stationary E ||Z||^2_{H^gamma} of the Ornstein-Uhlenbeck process:
/// sum of sigma_k^2 (1+|k|^2)^gamma / (2 lambda_k), lambda_k = (1+|k|^2)^alpha.
/// Independent of nu: the sqrt(nu) forcing and the nu A^alpha drift cancel.
inline double ou_stationary_moment(const NoiseSpec& noise, [[maybe_unused]] double nu,
                                   double alpha, SobolevIndex gamma, const Lattice& lat) {
    double acc = 0.0;
    for (int i = 0; i < lat.n; ++i)
        for (int j = 0; j < lat.n; ++j) {
            const int m1 = lat.freq(i), m2 = lat.freq(j);
            if (!noise.active(m1, m2)) continue;
            if (!has_solenoidal_dof(lat, i, j)) continue;
            const double ksq = lat.k_sq(i, j);
            const double s = noise.sigma(ksq);
            const double lam = std::pow(1.0 + ksq, alpha);
            const double term = s * s * std::pow(1.0 + ksq, gamma) / (2.0 * lam);
            acc += (m1 == 0 && m2 == 0) ? 2.0 * term : term;
        }
    return acc;
}

namespace detail {

enum class ModeKind { skip, zero, self_conjugate, pair_rep };

/// Canonical per-mode classification; draw order is row-major over bins and
/// only representatives consume randomness, which pins the determinism
/// contract of every sampler below.
inline ModeKind classify_mode(const Lattice& lat, int i, int j) {
    const int n = lat.n;
    if (i == 0 && j == 0) return ModeKind::zero;
    if (!has_solenoidal_dof(lat, i, j)) return ModeKind::skip;
    const int im = (n - i) % n, jm = (n - j) % n;
    if (im == i && jm == j) return ModeKind::self_conjugate;
    if (im < i || (im == i && jm < j)) return ModeKind::skip; // mirror of a rep
    return ModeKind::pair_rep;
}

/// Unit solenoidal direction k-perp/|k| for a non-zero mode.
inline void perp_dir(const Lattice& lat, int i, int j, double& d1, double& d2) {
    const double m1 = lat.freq(i), m2 = lat.freq(j);
    const double inv = 1.0 / std::sqrt(m1 * m1 + m2 * m2);
    d1 = -m2 * inv;
    d2 = m1 * inv;
}

} // namespace detail

/// Per-mode constants for the exact Ornstein-Uhlenbeck transition over one
/// step of size dt, in the coefficient normalisation s_k = sigma_k / L:
///   z' = decay * z + eta,   Var(eta) = eta_var,
///   dW increment variance dw_var = s_k^2 dt,
///   and the conditional split eta = c1 * dW + res_std * xi used when the
/// driving Wiener increment must be recorded alongside the convolution.
struct OuStepTables {
    Lattice lat;
    double dt = 0.0, nu = 0.0, alpha = 0.0;
    std::vector<double> decay, eta_std, dw_std, c1, res_std;

    OuStepTables(const Lattice& lattice, double dt_, double nu_, double alpha_,
                 const NoiseSpec& noise)
        : lat(lattice), dt(dt_), nu(nu_), alpha(alpha_) {
        if (!(dt > 0.0)) throw std::invalid_argument("ou step: dt must be > 0");
        if (!(nu > 0.0)) throw std::invalid_argument("ou step: nu must be > 0");
        if (!(alpha > 1.0)) throw std::invalid_argument("ou step: alpha must be > 1");
        const int n = lat.n;
        const std::size_t sz = static_cast<std::size_t>(n) * n;
        decay.resize(sz);
        eta_std.resize(sz);
        dw_std.resize(sz);
        c1.resize(sz);
        res_std.resize(sz);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const std::size_t m = static_cast<std::size_t>(i) * n + j;
                const double ksq = lat.k_sq(i, j);
                const double lam = std::pow(1.0 + ksq, alpha);
                // same association as semigroup_apply so the sigma = 0 case
                // reduces to it bit for bit
                const double ex = nu * dt * lam;
                decay[m] = std::exp(-ex);
                const bool forced = noise.active(lat.freq(i), lat.freq(j));
                const double s = forced ? noise.sigma(ksq) / lat.box : 0.0;
                const double s2 = s * s;
                const double eta_var = s2 * (-std::expm1(-2.0 * ex)) / (2.0 * lam);
                const double dw_var = s2 * dt;
                const double cov = s2 * (-std::expm1(-ex)) / (std::sqrt(nu) * lam);
                eta_std[m] = std::sqrt(eta_var);
                dw_std[m] = std::sqrt(dw_var);
                c1[m] = dw_var > 0.0 ? cov / dw_var : 0.0;
                const double res_var = dw_var > 0.0 ? eta_var - cov * cov / dw_var : 0.0;
                res_std[m] = std::sqrt(std::max(0.0, res_var));
            }
    }
};

namespace detail {

/// Sample a Hermitian solenoidal Gaussian field with per-mode total standard
/// deviation std_of(m) along the k-perp direction (two real components at
/// k = 0, one real amplitude at self-conjugate modes, complex otherwise).
template <class StdFn>
SpectralField sample_diagonal_gaussian(const Lattice& lat, GaussianSampler& gauss,
                                       StdFn&& std_of) {
    const int n = lat.n;
    SpectralField w(lat);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const ModeKind kind = classify_mode(lat, i, j);
            if (kind == ModeKind::skip) continue;
            const double sd = std_of(static_cast<std::size_t>(i) * n + j);
            if (kind == ModeKind::zero) {
                w.at(0, i, j) = sd * gauss.normal();
                w.at(1, i, j) = sd * gauss.normal();
                continue;
            }
            double d1, d2;
            perp_dir(lat, i, j, d1, d2);
            if (kind == ModeKind::self_conjugate) {
                const double a = sd * gauss.normal();
                w.at(0, i, j) = a * d1;
                w.at(1, i, j) = a * d2;
            } else {
                const Complex a = sd * Complex(gauss.normal(), gauss.normal()) / std::sqrt(2.0);
                const int im = (n - i) % n, jm = (n - j) % n;
                w.at(0, i, j) = a * d1;
                w.at(1, i, j) = a * d2;
                w.at(0, im, jm) = std::conj(w.at(0, i, j));
                w.at(1, im, jm) = std::conj(w.at(1, i, j));
            }
        }
    return w;
}

} // namespace detail

/// Wiener increment W_{t+dt} - W_t: independent Gaussians per divergence-free
/// mode, E ||dW||^2_{H^gamma} = dt * trace_in_sobolev(noise, gamma, lat).
inline SpectralField sample_wiener_increment(const NoiseSpec& noise, const Lattice& lat,
                                             double dt, GaussianSampler& gauss) {
    if (!(dt > 0.0))
        throw std::invalid_argument("sample_wiener_increment: dt must be > 0");
    const int n = lat.n;
    std::vector<double> sd(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (noise.active(lat.freq(i), lat.freq(j)))
                sd[static_cast<std::size_t>(i) * n + j] =
                    noise.sigma(lat.k_sq(i, j)) / lat.box * std::sqrt(dt);
    return detail::sample_diagonal_gaussian(lat, gauss, [&](std::size_t m) { return sd[m]; });
}

/// One exact transition of the Ornstein-Uhlenbeck process
/// dZ + nu A^alpha Z dt = sqrt(nu) dW:  per mode,
/// z' = e^{-nu lambda dt} z + eta with Var(eta) = sigma_k^2 (1 - e^{-2 nu lambda dt}) / (2 lambda).
/// This is the transition law of the mild solution itself; there is no
/// time-discretisation error at any dt.
inline SpectralField ou_exact_step(const SpectralField& z, double dt, double nu, double alpha,
                                   const NoiseSpec& noise, GaussianSampler& gauss,
                                   const OuStepTables* tables = nullptr) {
    std::optional<OuStepTables> local;
    if (!tables) local.emplace(z.lattice, dt, nu, alpha, noise);
    const OuStepTables& t = tables ? *tables : *local;
    SpectralField eta =
        detail::sample_diagonal_gaussian(z.lattice, gauss, [&](std::size_t m) { return t.eta_std[m]; });
    const int n = z.lattice.n;
    SpectralField out(z.lattice);
    for (int c = 0; c < 2; ++c)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                out.at(c, i, j) = t.decay[static_cast<std::size_t>(i) * n + j] * z.at(c, i, j) +
                                  eta.at(c, i, j);
    return out;
}

/// Jointly sampled Wiener increment and stochastic convolution over one step:
/// dz = integral of e^{-nu (dt - s) A^alpha} sqrt(nu) dW_s driven by the same
/// path as dw = W_{t+dt} - W_t.  Needed whenever a trajectory must be audited
/// against, or reconstructed from, its own driving noise.
struct NoiseIncrement {
    SpectralField dw;
    SpectralField dz;
};

inline NoiseIncrement sample_noise_increment(const OuStepTables& t, GaussianSampler& gauss) {
    const Lattice& lat = t.lat;
    const int n = lat.n;
    NoiseIncrement inc{SpectralField(lat), SpectralField(lat)};
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const detail::ModeKind kind = detail::classify_mode(lat, i, j);
            if (kind == detail::ModeKind::skip) continue;
            const std::size_t m = static_cast<std::size_t>(i) * n + j;
            if (kind == detail::ModeKind::zero) {
                for (int c = 0; c < 2; ++c) {
                    const double dw = t.dw_std[m] * gauss.normal();
                    const double dz = t.c1[m] * dw + t.res_std[m] * gauss.normal();
                    inc.dw.at(c, i, j) = dw;
                    inc.dz.at(c, i, j) = dz;
                }
                continue;
            }
            double d1, d2;
            detail::perp_dir(lat, i, j, d1, d2);
            if (kind == detail::ModeKind::self_conjugate) {
                const double dw = t.dw_std[m] * gauss.normal();
                const double dz = t.c1[m] * dw + t.res_std[m] * gauss.normal();
                inc.dw.at(0, i, j) = dw * d1;
                inc.dw.at(1, i, j) = dw * d2;
                inc.dz.at(0, i, j) = dz * d1;
                inc.dz.at(1, i, j) = dz * d2;
            } else {
                const Complex dw =
                    t.dw_std[m] * Complex(gauss.normal(), gauss.normal()) / std::sqrt(2.0);
                const Complex dz = t.c1[m] * dw + t.res_std[m] *
                                                      Complex(gauss.normal(), gauss.normal()) /
                                                      std::sqrt(2.0);
                const int im = (n - i) % n, jm = (n - j) % n;
                inc.dw.at(0, i, j) = dw * d1;
                inc.dw.at(1, i, j) = dw * d2;
                inc.dz.at(0, i, j) = dz * d1;
                inc.dz.at(1, i, j) = dz * d2;
                for (int c = 0; c < 2; ++c) {
                    inc.dw.at(c, im, jm) = std::conj(inc.dw.at(c, i, j));
                    inc.dz.at(c, im, jm) = std::conj(inc.dz.at(c, i, j));
                }
            }
        }
    return inc;
}

} // namespace simlab
