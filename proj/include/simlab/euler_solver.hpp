#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "simlab/nonlinearity.hpp"
#include "simlab/nse_solver.hpp"
#include "simlab/spectral_field.hpp"

namespace simlab {

enum class EulerScheme { rk4, midpoint };

inline EulerScheme euler_scheme_from_string(const std::string& s) {
    if (s == "rk4") return EulerScheme::rk4;
    if (s == "midpoint") return EulerScheme::midpoint;
    throw std::invalid_argument("unknown euler scheme: " + s);
}

inline const char* to_string(EulerScheme s) {
    return s == EulerScheme::rk4 ? "rk4" : "midpoint";
}

/// Time stepping for the truncated Euler equation u' + B(u) = 0.  The system
/// is a non-stiff ODE (no A^alpha term), so classical explicit schemes give
/// the best conservation per evaluation: RK4 drifts like dt^4, midpoint dt^2.
struct EulerParams {
    double dt = 1e-3;
    Lattice lattice;
    DealiasRule dealias;
    EulerScheme scheme = EulerScheme::rk4;

    void validate() const {
        if (!(dt > 0.0)) throw std::invalid_argument("EulerParams: dt must be > 0");
    }
};

namespace detail {

inline SpectralField euler_rhs(const SpectralField& u, const DealiasRule& rule) {
    SpectralField b = leray_project(advect(u, u, rule));
    b *= -1.0;
    return b;
}

inline SpectralField euler_step(const SpectralField& u, const EulerParams& p) {
    const double h = p.dt;
    if (p.scheme == EulerScheme::midpoint) {
        SpectralField k1 = euler_rhs(u, p.dealias);
        k1 *= 0.5 * h;
        SpectralField k2 = euler_rhs(u + k1, p.dealias);
        k2 *= h;
        return u + k2;
    }
    SpectralField k1 = euler_rhs(u, p.dealias);
    SpectralField u2 = k1;
    u2 *= 0.5 * h;
    u2 += u;
    SpectralField k2 = euler_rhs(u2, p.dealias);
    SpectralField u3 = k2;
    u3 *= 0.5 * h;
    u3 += u;
    SpectralField k3 = euler_rhs(u3, p.dealias);
    SpectralField u4 = k3;
    u4 *= h;
    u4 += u;
    SpectralField k4 = euler_rhs(u4, p.dealias);
    // u + h/6 (k1 + 2 k2 + 2 k3 + k4)
    SpectralField acc = k1;
    k2 *= 2.0;
    acc += k2;
    k3 *= 2.0;
    acc += k3;
    acc += k4;
    acc *= h / 6.0;
    return u + acc;
}

} // namespace detail

/// Euler flow map Phi(t, x): integrate u' = -B(u) from x to time t.
/// Whole steps of p.dt, plus one shorter final step when t is not a grid
/// multiple.  Phi(0, x) returns x unchanged.
inline SpectralField euler_flow(const SpectralField& x, double t, const EulerParams& p) {
    p.validate();
    if (t < 0.0) throw std::invalid_argument("euler_flow: t must be >= 0");
    if (t == 0.0) return x;
    const double n_real = t / p.dt;
    std::size_t n_full = static_cast<std::size_t>(std::floor(n_real + 1e-9));
    double rem = t - static_cast<double>(n_full) * p.dt;
    if (rem < 1e-12 * std::max(1.0, t)) rem = 0.0;
    SpectralField u = x;
    for (std::size_t s = 0; s < n_full; ++s) {
        u = detail::euler_step(u, p);
        if (!all_finite(u)) throw blowup_error(s + 1);
    }
    if (rem > 0.0) {
        EulerParams last = p;
        last.dt = rem;
        u = detail::euler_step(u, last);
        if (!all_finite(u)) throw blowup_error(n_full + 1);
    }
    return u;
}

/// Flow trajectory with states recorded every record_every steps.
inline Trajectory euler_flow_trajectory(const SpectralField& x, double t, const EulerParams& p,
                                        std::size_t record_every = 1) {
    p.validate();
    const std::size_t n_steps = static_cast<std::size_t>(std::llround(t / p.dt));
    Trajectory traj;
    traj.times.push_back(0.0);
    traj.states.push_back(x);
    SpectralField u = x;
    for (std::size_t s = 1; s <= n_steps; ++s) {
        u = detail::euler_step(u, p);
        if (!all_finite(u)) throw blowup_error(s);
        if (s % record_every == 0 || s == n_steps) {
            traj.times.push_back(p.dt * static_cast<double>(s));
            traj.states.push_back(u);
        }
    }
    return traj;
}

/// Max relative drift of the conserved invariants along an Euler trajectory.
/// ||u|| and ||u||_{H^1} are exact invariants of the truncated flow (both
/// cancellations of the trilinear form), so their drift is pure scheme error.
/// The H^sigma norm is NOT conserved and is reported for context only.
struct ConservationReport {
    double sigma = 3.0;
    double drift_l2 = 0.0;
    double drift_h1 = 0.0;
    double drift_hsigma = 0.0;
};

inline ConservationReport conservation_report(const Trajectory& traj, double sigma = 3.0) {
    if (traj.states.empty())
        throw std::invalid_argument("conservation_report: empty trajectory");
    ConservationReport rep;
    rep.sigma = sigma;
    const double l2_0 = sobolev_norm(traj.states.front(), 0.0);
    const double h1_0 = sobolev_norm(traj.states.front(), 1.0);
    const double hs_0 = sobolev_norm(traj.states.front(), sigma);
    for (const SpectralField& u : traj.states) {
        rep.drift_l2 = std::max(rep.drift_l2, std::abs(sobolev_norm(u, 0.0) - l2_0) /
                                                  std::max(l2_0, 1e-300));
        rep.drift_h1 = std::max(rep.drift_h1, std::abs(sobolev_norm(u, 1.0) - h1_0) /
                                                  std::max(h1_0, 1e-300));
        rep.drift_hsigma = std::max(rep.drift_hsigma, std::abs(sobolev_norm(u, sigma) - hs_0) /
                                                          std::max(hs_0, 1e-300));
    }
    return rep;
}

/// Taylor-Green velocity a * curl(psi), psi = cos(k0 x) cos(k0 y); the
/// standard smooth test datum.  k0 = 2 pi / L keeps it periodic on any box.
inline SpectralField taylor_green(const Lattice& lat, double amplitude = 1.0) {
    // u = (cos(k0 x) sin(k0 y), -sin(k0 x) cos(k0 y)) * amplitude
    // spectral support: the four modes (+-1, +-1)
    SpectralField u(lat);
    const int ip = lat.bin(1), im = lat.bin(-1);
    const double a = amplitude / 4.0;
    // cos kx sin ky = sum over s1, s2 of s2 * e^{i(s1 x + s2 y) k0} / (4 i)
    u.at(0, ip, ip) = Complex(0.0, -a);
    u.at(0, ip, im) = Complex(0.0, a);
    u.at(0, im, ip) = Complex(0.0, -a);
    u.at(0, im, im) = Complex(0.0, a);
    // -sin kx cos ky = -sum s1 * e^{i(s1 x + s2 y) k0} / (4 i)
    u.at(1, ip, ip) = Complex(0.0, a);
    u.at(1, ip, im) = Complex(0.0, a);
    u.at(1, im, ip) = Complex(0.0, -a);
    u.at(1, im, im) = Complex(0.0, -a);
    return u;
}

/// Taylor-Green plus a second incommensurate shear mode: a smooth datum with
/// genuinely active nonlinear transfer (pure Taylor-Green is a steady state
/// of the 2D Euler flow, so it cannot exercise drift scaling).
inline SpectralField perturbed_taylor_green(const Lattice& lat, double amplitude = 1.0,
                                            double perturbation = 0.3) {
    SpectralField u = taylor_green(lat, amplitude);
    // shear mode psi2 = cos(2 k0 x + k0 y): velocity along (-1, 2)/sqrt(5)
    const double b = amplitude * perturbation / 2.0;
    const int i2 = lat.bin(2), i1 = lat.bin(1);
    const int i2m = lat.bin(-2), i1m = lat.bin(-1);
    const double inv = 1.0 / std::sqrt(5.0);
    u.at(0, i2, i1) += Complex(-1.0 * inv * b, 0.0);
    u.at(1, i2, i1) += Complex(2.0 * inv * b, 0.0);
    u.at(0, i2m, i1m) += Complex(-1.0 * inv * b, 0.0);
    u.at(1, i2m, i1m) += Complex(2.0 * inv * b, 0.0);
    return u;
}

} // namespace simlab
