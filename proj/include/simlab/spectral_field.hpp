#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "simlab/lattice.hpp"
#include "simlab/rng.hpp"

namespace simlab {

using Complex = std::complex<double>;

/// A Sobolev regularity index; norms accept any finite real value.
using SobolevIndex = double;

/// Divergence-free velocity field stored as Fourier coefficients.
///
/// c(component, i, j) is the coefficient of e^{i k.x} for the wavevector at
/// bin (i, j); see Lattice for the bin <-> frequency map.  Real fields carry
/// Hermitian symmetry c(-k) = conj(c(k)); solenoidal fields satisfy
/// k . c(k) = 0 for k != 0.  Both properties are maintained by the
/// operations below and checked by the predicates, not stored as flags.
struct SpectralField {
    Lattice lattice;
    std::vector<Complex> coef; // 2 * N * N, component-major, then row-major

    SpectralField() = default;
    explicit SpectralField(const Lattice& lat)
        : lattice(lat), coef(2 * static_cast<std::size_t>(lat.size())) {}

    Complex& at(int c, int i, int j) {
        return coef[static_cast<std::size_t>((c * lattice.n + i) * lattice.n + j)];
    }
    const Complex& at(int c, int i, int j) const {
        return coef[static_cast<std::size_t>((c * lattice.n + i) * lattice.n + j)];
    }

    SpectralField& operator+=(const SpectralField& o) {
        for (std::size_t m = 0; m < coef.size(); ++m) coef[m] += o.coef[m];
        return *this;
    }
    SpectralField& operator-=(const SpectralField& o) {
        for (std::size_t m = 0; m < coef.size(); ++m) coef[m] -= o.coef[m];
        return *this;
    }
    SpectralField& operator*=(double a) {
        for (auto& c : coef) c *= a;
        return *this;
    }

    friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
    friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
    friend SpectralField operator*(double a, SpectralField u) { return u *= a; }
};

inline void check_same_lattice(const SpectralField& u, const SpectralField& v,
                               const char* where) {
    if (!(u.lattice == v.lattice))
        throw std::invalid_argument(std::string(where) + ": lattice mismatch");
}

inline double max_abs_coef(const SpectralField& u) {
    double m = 0.0;
    for (const auto& c : u.coef) m = std::max(m, std::abs(c));
    return m;
}

inline bool all_finite(const SpectralField& u) {
    for (const auto& c : u.coef)
        if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) return false;
    return true;
}

/// max_k |c(-k) - conj(c(k))|
inline double hermitian_defect(const SpectralField& u) {
    const int n = u.lattice.n;
    double d = 0.0;
    for (int c = 0; c < 2; ++c)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const int im = (n - i) % n, jm = (n - j) % n;
                d = std::max(d, std::abs(u.at(c, im, jm) - std::conj(u.at(c, i, j))));
            }
    return d;
}

/// max_{k != 0} |k . c(k)| / |k|   (integer-frequency scaling)
inline double solenoidal_defect(const SpectralField& u) {
    const int n = u.lattice.n;
    double d = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == 0 && j == 0) continue;
            const double m1 = u.lattice.freq(i), m2 = u.lattice.freq(j);
            const Complex div = m1 * u.at(0, i, j) + m2 * u.at(1, i, j);
            d = std::max(d, std::abs(div) / std::sqrt(m1 * m1 + m2 * m2));
        }
    return d;
}

inline bool is_real_field(const SpectralField& u, double tol = 1e-10) {
    return hermitian_defect(u) <= tol * (1.0 + max_abs_coef(u));
}

inline bool is_solenoidal(const SpectralField& u, double tol = 1e-10) {
    return solenoidal_defect(u) <= tol * (1.0 + max_abs_coef(u));
}

/// Leray projection: per mode k != 0, c <- c - k (k.c) / |k|^2; the k = 0
/// coefficient passes through unchanged.  Idempotent, self-adjoint in every
/// H^s, annihilates gradient fields.
inline SpectralField leray_project(const SpectralField& u) {
    const int n = u.lattice.n;
    SpectralField out = u;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == 0 && j == 0) continue;
            const double m1 = u.lattice.freq(i), m2 = u.lattice.freq(j);
            const double msq = m1 * m1 + m2 * m2;
            const Complex dot = (m1 * u.at(0, i, j) + m2 * u.at(1, i, j)) / msq;
            out.at(0, i, j) -= m1 * dot;
            out.at(1, i, j) -= m2 * dot;
        }
    return out;
}

/// H^s inner product.  Normalised so that s = 0 reproduces the L^2([0,L)^2)
/// inner product of the represented fields:
///   <u, v>_s = L^2 sum_k (1 + |k|^2)^s Re[ c_u(k) . conj(c_v(k)) ].
inline double sobolev_inner(const SpectralField& u, const SpectralField& v, SobolevIndex s) {
    check_same_lattice(u, v, "sobolev_inner");
    const int n = u.lattice.n;
    const double vol = u.lattice.box * u.lattice.box;
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double w = u.lattice.weight(i, j, s);
            double re = 0.0;
            for (int c = 0; c < 2; ++c) {
                const Complex &a = u.at(c, i, j), &b = v.at(c, i, j);
                re += a.real() * b.real() + a.imag() * b.imag();
            }
            acc += w * re;
        }
    return vol * acc;
}

inline double sobolev_norm(const SpectralField& u, SobolevIndex s) {
    return std::sqrt(std::max(0.0, sobolev_inner(u, u, s)));
}

/// Hyperviscous Stokes operator A^alpha: multiply each mode by
/// (1 + |k|^2)^alpha.  Negative powers are allowed; the identity
/// ||A^alpha u||_{H^s} = ||u||_{H^{2 alpha + s}} holds exactly.
inline SpectralField apply_A_alpha(const SpectralField& u, double alpha) {
    const int n = u.lattice.n;
    SpectralField out = u;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double w = u.lattice.weight(i, j, alpha);
            out.at(0, i, j) *= w;
            out.at(1, i, j) *= w;
        }
    return out;
}

/// Semigroup e^{-nu t A^alpha}: multiply each mode by
/// exp(-nu t (1 + |k|^2)^alpha).  Contraction in every H^s since the
/// symbol is >= 1 on the whole lattice (including k = 0).
inline SpectralField semigroup_apply(const SpectralField& u, double nu, double alpha, double t) {
    if (t < 0.0) throw std::invalid_argument("semigroup_apply: t must be >= 0");
    if (!(nu > 0.0)) throw std::invalid_argument("semigroup_apply: nu must be > 0");
    const int n = u.lattice.n;
    SpectralField out = u;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double lam = u.lattice.weight(i, j, alpha);
            const double decay = std::exp(-nu * t * lam);
            out.at(0, i, j) *= decay;
            out.at(1, i, j) *= decay;
        }
    return out;
}

/// Random real solenoidal field with per-mode amplitude
/// (1 + |k|^2)^{-decay/2}:  Gaussian draws on a half lattice mirrored to
/// enforce Hermitian symmetry, then Leray-projected per mode.  Nyquist rows
/// are left empty so the result is well inside every dealias band used in
/// practice when band_freq < N/2 is given; band_freq <= 0 keeps all
/// non-Nyquist modes.
inline SpectralField random_solenoidal_field(const Lattice& lat, GaussianSampler& gauss,
                                             double decay = 2.0, int band_freq = 0) {
    const int n = lat.n;
    SpectralField u(lat);
    const int cap = band_freq > 0 ? band_freq : n / 2 - 1;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const int m1 = lat.freq(i), m2 = lat.freq(j);
            if (std::abs(m1) > cap || std::abs(m2) > cap) continue;
            if (m1 == 0 && m2 == 0) continue;
            const int im = (n - i) % n, jm = (n - j) % n;
            const bool self = (im == i && jm == j);
            // representative of each +-k pair: lexicographically smaller bin
            if (!self && (im < i || (im == i && jm < j))) continue;
            const double amp = lat.weight(i, j, -decay / 2.0);
            const double m1d = m1, m2d = m2;
            const double inv = 1.0 / std::sqrt(m1d * m1d + m2d * m2d);
            // solenoidal direction k-perp / |k|
            const double d1 = -m2d * inv, d2 = m1d * inv;
            if (self) {
                const double a = amp * gauss.normal();
                u.at(0, i, j) = a * d1;
                u.at(1, i, j) = a * d2;
            } else {
                const Complex a = amp * Complex(gauss.normal(), gauss.normal()) / std::sqrt(2.0);
                u.at(0, i, j) = a * d1;
                u.at(1, i, j) = a * d2;
                u.at(0, im, jm) = std::conj(u.at(0, i, j));
                u.at(1, im, jm) = std::conj(u.at(1, i, j));
            }
        }
    return u;
}

/// Random real field that is NOT solenoidal (for projector tests): mixes a
/// solenoidal part with a gradient part.
inline SpectralField random_real_field(const Lattice& lat, GaussianSampler& gauss,
                                       double decay = 2.0, int band_freq = 0) {
    const int n = lat.n;
    SpectralField u = random_solenoidal_field(lat, gauss, decay, band_freq);
    const int cap = band_freq > 0 ? band_freq : n / 2 - 1;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const int m1 = lat.freq(i), m2 = lat.freq(j);
            if (std::abs(m1) > cap || std::abs(m2) > cap) continue;
            if (m1 == 0 && m2 == 0) continue;
            const int im = (n - i) % n, jm = (n - j) % n;
            const bool self = (im == i && jm == j);
            if (!self && (im < i || (im == i && jm < j))) continue;
            const double amp = lat.weight(i, j, -decay / 2.0);
            const double m1d = m1, m2d = m2;
            const double inv = 1.0 / std::sqrt(m1d * m1d + m2d * m2d);
            if (self) {
                const double a = amp * gauss.normal();
                u.at(0, i, j) += a * m1d * inv;
                u.at(1, i, j) += a * m2d * inv;
            } else {
                const Complex a = amp * Complex(gauss.normal(), gauss.normal()) / std::sqrt(2.0);
                u.at(0, i, j) += a * m1d * inv;
                u.at(1, i, j) += a * m2d * inv;
                u.at(0, im, jm) = std::conj(u.at(0, i, j));
                u.at(1, im, jm) = std::conj(u.at(1, i, j));
            }
        }
    return u;
}

} // namespace simlab
