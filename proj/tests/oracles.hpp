// Independent reference computations the tests check the library against.
// Everything here deliberately avoids the library's own evaluation paths:
// inner products by grid quadrature, advection by termwise mode sums,
// Gaussian moments by cumulants.
#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "simlab/spectral_field.hpp"

namespace oracles {

using simlab::Complex;
using simlab::Lattice;
using simlab::SpectralField;

/// Evaluate one component of the field at grid point (gi, gj) by direct
/// summation of the Fourier series (no FFT).
inline double eval_component(const SpectralField& u, int c, int gi, int gj) {
    const Lattice& lat = u.lattice;
    const int n = lat.n;
    Complex acc = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double phase =
                2.0 * M_PI * (static_cast<double>(lat.freq(i)) * gi +
                              static_cast<double>(lat.freq(j)) * gj) /
                static_cast<double>(n);
            acc += u.at(c, i, j) * Complex(std::cos(phase), std::sin(phase));
        }
    return acc.real();
}

/// L^2([0,L)^2) inner product by rectangle-rule quadrature on the N x N grid.
/// Exact for trigonometric polynomials whose pairwise products stay below the
/// grid Nyquist, which all test fields are arranged to satisfy.
inline double quadrature_l2_inner(const SpectralField& u, const SpectralField& v) {
    const Lattice& lat = u.lattice;
    const int n = lat.n;
    const double cell = (lat.box / n) * (lat.box / n);
    double acc = 0.0;
    for (int gi = 0; gi < n; ++gi)
        for (int gj = 0; gj < n; ++gj)
            for (int c = 0; c < 2; ++c)
                acc += eval_component(u, c, gi, gj) * eval_component(v, c, gi, gj);
    return acc * cell;
}

/// Trilinear form b(u, v, w) = int (u . grad v) . w by grid quadrature with
/// term-wise spectral derivatives.
inline double quadrature_b(const SpectralField& u, const SpectralField& v,
                           const SpectralField& w) {
    const Lattice& lat = u.lattice;
    const int n = lat.n;
    const double cell = (lat.box / n) * (lat.box / n);
    // derivative fields of v
    SpectralField dv[2][2] = {{SpectralField(lat), SpectralField(lat)},
                              {SpectralField(lat), SpectralField(lat)}};
    for (int c = 0; c < 2; ++c)
        for (int axis = 0; axis < 2; ++axis)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    const double k = axis == 0 ? lat.k1(i) : lat.k2(j);
                    dv[c][axis].at(0, i, j) = Complex(0.0, k) * v.at(c, i, j);
                }
    double acc = 0.0;
    for (int gi = 0; gi < n; ++gi)
        for (int gj = 0; gj < n; ++gj) {
            const double u1 = eval_component(u, 0, gi, gj);
            const double u2 = eval_component(u, 1, gi, gj);
            for (int c = 0; c < 2; ++c) {
                const double adv = u1 * eval_component(dv[c][0], 0, gi, gj) +
                                   u2 * eval_component(dv[c][1], 0, gi, gj);
                acc += adv * eval_component(w, c, gi, gj);
            }
        }
    return acc * cell;
}

/// Moments E S^n, n = 1..3, of S = sum_k y_k for independent y_k with the
/// given per-term mean, variance and third cumulant (Isserlis/Wick reduces
/// quadratic forms of Gaussians to exactly this).
struct ChiSquareSum {
    double kappa1 = 0.0, kappa2 = 0.0, kappa3 = 0.0;

    /// complex Gaussian mode: y = w |z|^2 with E|z|^2 = v (exponential law)
    void add_complex(double w, double v) {
        const double m = w * v;
        kappa1 += m;
        kappa2 += m * m;
        kappa3 += 2.0 * m * m * m;
    }
    /// real Gaussian mode: y = w z^2 with E z^2 = v (chi-square, 1 dof)
    void add_real(double w, double v) {
        const double m = w * v;
        kappa1 += m;
        kappa2 += 2.0 * m * m;
        kappa3 += 8.0 * m * m * m;
    }
    double moment1() const { return kappa1; }
    double moment2() const { return kappa2 + kappa1 * kappa1; }
    double moment3() const {
        return kappa3 + 3.0 * kappa2 * kappa1 + kappa1 * kappa1 * kappa1;
    }
};

} // namespace oracles
