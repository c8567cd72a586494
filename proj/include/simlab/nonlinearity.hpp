#pragma once

#include <cmath>
#include <stdexcept>

#include "simlab/spectral_field.hpp"
#include "simlab/transform.hpp"

namespace simlab {

/// Orszag-style dealias rule: after every product, zero all modes with
/// max(|m1|, |m2|) > cutoff_fraction * N/2.  With the default 2/3 the
/// pseudo-spectral product equals the exact truncated convolution for
/// band-limited inputs, which is what makes the cancellation identities of
/// the nonlinearity hold to round-off instead of aliasing error.
struct DealiasRule {
    double cutoff_fraction = 2.0 / 3.0;

    /// largest retained |m_i|
    int max_freq(const Lattice& lat) const {
        return static_cast<int>(std::floor(cutoff_fraction * (lat.n / 2) + 1e-9));
    }
    bool keeps(const Lattice& lat, int i, int j) const {
        const int cap = max_freq(lat);
        return std::abs(lat.freq(i)) <= cap && std::abs(lat.freq(j)) <= cap;
    }
};

inline void dealias_in_place(SpectralField& u, const DealiasRule& rule) {
    const int n = u.lattice.n;
    const int cap = rule.max_freq(u.lattice);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (std::abs(u.lattice.freq(i)) > cap || std::abs(u.lattice.freq(j)) > cap) {
                u.at(0, i, j) = 0.0;
                u.at(1, i, j) = 0.0;
            }
}

inline bool is_band_limited(const SpectralField& u, const DealiasRule& rule, double tol = 0.0) {
    const int n = u.lattice.n;
    const double cutoff = tol * (1.0 + max_abs_coef(u));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (!rule.keeps(u.lattice, i, j))
                if (std::abs(u.at(0, i, j)) > cutoff || std::abs(u.at(1, i, j)) > cutoff)
                    return false;
    return true;
}

/// Dealiased advective product (u . grad) v, no Leray projection.
/// Pipeline: spectral derivative of v, inverse transforms, pointwise
/// products on the grid, forward transform, dealias truncation.
inline SpectralField advect(const SpectralField& u, const SpectralField& v,
                            const DealiasRule& rule) {
    check_same_lattice(u, v, "advect");
    const Lattice& lat = u.lattice;
    const int n = lat.n;
    auto& ws = workspace_for(lat);

    auto& u1 = ws.scratch(0);
    auto& u2 = ws.scratch(1);
    ws.to_physical(&u.at(0, 0, 0), u1.data());
    ws.to_physical(&u.at(1, 0, 0), u2.data());

    auto& dv = ws.spec_scratch(0);
    SpectralField out(lat);
    auto& prod = ws.scratch(2);
    // out_c = u1 * d1(v_c) + u2 * d2(v_c), accumulated in physical space
    for (int c = 0; c < 2; ++c) {
        auto& acc = ws.scratch(3);
        std::fill(acc.begin(), acc.end(), 0.0);
        for (int axis = 0; axis < 2; ++axis) {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    const double k = axis == 0 ? lat.k1(i) : lat.k2(j);
                    dv[static_cast<std::size_t>(i) * n + j] =
                        Complex(0.0, k) * v.at(c, i, j);
                }
            ws.to_physical(dv.data(), prod.data());
            const auto& ua = axis == 0 ? u1 : u2;
            for (std::size_t g = 0; g < acc.size(); ++g) acc[g] += ua[g] * prod[g];
        }
        ws.to_spectral(acc.data(), &out.at(c, 0, 0));
    }
    dealias_in_place(out, rule);
    return out;
}

/// Navier-Stokes nonlinearity B(u, v) = Leray[(u . grad) v], dealiased.
/// Both inputs must be real, solenoidal and inside the dealias band; the
/// output then equals the exact Galerkin truncation of the continuum B.
inline SpectralField bilinear_B(const SpectralField& u, const SpectralField& v,
                                const DealiasRule& rule) {
    check_same_lattice(u, v, "bilinear_B");
    if (!is_solenoidal(u) || !is_solenoidal(v))
        throw std::invalid_argument("bilinear_B: inputs must be solenoidal");
    return leray_project(advect(u, v, rule));
}

inline SpectralField quadratic_B(const SpectralField& u, const DealiasRule& rule) {
    if (!is_solenoidal(u))
        throw std::invalid_argument("quadratic_B: input must be solenoidal");
    return leray_project(advect(u, u, rule));
}

/// Trilinear form b(u, v, w) = <(u . grad) v, w> in the L^2 anchor,
/// evaluated in spectral space via Parseval on the dealiased product so it
/// agrees with <bilinear_B(u, v), w> for solenoidal w.
inline double trilinear_b(const SpectralField& u, const SpectralField& v,
                          const SpectralField& w, const DealiasRule& rule = {}) {
    check_same_lattice(u, w, "trilinear_b");
    return sobolev_inner(advect(u, v, rule), w, 0.0);
}

/// Both sides of the estimate ||B(u,v)||_{H^{sigma-1}} <= c ||u||_{H^{sigma-1}} ||v||_{H^sigma}.
/// Used to record empirical ratios over random ensembles; sigma must exceed 2.
inline std::pair<double, double> check_B_bound(const SpectralField& u, const SpectralField& v,
                                               double sigma, const DealiasRule& rule = {}) {
    if (!(sigma > 2.0)) throw std::invalid_argument("check_B_bound: sigma must be > 2");
    const SpectralField Buv = bilinear_B(u, v, rule);
    return {sobolev_norm(Buv, sigma - 1.0),
            sobolev_norm(u, sigma - 1.0) * sobolev_norm(v, sigma)};
}

namespace reference {

/// Brute-force truncated convolution for (u . grad) v followed by Leray
/// projection: the O(N^4) Galerkin reference the pseudo-spectral path is
/// required to reproduce.  Only modes inside the dealias band contribute
/// and only band modes are returned.
inline SpectralField convolution_B(const SpectralField& u, const SpectralField& v,
                                   const DealiasRule& rule) {
    check_same_lattice(u, v, "convolution_B");
    const Lattice& lat = u.lattice;
    const int cap = rule.max_freq(lat);
    SpectralField out(lat);
    for (int o1 = -cap; o1 <= cap; ++o1)
        for (int o2 = -cap; o2 <= cap; ++o2) {
            Complex acc[2] = {0.0, 0.0};
            // c_out(m) = sum_{p + q = m} i (c_u(p) . k_q) c_v(q)
            for (int q1 = -cap; q1 <= cap; ++q1)
                for (int q2 = -cap; q2 <= cap; ++q2) {
                    const int p1 = o1 - q1, p2 = o2 - q2;
                    if (std::abs(p1) > cap || std::abs(p2) > cap) continue;
                    const int pi = lat.bin(p1), pj = lat.bin(p2);
                    const int qi = lat.bin(q1), qj = lat.bin(q2);
                    const Complex udotk = u.at(0, pi, pj) * (lat.dk() * q1) +
                                          u.at(1, pi, pj) * (lat.dk() * q2);
                    acc[0] += Complex(0.0, 1.0) * udotk * v.at(0, qi, qj);
                    acc[1] += Complex(0.0, 1.0) * udotk * v.at(1, qi, qj);
                }
            out.at(0, lat.bin(o1), lat.bin(o2)) = acc[0];
            out.at(1, lat.bin(o1), lat.bin(o2)) = acc[1];
        }
    return leray_project(out);
}

} // namespace reference

} // namespace simlab
