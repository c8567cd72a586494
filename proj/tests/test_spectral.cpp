#include <catch2/catch_amalgamated.hpp>

#include "simlab/spectral_field.hpp"
#include "simlab/transform.hpp"
#include "oracles.hpp"

using namespace simlab;

TEST_CASE("make_lattice validates its arguments") {
    CHECK_THROWS_AS(make_lattice(7, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(make_lattice(6, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(make_lattice(16, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(make_lattice(16, -1.0), std::invalid_argument);

    const Lattice lat = make_lattice(8, 2.0 * M_PI);
    // L = 2 pi makes k = m; frequencies run over [-4, 4)
    CHECK(lat.freq(0) == 0);
    CHECK(lat.freq(3) == 3);
    CHECK(lat.freq(4) == -4);
    CHECK(lat.freq(7) == -1);
    CHECK(lat.k1(1) == Catch::Approx(1.0));

    const Lattice fine = make_lattice(16, 1.0);
    CHECK(fine.k1(1) == Catch::Approx(2.0 * M_PI)); // smallest nonzero |k|
}

TEST_CASE("lattice bin/freq maps are inverse bijections") {
    const Lattice lat = make_lattice(16, 1.0);
    for (int i = 0; i < lat.n; ++i) CHECK(lat.bin(lat.freq(i)) == i);
    for (int m = -8; m < 8; ++m) CHECK(lat.freq(lat.bin(m)) == m);
}

TEST_CASE("leray projection: hand-derived single mode value") {
    const Lattice lat = make_lattice(8, 2.0 * M_PI);
    SpectralField u(lat);
    // (1, 0) at k = (1, 1) and the Hermitian mirror
    u.at(0, lat.bin(1), lat.bin(1)) = 1.0;
    u.at(0, lat.bin(-1), lat.bin(-1)) = 1.0;
    const SpectralField pu = leray_project(u);
    // (I - k k^T / |k|^2)(1,0) = (1/2, -1/2)
    CHECK(pu.at(0, lat.bin(1), lat.bin(1)).real() == Catch::Approx(0.5).margin(1e-15));
    CHECK(pu.at(1, lat.bin(1), lat.bin(1)).real() == Catch::Approx(-0.5).margin(1e-15));
    CHECK(is_solenoidal(pu, 1e-14));
    CHECK(is_real_field(pu, 1e-14));
}

TEST_CASE("leray projection annihilates gradients and fixes its range") {
    const Lattice lat = make_lattice(16, 2.0 * M_PI);
    GaussianSampler gauss(RngStream{7, 1});
    // pure gradient: c(k) = i k phi(k)
    SpectralField g(lat);
    const SpectralField phi = random_solenoidal_field(lat, gauss);
    for (int i = 0; i < lat.n; ++i)
        for (int j = 0; j < lat.n; ++j) {
            g.at(0, i, j) = Complex(0.0, lat.k1(i)) * phi.at(0, i, j);
            g.at(1, i, j) = Complex(0.0, lat.k2(j)) * phi.at(0, i, j);
        }
    CHECK(sobolev_norm(leray_project(g), 0.0) <= 1e-14 * sobolev_norm(g, 0.0));

    // already-solenoidal fields are fixed up to the round-off of the
    // correction term k (k.c) / |k|^2, which is ~1 ulp of each coefficient
    const SpectralField u = random_solenoidal_field(lat, gauss);
    const SpectralField pu = leray_project(u);
    const double scale = max_abs_coef(u);
    for (std::size_t m = 0; m < u.coef.size(); ++m)
        CHECK(std::abs(pu.coef[m] - u.coef[m]) <= 1e-15 * scale);
}

TEST_CASE("leray projection is idempotent and self-adjoint on random fields") {
    const Lattice lat = make_lattice(16, 2.0 * M_PI);
    GaussianSampler gauss(RngStream{8, 2});
    for (int trial = 0; trial < 20; ++trial) {
        const SpectralField u = random_real_field(lat, gauss);
        const SpectralField v = random_real_field(lat, gauss);
        const SpectralField pu = leray_project(u);
        CHECK(sobolev_norm(leray_project(pu) - pu, 0.0) <= 1e-13 * sobolev_norm(pu, 0.0));
        for (double s : {-1.0, 0.0, 1.5}) {
            const double lhs = sobolev_inner(pu, v, s);
            const double rhs = sobolev_inner(u, leray_project(v), s);
            CHECK(std::abs(lhs - rhs) <= 1e-12 * sobolev_norm(u, s) * sobolev_norm(v, s));
        }
    }
}

TEST_CASE("sobolev inner product matches direct-space quadrature at s = 0") {
    const Lattice lat = make_lattice(16, 2.0); // non-trivial volume factor
    GaussianSampler gauss(RngStream{9, 3});
    // band_freq 5 keeps products of modes below the grid Nyquist, where the
    // rectangle rule is exact
    const SpectralField u = random_solenoidal_field(lat, gauss, 2.0, 5);
    const SpectralField v = random_solenoidal_field(lat, gauss, 2.0, 5);
    const double spectral = sobolev_inner(u, v, 0.0);
    const double quad = oracles::quadrature_l2_inner(u, v);
    CHECK(spectral == Catch::Approx(quad).epsilon(1e-12));

    // single mode pair: quadrature oracle again
    SpectralField w(lat);
    const double d1 = -1.0 / std::sqrt(2.0), d2 = 1.0 / std::sqrt(2.0);
    w.at(0, lat.bin(1), lat.bin(1)) = Complex(0.3, 0.1) * d1;
    w.at(1, lat.bin(1), lat.bin(1)) = Complex(0.3, 0.1) * d2;
    w.at(0, lat.bin(-1), lat.bin(-1)) = std::conj(w.at(0, lat.bin(1), lat.bin(1)));
    w.at(1, lat.bin(-1), lat.bin(-1)) = std::conj(w.at(1, lat.bin(1), lat.bin(1)));
    CHECK(sobolev_inner(w, w, 0.0) ==
          Catch::Approx(oracles::quadrature_l2_inner(w, w)).epsilon(1e-12));
}

TEST_CASE("sobolev inner product: orthogonality, symmetry, bilinearity") {
    const Lattice lat = make_lattice(16, 2.0 * M_PI);
    GaussianSampler gauss(RngStream{10, 4});
    SpectralField a(lat), b(lat);
    // disjoint supports
    a.at(0, lat.bin(1), lat.bin(2)) = Complex(1.0, 2.0);
    a.at(0, lat.bin(-1), lat.bin(-2)) = Complex(1.0, -2.0);
    b.at(0, lat.bin(3), lat.bin(0)) = Complex(0.5, 0.0);
    b.at(0, lat.bin(-3), lat.bin(0)) = Complex(0.5, 0.0);
    CHECK(sobolev_inner(a, b, 1.3) == 0.0);

    const SpectralField u = random_solenoidal_field(lat, gauss);
    const SpectralField v = random_solenoidal_field(lat, gauss);
    const SpectralField w = random_solenoidal_field(lat, gauss);
    CHECK(sobolev_inner(u, v, 0.7) == Catch::Approx(sobolev_inner(v, u, 0.7)));
    const double lhs = sobolev_inner(u + 2.0 * w, v, 0.7);
    const double rhs = sobolev_inner(u, v, 0.7) + 2.0 * sobolev_inner(w, v, 0.7);
    CHECK(lhs == Catch::Approx(rhs).epsilon(1e-12));

    SpectralField other(make_lattice(8, 2.0 * M_PI));
    CHECK_THROWS_AS(sobolev_inner(u, other, 0.0), std::invalid_argument);
}

TEST_CASE("sobolev norm weights and interpolation inequality") {
    const Lattice lat = make_lattice(16, 2.0 * M_PI);
    CHECK(sobolev_norm(SpectralField(lat), 2.0) == 0.0);

    SpectralField w(lat);
    w.at(0, lat.bin(2), lat.bin(1)) = Complex(0.0, 0.4);
    w.at(0, lat.bin(-2), lat.bin(-1)) = Complex(0.0, -0.4);
    const double ratio = sobolev_norm(w, 1.7) / sobolev_norm(w, 0.0);
    CHECK(ratio == Catch::Approx(std::pow(1.0 + 5.0, 1.7 / 2.0)).epsilon(1e-13));

    GaussianSampler gauss(RngStream{11, 5});
    for (int trial = 0; trial < 1000; ++trial) {
        const SpectralField u = random_solenoidal_field(lat, gauss);
        const double p = -2.0 + 3.0 * gauss.uniform_open();
        const double q = p + 0.1 + 2.0 * gauss.uniform_open();
        const double lam = gauss.uniform_open();
        const double r = lam * p + (1.0 - lam) * q;
        const double lhs = sobolev_norm(u, r);
        const double rhs = std::pow(sobolev_norm(u, p), lam) *
                           std::pow(sobolev_norm(u, q), 1.0 - lam);
        CHECK(lhs <= rhs * (1.0 + 1e-12));
    }
}

TEST_CASE("A^alpha is the expected multiplier and an exact isometry") {
    const Lattice lat = make_lattice(16, 2.0 * M_PI);
    GaussianSampler gauss(RngStream{12, 6});
    const SpectralField u = random_solenoidal_field(lat, gauss);

    // alpha = 0 is the identity
    const SpectralField id = apply_A_alpha(u, 0.0);
    CHECK(sobolev_norm(id - u, 0.0) == 0.0);

    // single mode at |k|^2 = 2 on the unit-spacing lattice: (1+2)^2 = 9
    SpectralField w(lat);
    w.at(0, lat.bin(1), lat.bin(1)) = 1.0;
    w.at(0, lat.bin(-1), lat.bin(-1)) = 1.0;
    CHECK(apply_A_alpha(w, 2.0).at(0, lat.bin(1), lat.bin(1)).real() ==
          Catch::Approx(9.0).epsilon(1e-14));

    // box scaled so the first mode sits at |k|^2 = 3: (1+3)^2 = 16
    const Lattice scaled = make_lattice(8, 2.0 * M_PI / std::sqrt(3.0));
    SpectralField w3(scaled);
    w3.at(0, scaled.bin(1), scaled.bin(0)) = 1.0;
    w3.at(0, scaled.bin(-1), scaled.bin(0)) = 1.0;
    CHECK(apply_A_alpha(w3, 2.0).at(0, scaled.bin(1), scaled.bin(0)).real() ==
          Catch::Approx(16.0).epsilon(1e-14));

    // group property A^alpha A^{-alpha} = id
    const SpectralField round = apply_A_alpha(apply_A_alpha(u, 1.3), -1.3);
    CHECK(sobolev_norm(round - u, 0.0) <= 1e-13 * sobolev_norm(u, 0.0));

    // ||A^alpha u||_{H^s} = ||u||_{H^{2 alpha + s}}
    for (int trial = 0; trial < 20; ++trial) {
        const double s = -2.0 + 4.0 * gauss.uniform_open();
        const double a = -1.0 + 3.0 * gauss.uniform_open();
        const double n1 = sobolev_norm(apply_A_alpha(u, a), s);
        const double n2 = sobolev_norm(u, 2.0 * a + s);
        CHECK(n1 == Catch::Approx(n2).epsilon(1e-12));
    }

    CHECK(is_solenoidal(apply_A_alpha(u, 1.7), 1e-12));
}

TEST_CASE("semigroup: identity at t = 0, additivity, contraction, monotonicity") {
    const Lattice lat = make_lattice(16, 2.0 * M_PI);
    GaussianSampler gauss(RngStream{13, 7});
    const SpectralField u = random_solenoidal_field(lat, gauss);
    const double nu = 0.3, alpha = 2.0;

    const SpectralField at0 = semigroup_apply(u, nu, alpha, 0.0);
    CHECK(sobolev_norm(at0 - u, 0.0) == 0.0);

    CHECK_THROWS_AS(semigroup_apply(u, nu, alpha, -0.1), std::invalid_argument);

    const SpectralField two =
        semigroup_apply(semigroup_apply(u, nu, alpha, 0.4), nu, alpha, 0.35);
    const SpectralField one = semigroup_apply(u, nu, alpha, 0.75);
    CHECK(sobolev_norm(two - one, 0.0) <= 1e-13 * sobolev_norm(one, 0.0));

    double prev = sobolev_norm(u, 1.0);
    for (double t : {0.1, 0.2, 0.5, 1.0, 3.0}) {
        const double cur = sobolev_norm(semigroup_apply(u, nu, alpha, t), 1.0);
        CHECK(cur <= prev * (1.0 + 1e-14)); // contraction and monotone decay
        // spectrum >= 1 forces decay at least e^{-nu t}
        CHECK(cur <= std::exp(-nu * t) * sobolev_norm(u, 1.0) * (1.0 + 1e-12));
        prev = cur;
    }
}

TEST_CASE("transform round trip and physical values") {
    const Lattice lat = make_lattice(16, 2.0 * M_PI);
    GaussianSampler gauss(RngStream{14, 8});
    const SpectralField u = random_solenoidal_field(lat, gauss);
    // to_physical matches direct series evaluation
    const auto phys = to_physical(u, 0);
    for (int gi : {0, 3, 7})
        for (int gj : {1, 5, 11})
            CHECK(phys[static_cast<std::size_t>(gi) * lat.n + gj] ==
                  Catch::Approx(oracles::eval_component(u, 0, gi, gj)).margin(1e-12));

    // forward(inverse(u)) == u
    auto& ws = workspace_for(lat);
    std::vector<double> p0(static_cast<std::size_t>(lat.size()));
    ws.to_physical(&u.at(0, 0, 0), p0.data());
    std::vector<Complex> back(static_cast<std::size_t>(lat.size()));
    ws.to_spectral(p0.data(), back.data());
    double err = 0.0;
    for (int i = 0; i < lat.n; ++i)
        for (int j = 0; j < lat.n; ++j)
            err = std::max(err, std::abs(back[static_cast<std::size_t>(i) * lat.n + j] -
                                         u.at(0, i, j)));
    CHECK(err <= 1e-14);
}
