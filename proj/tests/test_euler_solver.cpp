#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "simlab/euler_solver.hpp"

using namespace simlab;

namespace {

EulerParams params(int n, double dt, EulerScheme scheme = EulerScheme::rk4) {
    EulerParams p;
    p.lattice = make_lattice(n, 2.0 * M_PI);
    p.dt = dt;
    p.scheme = scheme;
    return p;
}

} // namespace

TEST_CASE("euler_flow: t = 0 is the identity, negative t rejected") {
    const EulerParams p = params(16, 1e-2);
    GaussianSampler fg(RngStream{61, 0});
    const SpectralField x =
        random_solenoidal_field(p.lattice, fg, 2.0, p.dealias.max_freq(p.lattice));
    const SpectralField y = euler_flow(x, 0.0, p);
    for (std::size_t m = 0; m < x.coef.size(); ++m) CHECK(y.coef[m] == x.coef[m]);
    CHECK_THROWS_AS(euler_flow(x, -1.0, p), std::invalid_argument);
}

TEST_CASE("a lone mode is a fixed point of the flow") {
    const EulerParams p = params(16, 1e-2);
    SpectralField x(p.lattice);
    const double inv = 1.0 / std::sqrt(10.0);
    x.at(0, p.lattice.bin(3), p.lattice.bin(1)) = Complex(0.2, -0.1) * (-1.0 * inv);
    x.at(1, p.lattice.bin(3), p.lattice.bin(1)) = Complex(0.2, -0.1) * (3.0 * inv);
    x.at(0, p.lattice.bin(-3), p.lattice.bin(-1)) =
        std::conj(x.at(0, p.lattice.bin(3), p.lattice.bin(1)));
    x.at(1, p.lattice.bin(-3), p.lattice.bin(-1)) =
        std::conj(x.at(1, p.lattice.bin(3), p.lattice.bin(1)));
    const SpectralField y = euler_flow(x, 2.0, p);
    CHECK(sobolev_norm(y - x, 1.0) <= 1e-12 * sobolev_norm(x, 1.0));
}

TEST_CASE("Taylor-Green is steady; invariants conserved on active data") {
    const EulerParams p = params(32, 2e-3);
    const SpectralField tg = taylor_green(p.lattice);
    const SpectralField moved = euler_flow(tg, 1.0, p);
    CHECK(sobolev_norm(moved - tg, 1.0) <= 1e-11 * sobolev_norm(tg, 1.0));

    // live transfer: drift stays at scheme-error level, far below the motion
    const SpectralField x = perturbed_taylor_green(p.lattice);
    const Trajectory traj = euler_flow_trajectory(x, 2.0, p, 100);
    const ConservationReport rep = conservation_report(traj, 3.0);
    CAPTURE(rep.drift_l2, rep.drift_h1, rep.drift_hsigma);
    CHECK(rep.drift_l2 <= 1e-10);
    CHECK(rep.drift_h1 <= 1e-10);
    // the field genuinely moves even though the invariants do not
    CHECK(sobolev_norm(traj.states.back() - x, 1.0) >= 0.01 * sobolev_norm(x, 1.0));
    CHECK(is_solenoidal(traj.states.back(), 1e-12));
    CHECK(is_real_field(traj.states.back(), 1e-12));

    // constant-in-time trajectory reports zero drift
    Trajectory frozen;
    frozen.times = {0.0, 1.0};
    frozen.states = {x, x};
    const ConservationReport zero = conservation_report(frozen);
    CHECK(zero.drift_l2 == 0.0);
    CHECK(zero.drift_h1 == 0.0);
}

TEST_CASE("rk4 conserves better than midpoint; drift orders match the schemes") {
    const SpectralField x = perturbed_taylor_green(make_lattice(32, 2.0 * M_PI));
    const double horizon = 1.0;

    auto drift_h1 = [&](double dt, EulerScheme scheme) {
        const EulerParams p = params(32, dt, scheme);
        SpectralField u = x;
        const double h1_0 = sobolev_norm(u, 1.0);
        const std::size_t n = static_cast<std::size_t>(std::llround(horizon / dt));
        double worst = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            u = detail::euler_step(u, p);
            worst = std::max(worst, std::abs(sobolev_norm(u, 1.0) - h1_0) / h1_0);
        }
        return worst;
    };

    const double rk4_d = drift_h1(4e-3, EulerScheme::rk4);
    const double mid_d = drift_h1(4e-3, EulerScheme::midpoint);
    CAPTURE(rk4_d, mid_d);
    CHECK(rk4_d <= mid_d);

    const double rk4_half = drift_h1(2e-3, EulerScheme::rk4);
    const double mid_half = drift_h1(2e-3, EulerScheme::midpoint);
    const double rk4_order = std::log2(rk4_d / rk4_half);
    const double mid_order = std::log2(mid_d / mid_half);
    CAPTURE(rk4_order, mid_order);
    CHECK(rk4_order == Catch::Approx(4.0).margin(0.6));
    CHECK(mid_order == Catch::Approx(2.0).margin(0.6));
}

TEST_CASE("discrete semiflow property on grid-aligned times") {
    const EulerParams p = params(32, 2e-3);
    const SpectralField x = perturbed_taylor_green(p.lattice);
    const SpectralField one = euler_flow(euler_flow(x, 0.5, p), 0.3, p);
    const SpectralField two = euler_flow(x, 0.8, p);
    CHECK(sobolev_norm(one - two, 1.0) <= 1e-9 * sobolev_norm(two, 1.0));
}
