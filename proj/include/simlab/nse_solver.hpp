#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "simlab/nonlinearity.hpp"
#include "simlab/spectral_field.hpp"
#include "simlab/stochastic.hpp"

namespace simlab {

/// Parameters of the stochastic hyperviscous Navier-Stokes integrator.
/// picard_sweeps and nonlinearity_on are solver knobs: the shifted-equation
/// solver applies that many corrector sweeps per step, and switching the
/// nonlinearity off turns the dynamics into the exactly solvable OU field.
struct SolverParams {
    double nu = 0.1;
    double alpha = 2.0;
    double dt = 0.02;
    Lattice lattice;
    DealiasRule dealias;
    int picard_sweeps = 1;
    bool nonlinearity_on = true;

    void validate() const {
        if (!(nu > 0.0)) throw std::invalid_argument("SolverParams: nu must be > 0");
        if (!(alpha > 1.0)) throw std::invalid_argument("SolverParams: alpha must be > 1");
        if (!(dt > 0.0)) throw std::invalid_argument("SolverParams: dt must be > 0");
        if (picard_sweeps < 0) throw std::invalid_argument("SolverParams: picard_sweeps < 0");
    }
};

/// Raised when a coefficient turns non-finite; carries the failing step.
struct blowup_error : std::runtime_error {
    std::size_t step_index;
    explicit blowup_error(std::size_t step)
        : std::runtime_error("solution blew up at step " + std::to_string(step) +
                             " (dt too large for the CFL heuristic?)"),
          step_index(step) {}
};

/// A sampled path: states at strictly increasing times starting at 0 and,
/// optionally, the Wiener increment that drove each step (noise_dw[i] covers
/// [times[i], times[i+1]]).
struct Trajectory {
    std::vector<double> times;
    std::vector<SpectralField> states;
    std::vector<SpectralField> noise_dw;

    std::size_t steps() const { return times.empty() ? 0 : times.size() - 1; }
};

/// CFL-style heuristic bound dt <= c / (max|u| k_max), c = 0.5.  Advisory
/// only: the exponential integrator handles the stiff linear part exactly,
/// this guards the explicit transport term.
inline double cfl_dt_limit(const SpectralField& u, const DealiasRule& rule, double c = 0.5) {
    const double speed = max_physical_speed(u);
    const double k_max = u.lattice.dk() * rule.max_freq(u.lattice);
    if (speed * k_max <= 0.0) return std::numeric_limits<double>::infinity();
    return c / (speed * k_max);
}

/// Exponential Euler-Maruyama stepper for
///   dX + [nu A^alpha X + B(X)] dt = sqrt(nu) dW:
///   X+ = e^{-nu dt A^alpha} (X - dt B(X)) + dZ,
/// where dZ is the exact stochastic convolution over the step (sampled
/// jointly with the Wiener increment, so trajectories can be audited against
/// their own noise).  The linear and noise parts carry no discretisation
/// error; the explicit B evaluation is first order.
class HnsStepper {
  public:
    HnsStepper(const SolverParams& p, const NoiseSpec& noise, RngStream stream)
        : params_(p), noise_(noise.restricted(p.lattice, p.dealias)),
          tables_(p.lattice, p.dt, p.nu, p.alpha, noise_), gauss_(stream),
          ou_state_(p.lattice) {
        params_.validate();
    }

    const SolverParams& params() const { return params_; }
    const NoiseSpec& effective_noise() const { return noise_; }
    std::size_t steps_taken() const { return step_; }

    /// The companion Ornstein-Uhlenbeck state driven by the same noise
    /// realisation as the trajectory (the Z of X = V + Z, started at 0).
    /// Its stationary statistics are known in closed form, which makes it a
    /// control variate for the stationary moment estimators.
    const SpectralField& companion_ou() const { return ou_state_; }

    /// advance one step; dw_out (if given) receives the Wiener increment
    SpectralField step(const SpectralField& x, SpectralField* dw_out = nullptr) {
        NoiseIncrement inc = sample_noise_increment(tables_, gauss_);
        SpectralField next = drift_step(x);
        next += inc.dz;
        apply_decay(ou_state_);
        ou_state_ += inc.dz;
        ++step_;
        if (!all_finite(next)) throw blowup_error(step_);
        if (dw_out) *dw_out = std::move(inc.dw);
        return next;
    }

    /// deterministic part only: e^{-nu dt A^alpha}(x - dt B(x))
    SpectralField drift_step(const SpectralField& x) const {
        SpectralField y = x;
        if (params_.nonlinearity_on) {
            SpectralField b = quadratic_B(x, params_.dealias);
            b *= params_.dt;
            y -= b;
        }
        apply_decay(y);
        return y;
    }

    void apply_decay(SpectralField& u) const {
        const int n = params_.lattice.n;
        for (int c = 0; c < 2; ++c)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    u.at(c, i, j) *= tables_.decay[static_cast<std::size_t>(i) * n + j];
    }

    const OuStepTables& tables() const { return tables_; }

  private:
    SolverParams params_;
    NoiseSpec noise_;
    OuStepTables tables_;
    GaussianSampler gauss_;
    SpectralField ou_state_;
    std::size_t step_ = 0;
};

/// Single step of the scheme above with a fresh stepper; convenient for
/// tests, use HnsStepper directly inside loops.
inline SpectralField step_hns(const SpectralField& x, const SolverParams& p,
                              const NoiseSpec& noise, RngStream stream) {
    HnsStepper stepper(p, noise, stream);
    return stepper.step(x);
}

/// Ornstein-Uhlenbeck path on the solver grid (z_0 = 0), recording the
/// Wiener increments.  This is the Z every pathwise decomposition test
/// couples against.
inline Trajectory sample_ou_path(const SolverParams& p, const NoiseSpec& noise,
                                 RngStream stream, std::size_t n_steps) {
    const NoiseSpec eff = noise.restricted(p.lattice, p.dealias);
    OuStepTables tables(p.lattice, p.dt, p.nu, p.alpha, eff);
    GaussianSampler gauss(stream);
    Trajectory z;
    z.times.reserve(n_steps + 1);
    z.states.reserve(n_steps + 1);
    z.noise_dw.reserve(n_steps);
    z.times.push_back(0.0);
    z.states.emplace_back(p.lattice);
    for (std::size_t s = 0; s < n_steps; ++s) {
        NoiseIncrement inc = sample_noise_increment(tables, gauss);
        SpectralField next = z.states.back();
        const int n = p.lattice.n;
        for (int c = 0; c < 2; ++c)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    next.at(c, i, j) *= tables.decay[static_cast<std::size_t>(i) * n + j];
        next += inc.dz;
        z.times.push_back(p.dt * static_cast<double>(s + 1));
        z.states.push_back(std::move(next));
        z.noise_dw.push_back(std::move(inc.dw));
    }
    return z;
}

namespace detail {
inline void check_solver_grid(const Trajectory& z, const SolverParams& p, const char* where) {
    if (z.times.size() < 2) throw std::invalid_argument(std::string(where) + ": empty path");
    for (std::size_t i = 0; i + 1 < z.times.size(); ++i)
        if (std::abs(z.times[i + 1] - z.times[i] - p.dt) > 1e-10 * std::max(1.0, p.dt))
            throw std::invalid_argument(std::string(where) + ": z path not on the solver grid");
}
} // namespace detail

/// Deterministic solver for the shifted equation
///   v' + nu A^alpha v + B(v + z) = 0,  v(0) = x,
/// with z frozen on the solver grid.  Base step is the same exponential
/// Euler update as the direct scheme; each Picard sweep replaces the
/// convolution integral by its trapezoidal value, mirroring one application
/// of the mild-formulation fixed-point map.  With zero sweeps and z = 0 the
/// update is bit-identical to the noiseless direct scheme.
inline Trajectory solve_v(const SpectralField& x, const Trajectory& z_path,
                          const SolverParams& p) {
    p.validate();
    detail::check_solver_grid(z_path, p, "solve_v");
    check_same_lattice(x, z_path.states.front(), "solve_v");
    const std::size_t n_steps = z_path.steps();
    NoiseSpec quiet;
    quiet.sigma0 = 0.0;
    OuStepTables tables(p.lattice, p.dt, p.nu, p.alpha, quiet);
    const int n = p.lattice.n;
    auto decay = [&](SpectralField& u) {
        for (int c = 0; c < 2; ++c)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    u.at(c, i, j) *= tables.decay[static_cast<std::size_t>(i) * n + j];
    };

    Trajectory out;
    out.times = z_path.times;
    out.states.reserve(n_steps + 1);
    out.states.push_back(x);
    for (std::size_t s = 0; s < n_steps; ++s) {
        const SpectralField& v = out.states.back();
        SpectralField next = v;
        if (p.nonlinearity_on) {
            SpectralField f0 = quadratic_B(v + z_path.states[s], p.dealias);
            SpectralField step0 = v;
            {
                SpectralField tmp = f0;
                tmp *= p.dt;
                step0 -= tmp;
            }
            decay(step0);
            next = step0;
            if (p.picard_sweeps > 0) {
                SpectralField ef0 = f0;
                decay(ef0);
                SpectralField ev = v;
                decay(ev);
                for (int sweep = 0; sweep < p.picard_sweeps; ++sweep) {
                    SpectralField f1 = quadratic_B(next + z_path.states[s + 1], p.dealias);
                    next = ev;
                    SpectralField corr = ef0 + f1;
                    corr *= 0.5 * p.dt;
                    next -= corr;
                }
            }
        } else {
            decay(next);
        }
        if (!all_finite(next)) throw blowup_error(s + 1);
        out.states.push_back(std::move(next));
    }
    return out;
}

/// Pathwise reconstruction X = V(x, Z) + Z from a recorded OU path.
inline Trajectory reconstruct_X(const SpectralField& x, const Trajectory& z_path,
                                const SolverParams& p) {
    Trajectory v = solve_v(x, z_path, p);
    if (v.times != z_path.times)
        throw std::invalid_argument("reconstruct_X: grid mismatch between v and z paths");
    Trajectory out;
    out.times = v.times;
    out.states.reserve(v.states.size());
    for (std::size_t i = 0; i < v.states.size(); ++i)
        out.states.push_back(v.states[i] + z_path.states[i]);
    out.noise_dw = z_path.noise_dw;
    return out;
}

/// Direct integration with recorded states and Wiener increments.
inline Trajectory integrate_hns(const SpectralField& x, const SolverParams& p,
                                const NoiseSpec& noise, RngStream stream,
                                std::size_t n_steps) {
    HnsStepper stepper(p, noise, stream);
    Trajectory traj;
    traj.times.reserve(n_steps + 1);
    traj.states.reserve(n_steps + 1);
    traj.noise_dw.reserve(n_steps);
    traj.times.push_back(0.0);
    traj.states.push_back(x);
    for (std::size_t s = 0; s < n_steps; ++s) {
        SpectralField dw;
        SpectralField next = stepper.step(traj.states.back(), &dw);
        traj.times.push_back(p.dt * static_cast<double>(s + 1));
        traj.states.push_back(std::move(next));
        traj.noise_dw.push_back(std::move(dw));
    }
    return traj;
}

/// Direct integration driven by a recorded OU path instead of fresh draws:
/// the stochastic convolution increment of step i is recovered from the path
/// as z_{i+1} - e^{-nu dt A^alpha} z_i.  Coupled this way, the direct scheme
/// and the V + Z reconstruction see the same realisation of the noise.
inline Trajectory integrate_hns_coupled(const SpectralField& x, const SolverParams& p,
                                        const Trajectory& z_path) {
    p.validate();
    detail::check_solver_grid(z_path, p, "integrate_hns_coupled");
    check_same_lattice(x, z_path.states.front(), "integrate_hns_coupled");
    NoiseSpec quiet;
    quiet.sigma0 = 0.0;
    OuStepTables tables(p.lattice, p.dt, p.nu, p.alpha, quiet);
    const int n = p.lattice.n;
    Trajectory traj;
    traj.times = z_path.times;
    traj.states.reserve(z_path.states.size());
    traj.states.push_back(x);
    traj.noise_dw = z_path.noise_dw;
    for (std::size_t s = 0; s + 1 < z_path.states.size(); ++s) {
        SpectralField next = traj.states.back();
        if (p.nonlinearity_on) {
            SpectralField b = quadratic_B(next, p.dealias);
            b *= p.dt;
            next -= b;
        }
        SpectralField dz = z_path.states[s + 1];
        for (int c = 0; c < 2; ++c)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    const double d = tables.decay[static_cast<std::size_t>(i) * n + j];
                    next.at(c, i, j) *= d;
                    dz.at(c, i, j) -= d * z_path.states[s].at(c, i, j);
                }
        next += dz;
        if (!all_finite(next)) throw blowup_error(s + 1);
        traj.states.push_back(std::move(next));
    }
    return traj;
}

/// Halve the time resolution of an OU path: states at even indices, Wiener
/// increments summed pairwise.  The result is the exact law-preserving
/// restriction of the same realisation to the coarser grid.
inline Trajectory coarsen_path(const Trajectory& fine) {
    if (fine.steps() % 2 != 0)
        throw std::invalid_argument("coarsen_path: need an even number of steps");
    Trajectory coarse;
    for (std::size_t i = 0; i < fine.times.size(); i += 2) {
        coarse.times.push_back(fine.times[i]);
        coarse.states.push_back(fine.states[i]);
    }
    if (fine.noise_dw.size() == fine.steps())
        for (std::size_t s = 0; s + 1 < fine.noise_dw.size(); s += 2)
            coarse.noise_dw.push_back(fine.noise_dw[s] + fine.noise_dw[s + 1]);
    return coarse;
}

/// Discrete residual of the Ito identity for h = id at regularity gamma:
///   ||X_T||^2_gamma - ||X_0||^2_gamma
///     + 2 nu sum dt ||X_i||^2_{gamma+alpha}
///     + 2 sum dt <B(X_i), X_i>_gamma
///     - 2 sqrt(nu) sum <X_i, dW_i>_gamma
///     - nu Tr[Q_gamma] T.
/// At gamma = 1 the B term vanishes identically by <B(x), x>_{H^1} = b(x,x,Ax) = 0.
struct BalanceReport {
    double gamma = 0.0;
    double e_initial = 0.0;
    double e_final = 0.0;
    double dissipation = 0.0; // 2 nu sum dt ||X||^2_{gamma+alpha}
    double b_term = 0.0;      // 2 sum dt <B(X), X>_gamma
    double martingale = 0.0;  // 2 sqrt(nu) sum <X, dW>_gamma
    double trace_term = 0.0;  // nu Tr[Q_gamma] T
    double residual = 0.0;
    double scale = 0.0;
};

inline BalanceReport ito_balance_audit(const Trajectory& traj, const SolverParams& p,
                                       const NoiseSpec& noise, double gamma) {
    if (traj.noise_dw.size() != traj.steps())
        throw std::invalid_argument("ito_balance_audit: trajectory has no noise path");
    const NoiseSpec eff = noise.restricted(p.lattice, p.dealias);
    BalanceReport r;
    r.gamma = gamma;
    r.e_initial = sobolev_inner(traj.states.front(), traj.states.front(), gamma);
    r.e_final = sobolev_inner(traj.states.back(), traj.states.back(), gamma);
    for (std::size_t i = 0; i < traj.steps(); ++i) {
        const double dt = traj.times[i + 1] - traj.times[i];
        const SpectralField& x = traj.states[i];
        r.dissipation += 2.0 * p.nu * dt * sobolev_inner(x, x, gamma + p.alpha);
        if (p.nonlinearity_on)
            r.b_term += 2.0 * dt * sobolev_inner(quadratic_B(x, p.dealias), x, gamma);
        r.martingale += 2.0 * std::sqrt(p.nu) * sobolev_inner(x, traj.noise_dw[i], gamma);
    }
    const double horizon = traj.times.back() - traj.times.front();
    r.trace_term = p.nu * trace_in_sobolev(eff, gamma, p.lattice) * horizon;
    r.residual = r.e_final - r.e_initial + r.dissipation + r.b_term - r.martingale - r.trace_term;
    r.scale = std::max({std::abs(r.e_final), std::abs(r.e_initial), r.dissipation,
                        std::abs(r.b_term), std::abs(r.martingale), r.trace_term});
    return r;
}

/// Empirical check of E[sup_t ||X||^p_{H^1} + nu int ||X||^2_{H^{alpha+1}} ||X||^{p-2}_{H^1}]
/// against C_p (E||X_0||^p_{H^1} + (T nu)^{p/2}) for p in {2, 4, 8}.
struct BoundReport {
    std::vector<int> p_values;
    std::vector<double> lhs;   // empirical expectation of sup + dissipation integral
    std::vector<double> rhs;   // E||X_0||^p + (T nu)^{p/2}
    std::vector<double> ratio; // lhs / rhs
};

inline BoundReport check_apriori_bounds(const std::vector<Trajectory>& ensemble,
                                        const SolverParams& p) {
    if (ensemble.empty())
        throw std::invalid_argument("check_apriori_bounds: empty ensemble");
    BoundReport rep;
    rep.p_values = {2, 4, 8};
    const double horizon = ensemble.front().times.back();
    for (int pw : rep.p_values) {
        double lhs = 0.0, e0 = 0.0;
        for (const Trajectory& traj : ensemble) {
            double sup = 0.0, diss = 0.0;
            for (std::size_t i = 0; i < traj.states.size(); ++i) {
                const double h1sq = sobolev_inner(traj.states[i], traj.states[i], 1.0);
                sup = std::max(sup, std::pow(h1sq, pw / 2.0));
                if (i + 1 < traj.states.size())
                    diss += (traj.times[i + 1] - traj.times[i]) *
                            sobolev_inner(traj.states[i], traj.states[i], p.alpha + 1.0) *
                            std::pow(h1sq, (pw - 2) / 2.0);
            }
            lhs += sup + p.nu * diss;
            e0 += std::pow(sobolev_inner(traj.states.front(), traj.states.front(), 1.0),
                           pw / 2.0);
        }
        lhs /= static_cast<double>(ensemble.size());
        e0 /= static_cast<double>(ensemble.size());
        const double rhs = e0 + std::pow(horizon * p.nu, pw / 2.0);
        rep.lhs.push_back(lhs);
        rep.rhs.push_back(rhs);
        rep.ratio.push_back(rhs > 0.0 ? lhs / rhs : 0.0);
    }
    return rep;
}

} // namespace simlab
