#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "simlab/config.hpp"
#include "simlab/measures.hpp"
#include "simlab/snapshot.hpp"

namespace simlab {

namespace fs = std::filesystem;
using nlohmann::json;

/// Writes artifacts atomically under one output directory and records a
/// content hash per artifact; manifest.json is always written last so a
/// complete manifest implies complete artifacts.
class ArtifactWriter {
  public:
    explicit ArtifactWriter(fs::path dir) : dir_(std::move(dir)) {
        fs::create_directories(dir_);
    }

    const fs::path& dir() const { return dir_; }

    void write(const std::string& rel, const std::string& bytes) {
        atomic_write_file(dir_ / rel, bytes);
        record(rel, fnv1a64(bytes));
    }

    /// Record an artifact that is already on disk (resumed from a previous run).
    void note_existing(const std::string& rel) {
        record(rel, fnv1a64(read_file_bytes(dir_ / rel)));
    }

    void finalize_manifest(const json& extra) {
        json m;
        m["artifacts"] = json::array();
        std::sort(entries_.begin(), entries_.end());
        for (const auto& [rel, hash] : entries_) {
            json e;
            e["path"] = rel;
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
            e["fnv1a64"] = std::string(buf);
            m["artifacts"].push_back(e);
        }
        for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
        atomic_write_file(dir_ / "manifest.json", m.dump(2) + "\n");
    }

  private:
    void record(const std::string& rel, std::uint64_t hash) {
        for (auto& e : entries_)
            if (e.first == rel) {
                e.second = hash;
                return;
            }
        entries_.emplace_back(rel, hash);
    }

    fs::path dir_;
    std::vector<std::pair<std::string, std::uint64_t>> entries_;
};

inline std::string config_hash_hex(const ExperimentConfig& cfg) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canonical_config(cfg))));
    return buf;
}

// ---------------------------------------------------------------------------
// JSON serialisation of reports

inline json to_json(const MeanStderr& m) {
    return json{{"mean", m.mean}, {"stderr", m.stderr_}, {"n", m.n}};
}

inline MeanStderr mean_stderr_from_json(const json& j) {
    MeanStderr m;
    m.mean = j.value("mean", 0.0);
    m.stderr_ = j.value("stderr", 0.0);
    m.n = j.value("n", std::size_t{0});
    return m;
}

inline json to_json(const MomentReport& r) {
    json j;
    j["nu"] = r.nu;
    j["alpha"] = r.alpha;
    j["horizon"] = r.horizon;
    j["burn_in"] = r.burn_in;
    j["n_replicas"] = r.n_replicas;
    j["m2_ha1"] = to_json(r.m2_ha1);
    j["m2n_h1"] = json::array();
    for (const auto& m : r.m2n_h1) j["m2n_h1"].push_back(to_json(m));
    j["beta_values"] = r.beta_values;
    j["exp_moment"] = json::array();
    for (const auto& m : r.exp_moment) j["exp_moment"].push_back(to_json(m));
    j["c_alpha_target"] = r.c_alpha_target;
    j["failed_replicas"] = r.failed_replicas;
    j["valid"] = r.valid;
    j["iat_h1_steps"] = r.iat_h1_steps;
    j["m2_ha1_group_a"] = to_json(r.m2_ha1_group_a);
    j["m2_ha1_group_b"] = to_json(r.m2_ha1_group_b);
    j["cfl_warning"] = r.cfl_warning;
    return j;
}

inline MomentReport moment_report_from_json(const json& j) {
    MomentReport r;
    r.nu = j.value("nu", 0.0);
    r.alpha = j.value("alpha", 0.0);
    r.horizon = j.value("horizon", 0.0);
    r.burn_in = j.value("burn_in", 0.0);
    r.n_replicas = j.value("n_replicas", 0);
    r.m2_ha1 = mean_stderr_from_json(j.at("m2_ha1"));
    for (std::size_t n = 0; n < 3; ++n)
        r.m2n_h1[n] = mean_stderr_from_json(j.at("m2n_h1").at(n));
    r.beta_values = j.value("beta_values", std::vector<double>{});
    for (const auto& e : j.at("exp_moment")) r.exp_moment.push_back(mean_stderr_from_json(e));
    r.c_alpha_target = j.value("c_alpha_target", 0.0);
    r.failed_replicas = j.value("failed_replicas", std::vector<int>{});
    r.valid = j.value("valid", false);
    r.iat_h1_steps = j.value("iat_h1_steps", 1.0);
    r.m2_ha1_group_a = mean_stderr_from_json(j.at("m2_ha1_group_a"));
    r.m2_ha1_group_b = mean_stderr_from_json(j.at("m2_ha1_group_b"));
    r.cfl_warning = j.value("cfl_warning", std::string{});
    return r;
}

inline json to_json(const std::vector<FactorialBoundCheck>& checks) {
    json arr = json::array();
    for (const auto& c : checks)
        arr.push_back(json{{"n", c.n},
                           {"value", c.value},
                           {"stderr", c.stderr_},
                           {"bound", c.bound},
                           {"margin", c.margin},
                           {"pass", c.pass}});
    return arr;
}

inline json to_json(const std::vector<ExpBoundCheck>& checks) {
    json arr = json::array();
    for (const auto& c : checks)
        arr.push_back(json{{"beta", c.beta},
                           {"value", c.value},
                           {"stderr", c.stderr_},
                           {"bound", c.bound},
                           {"pass", c.pass}});
    return arr;
}

inline json to_json(const std::vector<InvarianceRow>& rows) {
    json arr = json::array();
    for (const auto& r : rows)
        arr.push_back(json{{"t", r.t},
                           {"quantity", r.quantity},
                           {"before", to_json(r.before)},
                           {"after", to_json(r.after)},
                           {"standardized_drift", r.standardized}});
    return arr;
}

// ---------------------------------------------------------------------------
// CSV emission (17 significant digits throughout)

inline void append_moment_rows(std::ostringstream& out, const MomentReport& r,
                               double balance_residual) {
    auto row = [&](const std::string& q, double v, double se) {
        out << format_g17(r.nu) << ',' << q << ',' << format_g17(v) << ',' << format_g17(se)
            << '\n';
    };
    row("m2_ha1", r.m2_ha1.mean, r.m2_ha1.stderr_);
    row("m2_h1", r.m2n_h1[0].mean, r.m2n_h1[0].stderr_);
    row("m4_h1", r.m2n_h1[1].mean, r.m2n_h1[1].stderr_);
    row("m6_h1", r.m2n_h1[2].mean, r.m2n_h1[2].stderr_);
    row("c_alpha_target", r.c_alpha_target, 0.0);
    row("balance_residual", balance_residual, 0.0);
    row("iat_h1_steps", r.iat_h1_steps, 0.0);
    for (std::size_t b = 0; b < r.beta_values.size(); ++b) {
        row("beta_" + std::to_string(b + 1), r.beta_values[b], 0.0);
        row("exp_moment_" + std::to_string(b + 1), r.exp_moment[b].mean,
            r.exp_moment[b].stderr_);
    }
}

inline std::string moments_csv(const std::vector<MomentReport>& reports,
                               const std::vector<double>& residuals) {
    std::ostringstream out;
    out << "nu,quantity,value,stderr\n";
    for (std::size_t i = 0; i < reports.size(); ++i)
        append_moment_rows(out, reports[i], residuals[i]);
    return out.str();
}

inline std::string diagnostics_csv(const std::vector<std::array<double, 4>>& rows) {
    std::ostringstream out;
    out << "t,h1,ha1,h2a\n";
    for (const auto& r : rows)
        out << format_g17(r[0]) << ',' << format_g17(r[1]) << ',' << format_g17(r[2]) << ','
            << format_g17(r[3]) << '\n';
    return out.str();
}

// ---------------------------------------------------------------------------
// shared helpers for the commands

inline void write_error_log(const fs::path& out_dir, const std::string& command,
                            const std::vector<std::string>& errors) {
    fs::create_directories(out_dir);
    json j;
    j["command"] = command;
    j["errors"] = errors;
    atomic_write_file(out_dir / "error.json", j.dump(2) + "\n");
}

/// Acceptance thresholds asserted by the commands; fixed here, not config.
struct AssertedCriteria {
    static constexpr double balance_residual_max = 0.05; // 5% of Tr[Q_1]/2
    static constexpr double pairwise_se_band = 3.0;      // nu-independence band
    static constexpr double invariance_drift_max = 3.0;  // standardized drift
};

inline bool reports_pairwise_consistent(const std::vector<MomentReport>& reports) {
    for (std::size_t i = 0; i < reports.size(); ++i)
        for (std::size_t j = i + 1; j < reports.size(); ++j) {
            const MeanStderr &a = reports[i].m2_ha1, &b = reports[j].m2_ha1;
            const double band = AssertedCriteria::pairwise_se_band *
                                std::sqrt(a.stderr_ * a.stderr_ + b.stderr_ * b.stderr_);
            if (std::abs(a.mean - b.mean) > band) return false;
        }
    return true;
}

// ---------------------------------------------------------------------------
// simulate

inline int cmd_simulate(const ExperimentConfig& cfg, int parallel, std::ostream& log) {
    ArtifactWriter out(cfg.output_dir);
    out.write("config_echo.ini", canonical_config(cfg));

    const SolverParams p = cfg.solver_params();
    const NoiseSpec noise = cfg.noise_spec();
    const double burn = cfg.resolved_burn_in(p.nu);

    StationaryOptions opts;
    opts.snapshot_every = static_cast<std::size_t>(std::max<long>(0, cfg.snapshot_every));
    opts.diag_every = static_cast<std::size_t>(std::max<long>(0, cfg.diag_every));
    opts.beta_fractions = cfg.beta_fractions;
    opts.parallel = parallel;

    log << "simulate: nu=" << p.nu << " alpha=" << p.alpha << " N=" << cfg.n
        << " burn_in=" << burn << " horizon=" << cfg.horizon << " replicas=" << cfg.n_replicas
        << "\n";
    StationaryRun run =
        run_stationary(p, noise, burn, cfg.horizon, cfg.n_replicas, RngStream{cfg.seed, 0}, opts);
    if (!run.report.cfl_warning.empty()) log << "warning: " << run.report.cfl_warning << "\n";

    const NoiseSpec eff = noise.restricted(p.lattice, p.dealias);
    const double residual = run.report.c_alpha_target > 0.0
                                ? energy_balance_residual(run.report, eff, p.lattice)
                                : 0.0;
    const auto factorial = check_factorial_bound(run.report);
    const auto expb = check_exp_bound(run.report);

    std::size_t snap_index = 0;
    json snap_list = json::array();
    for (const Snapshot& s : run.snapshots) {
        char name[64];
        std::snprintf(name, sizeof(name), "snapshot_%04zu.spf", snap_index++);
        SnapshotMeta meta{p.nu, p.alpha, cfg.seed,
                          static_cast<std::uint64_t>(std::llround(s.time / p.dt))};
        write_snapshot(s.field, meta, s.time, out.dir() / name);
        out.note_existing(name);
        out.note_existing(std::string(name) + ".json");
        snap_list.push_back(json{{"file", name}, {"replica", s.replica}, {"time", s.time}});
    }

    json report;
    report["command"] = "simulate";
    report["config_hash"] = config_hash_hex(cfg);
    report["moments"] = to_json(run.report);
    report["energy_balance_residual"] = residual;
    report["factorial_bounds"] = to_json(factorial);
    report["exp_bounds"] = to_json(expb);
    report["snapshots"] = snap_list;

    bool pass = run.report.valid;
    for (const auto& c : factorial) pass = pass && c.pass;
    for (const auto& c : expb) pass = pass && c.pass;
    report["pass"] = pass;

    out.write("report.json", report.dump(2) + "\n");
    out.write("moments.csv", moments_csv({run.report}, {residual}));
    out.write("diagnostics.csv", diagnostics_csv(run.diagnostics));
    out.finalize_manifest(json{{"config_hash", config_hash_hex(cfg)}});

    log << "m2_ha1 = " << run.report.m2_ha1.mean << " (target " << run.report.c_alpha_target
        << ", residual " << residual << ")\n";
    if (!pass) {
        write_error_log(cfg.output_dir, "simulate", {"asserted criteria failed; see report.json"});
        return 1;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// sweep

inline int cmd_sweep(const ExperimentConfig& cfg, int parallel, std::ostream& log) {
    if (cfg.nu_list.empty()) {
        write_error_log(cfg.output_dir, "sweep", {"solver.nu_list must be non-empty for sweep"});
        std::cerr << "sweep: solver.nu_list must be non-empty\n";
        return 2;
    }
    ArtifactWriter out(cfg.output_dir);
    out.write("config_echo.ini", canonical_config(cfg));
    const std::string chash = config_hash_hex(cfg);

    const SolverParams base = cfg.solver_params();
    const NoiseSpec noise = cfg.noise_spec();
    const double nu0 = cfg.nu_list.front();

    std::vector<MomentReport> reports(cfg.nu_list.size());
    std::vector<std::vector<std::array<double, 4>>> diag(cfg.nu_list.size());
    std::vector<Snapshot> terminal;
    double last_dt = base.dt;

    for (std::size_t j = 0; j < cfg.nu_list.size(); ++j) {
        SolverParams p = base;
        p.nu = cfg.nu_list[j];
        const double scale = nu0 / p.nu;
        const double burn =
            cfg.burn_in < 0.0 ? 20.0 / p.nu : cfg.burn_in * scale;
        const double horizon = cfg.horizon * scale;
        const bool last = j + 1 == cfg.nu_list.size();
        const std::string rep_name = "report_nu_" + std::to_string(j) + ".json";

        // resume: a per-nu report written by a previous run of the same config
        bool resumed = false;
        if (fs::exists(out.dir() / rep_name)) {
            try {
                const json prev = json::parse(read_file_bytes(out.dir() / rep_name));
                if (prev.value("config_hash", std::string{}) == chash) {
                    reports[j] = moment_report_from_json(prev.at("moments"));
                    for (const auto& row : prev.value("diagnostics", json::array()))
                        diag[j].push_back({row.at(0).get<double>(), row.at(1).get<double>(),
                                           row.at(2).get<double>(), row.at(3).get<double>()});
                    if (last) {
                        for (const auto& e : prev.at("snapshot_files")) {
                            const std::string file = e.at("file").get<std::string>();
                            LoadedSnapshot ls = read_snapshot(out.dir() / file);
                            terminal.push_back(Snapshot{e.at("replica").get<int>(),
                                                        e.at("time").get<double>(),
                                                        std::move(ls.field)});
                            out.note_existing(file);
                            if (fs::exists(out.dir() / (file + ".json")))
                                out.note_existing(file + ".json");
                        }
                    }
                    resumed = true;
                    out.note_existing(rep_name);
                    log << "sweep: nu=" << p.nu << " resumed from " << rep_name << "\n";
                }
            } catch (const std::exception& e) {
                log << "sweep: cannot resume " << rep_name << " (" << e.what() << "), rerunning\n";
                resumed = false;
            }
        }
        if (!resumed) {
            StationaryOptions opts;
            opts.beta_fractions = cfg.beta_fractions;
            opts.parallel = parallel;
            opts.diag_every = static_cast<std::size_t>(std::max<long>(0, cfg.diag_every));
            opts.stream_base = (static_cast<std::uint64_t>(j) + 1) << 32;
            opts.snapshot_every =
                last ? static_cast<std::size_t>(std::max<long>(0, cfg.snapshot_every)) : 0;
            log << "sweep: nu=" << p.nu << " burn_in=" << burn << " horizon=" << horizon << "\n";
            StationaryRun run =
                run_stationary(p, noise, burn, horizon, cfg.n_replicas, RngStream{cfg.seed, 0}, opts);
            if (!run.report.cfl_warning.empty()) log << "warning: " << run.report.cfl_warning << "\n";
            reports[j] = run.report;
            diag[j] = run.diagnostics;

            json perj;
            perj["config_hash"] = chash;
            perj["moments"] = to_json(run.report);
            json drows = json::array();
            for (const auto& row : diag[j]) drows.push_back(json{row[0], row[1], row[2], row[3]});
            perj["diagnostics"] = drows;
            if (last) {
                const double spacing = 5.0 * run.report.iat_h1_steps * p.dt;
                terminal = decorrelate_snapshots(run.snapshots, spacing);
                json files = json::array();
                std::size_t idx = 0;
                for (const Snapshot& s : terminal) {
                    char name[64];
                    std::snprintf(name, sizeof(name), "sweep_snapshot_%04zu.spf", idx++);
                    SnapshotMeta meta{p.nu, p.alpha, cfg.seed,
                                      static_cast<std::uint64_t>(std::llround(s.time / p.dt))};
                    write_snapshot(s.field, meta, s.time, out.dir() / name);
                    out.note_existing(name);
                    out.note_existing(std::string(name) + ".json");
                    files.push_back(
                        json{{"file", name}, {"replica", s.replica}, {"time", s.time}});
                }
                perj["snapshot_files"] = files;
            }
            out.write(rep_name, perj.dump(2) + "\n");
        }
        if (last) last_dt = p.dt;
    }

    // Euler invariance on the smallest-nu ensemble
    std::vector<InvarianceRow> invariance;
    std::string invariance_error;
    try {
        invariance = euler_invariance_test(terminal, cfg.euler_t_list, cfg.euler_params(),
                                           base.alpha + 1.0);
    } catch (const std::exception& e) {
        invariance_error = e.what();
    }

    const NoiseSpec eff = noise.restricted(base.lattice, base.dealias);
    std::vector<double> residuals;
    for (const auto& r : reports)
        residuals.push_back(r.c_alpha_target > 0.0
                                ? energy_balance_residual(r, eff, base.lattice)
                                : 0.0);

    bool pass = true;
    std::vector<std::string> failures;
    for (std::size_t j = 0; j < reports.size(); ++j) {
        if (!reports[j].valid) {
            pass = false;
            failures.push_back("nu=" + format_g17(reports[j].nu) + ": run invalid (blow-ups)");
        }
        if (residuals[j] > AssertedCriteria::balance_residual_max) {
            pass = false;
            failures.push_back("nu=" + format_g17(reports[j].nu) + ": balance residual " +
                               format_g17(residuals[j]) + " > 0.05");
        }
        for (const auto& c : check_factorial_bound(reports[j]))
            if (!c.pass) {
                pass = false;
                failures.push_back("nu=" + format_g17(reports[j].nu) + ": factorial bound n=" +
                                   std::to_string(c.n) + " violated");
            }
        for (const auto& c : check_exp_bound(reports[j]))
            if (!c.pass) {
                pass = false;
                failures.push_back("nu=" + format_g17(reports[j].nu) +
                                   ": exponential bound violated at beta=" + format_g17(c.beta));
            }
    }
    if (!reports_pairwise_consistent(reports)) {
        pass = false;
        failures.push_back("m2_ha1 estimates not nu-independent within 3 SE bands");
    }
    if (!invariance_error.empty()) {
        pass = false;
        failures.push_back("euler invariance: " + invariance_error);
    }
    for (const auto& row : invariance)
        if (row.t > 0.0 && std::abs(row.standardized) > AssertedCriteria::invariance_drift_max) {
            pass = false;
            failures.push_back("euler invariance drift of " + row.quantity + " at t=" +
                               format_g17(row.t) + " is " + format_g17(row.standardized));
        }

    json report;
    report["command"] = "sweep";
    report["config_hash"] = chash;
    report["nu_list"] = cfg.nu_list;
    report["reports"] = json::array();
    for (const auto& r : reports) report["reports"].push_back(to_json(r));
    report["balance_residuals"] = residuals;
    json fact = json::array(), expo = json::array();
    for (const auto& r : reports) {
        fact.push_back(to_json(check_factorial_bound(r)));
        expo.push_back(to_json(check_exp_bound(r)));
    }
    report["factorial_bounds"] = fact;
    report["exp_bounds"] = expo;
    report["euler_invariance"] = to_json(invariance);
    if (!invariance_error.empty()) report["euler_invariance_error"] = invariance_error;
    report["n_terminal_snapshots"] = terminal.size();
    report["failures"] = failures;
    report["pass"] = pass;

    out.write("report.json", report.dump(2) + "\n");
    out.write("moments.csv", moments_csv(reports, residuals));
    out.write("diagnostics.csv", diagnostics_csv(diag.back()));
    out.finalize_manifest(json{{"config_hash", chash}});

    for (const auto& f : failures) log << "FAIL: " << f << "\n";
    log << "sweep: " << (pass ? "all asserted criteria pass" : "criteria FAILED") << "\n";
    if (!pass) write_error_log(cfg.output_dir, "sweep", failures);
    return pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// euler-check

inline int cmd_euler_check(const ExperimentConfig& cfg, int, std::ostream& log) {
    ArtifactWriter out(cfg.output_dir);
    out.write("config_echo.ini", canonical_config(cfg));

    const EulerParams p = cfg.euler_params();
    const double sigma = cfg.alpha + 1.0;
    const SpectralField datum = taylor_green(cfg.lattice());

    log << "euler-check: scheme=" << cfg.euler_scheme << " dt=" << p.dt
        << " horizon=" << cfg.euler_horizon << "\n";

    // conservation drift along the flow, accumulated online
    std::vector<std::array<double, 4>> diag;
    ConservationReport cons;
    cons.sigma = sigma;
    {
        const std::size_t n_steps =
            static_cast<std::size_t>(std::llround(cfg.euler_horizon / p.dt));
        const std::size_t stride =
            cfg.diag_every > 0 ? static_cast<std::size_t>(cfg.diag_every) : n_steps;
        SpectralField u = datum;
        const double l2_0 = sobolev_norm(u, 0.0), h1_0 = sobolev_norm(u, 1.0),
                     hs_0 = sobolev_norm(u, sigma);
        diag.push_back({0.0, h1_0, hs_0, sobolev_norm(u, 2.0 * cfg.alpha)});
        for (std::size_t s = 1; s <= n_steps; ++s) {
            u = detail::euler_step(u, p);
            if (!all_finite(u)) throw blowup_error(s);
            cons.drift_l2 =
                std::max(cons.drift_l2, std::abs(sobolev_norm(u, 0.0) - l2_0) / l2_0);
            cons.drift_h1 =
                std::max(cons.drift_h1, std::abs(sobolev_norm(u, 1.0) - h1_0) / h1_0);
            cons.drift_hsigma =
                std::max(cons.drift_hsigma, std::abs(sobolev_norm(u, sigma) - hs_0) / hs_0);
            if (s % stride == 0 || s == n_steps)
                diag.push_back({p.dt * static_cast<double>(s), sobolev_norm(u, 1.0),
                                sobolev_norm(u, sigma), sobolev_norm(u, 2.0 * cfg.alpha)});
        }
    }
    log << "drift: l2=" << cons.drift_l2 << " h1=" << cons.drift_h1
        << " h_sigma=" << cons.drift_hsigma << "\n";

    // Drift order under refinement: a pinned RK4 protocol on a datum with
    // active transfer (pure Taylor-Green is a steady state and produces only
    // round-off).  The step sizes are the coarsest stable ones, where scheme
    // error dominates the floor; at finer steps the conservation drift is
    // superconvergent (~dt^5: the RK4 amplification factor is even in
    // omega dt, so pure rotations lose energy only at (omega dt)^6 per step).
    const SpectralField fit_datum = perturbed_taylor_green(cfg.lattice(), 2.0, 0.3);
    const std::vector<double> fit_dts = {0.04, 0.02, 0.01};
    std::vector<double> fit_drifts;
    const bool run_fit = p.scheme == EulerScheme::rk4;
    if (run_fit) {
        for (double dt : fit_dts) {
            EulerParams q = p;
            q.scheme = EulerScheme::rk4;
            q.dt = dt;
            const std::size_t n_steps = static_cast<std::size_t>(std::llround(10.0 / dt));
            SpectralField u = fit_datum;
            const double h1_0 = sobolev_norm(u, 1.0);
            double drift = 0.0;
            for (std::size_t s = 1; s <= n_steps; ++s) {
                u = detail::euler_step(u, q);
                drift = std::max(drift, std::abs(sobolev_norm(u, 1.0) - h1_0) / h1_0);
            }
            fit_drifts.push_back(drift);
        }
    }
    double fit_exponent = 0.0;
    if (run_fit) {
        std::vector<double> exponents;
        for (std::size_t i = 0; i + 1 < fit_drifts.size(); ++i)
            exponents.push_back(std::log2(fit_drifts[i] / fit_drifts[i + 1]));
        for (double e : exponents) fit_exponent += e;
        fit_exponent /= static_cast<double>(exponents.size());
        log << "refinement drift exponent: " << fit_exponent << "\n";
    }

    const bool drift_ok =
        cons.drift_l2 <= cfg.euler_drift_tolerance && cons.drift_h1 <= cfg.euler_drift_tolerance;
    const bool fit_ok = !run_fit || (fit_exponent >= 3.5 && fit_exponent <= 4.5);
    const bool pass = drift_ok && fit_ok;

    json report;
    report["command"] = "euler-check";
    report["config_hash"] = config_hash_hex(cfg);
    report["scheme"] = cfg.euler_scheme;
    report["dt"] = p.dt;
    report["horizon"] = cfg.euler_horizon;
    report["sigma"] = sigma;
    report["drift_l2"] = cons.drift_l2;
    report["drift_h1"] = cons.drift_h1;
    report["drift_hsigma"] = cons.drift_hsigma;
    report["drift_tolerance"] = cfg.euler_drift_tolerance;
    if (run_fit) {
        report["refinement_dts"] = fit_dts;
        report["refinement_drifts"] = fit_drifts;
        report["refinement_exponent"] = fit_exponent;
    }
    report["pass"] = pass;

    out.write("report.json", report.dump(2) + "\n");
    out.write("diagnostics.csv", diagnostics_csv(diag));
    out.finalize_manifest(json{{"config_hash", config_hash_hex(cfg)}});

    if (!pass)
        write_error_log(cfg.output_dir, "euler-check",
                        {drift_ok ? "" : "conservation drift above tolerance",
                         fit_ok ? "" : "refinement exponent outside window"});
    return pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// verify: machine-precision identity suite

struct IdentityCheck {
    std::string name;
    double max_residual = 0.0;
    double threshold = 0.0;
    bool pass() const { return max_residual <= threshold; }
};

inline std::vector<IdentityCheck> run_identity_suite(const ExperimentConfig& cfg) {
    std::vector<IdentityCheck> checks;
    const Lattice lat = cfg.lattice();
    const DealiasRule rule{cfg.dealias_fraction};
    GaussianSampler gauss(RngStream{cfg.seed, 0xA11CE});

    IdentityCheck leray_idem{"leray_idempotent", 0.0, 1e-12};
    IdentityCheck leray_adj{"leray_self_adjoint", 0.0, 1e-12};
    IdentityCheck leray_grad{"leray_annihilates_gradients", 0.0, 1e-12};
    const double s_grid[4] = {-1.0, 0.0, 1.0, 2.0};
    for (int trial = 0; trial < 100; ++trial) {
        const SpectralField u = random_real_field(lat, gauss);
        const SpectralField v = random_real_field(lat, gauss);
        const SpectralField pu = leray_project(u);
        const SpectralField ppu = leray_project(pu);
        leray_idem.max_residual = std::max(
            leray_idem.max_residual, sobolev_norm(ppu - pu, 0.0) / sobolev_norm(pu, 0.0));
        const double s = s_grid[trial % 4];
        const double lhs = sobolev_inner(pu, v, s);
        const double rhs = sobolev_inner(u, leray_project(v), s);
        leray_adj.max_residual =
            std::max(leray_adj.max_residual,
                     std::abs(lhs - rhs) / (sobolev_norm(u, s) * sobolev_norm(v, s)));
        // gradient field: c(k) = i k phi(k)
        SpectralField g(lat);
        for (int i = 0; i < lat.n; ++i)
            for (int j = 0; j < lat.n; ++j) {
                if (i == 0 && j == 0) continue;
                g.at(0, i, j) = Complex(0.0, lat.k1(i)) * u.at(0, i, j);
                g.at(1, i, j) = Complex(0.0, lat.k2(j)) * u.at(0, i, j);
            }
        leray_grad.max_residual =
            std::max(leray_grad.max_residual,
                     sobolev_norm(leray_project(g), 0.0) / std::max(1e-300, sobolev_norm(g, 0.0)));
    }
    checks.push_back(leray_idem);
    checks.push_back(leray_adj);
    checks.push_back(leray_grad);

    IdentityCheck iso{"a_alpha_isometry", 0.0, 1e-12};
    IdentityCheck semi_add{"semigroup_additivity", 0.0, 1e-12};
    IdentityCheck semi_con{"semigroup_contraction", 0.0, 1e-12};
    for (int trial = 0; trial < 40; ++trial) {
        const SpectralField u = random_solenoidal_field(lat, gauss);
        const double s = -2.0 + 4.0 * gauss.uniform_open();
        const double a = -1.0 + 3.0 * gauss.uniform_open();
        const double n1 = sobolev_norm(apply_A_alpha(u, a), s);
        const double n2 = sobolev_norm(u, 2.0 * a + s);
        iso.max_residual = std::max(iso.max_residual, std::abs(n1 - n2) / n2);
        const double t1 = gauss.uniform_open(), t2 = gauss.uniform_open();
        const SpectralField two = semigroup_apply(semigroup_apply(u, cfg.nu, cfg.alpha, t1),
                                                  cfg.nu, cfg.alpha, t2);
        const SpectralField one = semigroup_apply(u, cfg.nu, cfg.alpha, t1 + t2);
        semi_add.max_residual =
            std::max(semi_add.max_residual, sobolev_norm(two - one, 0.0) / sobolev_norm(one, 0.0));
        const double ratio = sobolev_norm(semigroup_apply(u, cfg.nu, cfg.alpha, t1), s) /
                             sobolev_norm(u, s);
        semi_con.max_residual = std::max(semi_con.max_residual, ratio - 1.0);
    }
    checks.push_back(iso);
    checks.push_back(semi_add);
    checks.push_back(semi_con);

    IdentityCheck canc_u{"cancellation_bu_u", 0.0, 1e-11};
    IdentityCheck canc_au{"cancellation_bu_au", 0.0, 1e-11};
    for (int trial = 0; trial < 100; ++trial) {
        const SpectralField u =
            random_solenoidal_field(lat, gauss, 2.0, rule.max_freq(lat));
        const SpectralField bu = quadratic_B(u, rule);
        const double scale_u = sobolev_norm(bu, 0.0) * sobolev_norm(u, 0.0);
        canc_u.max_residual =
            std::max(canc_u.max_residual, std::abs(sobolev_inner(bu, u, 0.0)) / scale_u);
        const SpectralField au = apply_A_alpha(u, 1.0);
        const double scale_au = sobolev_norm(bu, 0.0) * sobolev_norm(au, 0.0);
        canc_au.max_residual =
            std::max(canc_au.max_residual, std::abs(sobolev_inner(bu, au, 0.0)) / scale_au);
    }
    checks.push_back(canc_u);
    checks.push_back(canc_au);

    IdentityCheck conv{"b_convolution_oracle_n16", 0.0, 1e-12};
    {
        const Lattice lat16 = make_lattice(16, cfg.box);
        for (int trial = 0; trial < 5; ++trial) {
            const SpectralField u =
                random_solenoidal_field(lat16, gauss, 2.0, rule.max_freq(lat16));
            const SpectralField v =
                random_solenoidal_field(lat16, gauss, 2.0, rule.max_freq(lat16));
            const SpectralField fast = bilinear_B(u, v, rule);
            const SpectralField slow = reference::convolution_B(u, v, rule);
            conv.max_residual = std::max(
                conv.max_residual, sobolev_norm(fast - slow, 0.0) / sobolev_norm(slow, 0.0));
        }
    }
    checks.push_back(conv);

    IdentityCheck interp{"interpolation_inequality", 0.0, 0.0};
    for (int trial = 0; trial < 1000; ++trial) {
        const SpectralField u = random_solenoidal_field(lat, gauss, 1.0 + 2.0 * (trial % 3));
        const double pq[2] = {-2.0 + 3.0 * gauss.uniform_open(), 0.5 + 2.5 * gauss.uniform_open()};
        const double p_idx = std::min(pq[0], pq[1]) , q_idx = std::max(pq[0], pq[1]);
        const double lam = gauss.uniform_open();
        const double r_idx = lam * p_idx + (1.0 - lam) * q_idx;
        const double lhs = sobolev_norm(u, r_idx);
        const double rhs =
            std::pow(sobolev_norm(u, p_idx), lam) * std::pow(sobolev_norm(u, q_idx), 1.0 - lam);
        const double violation = std::max(0.0, (lhs - rhs * (1.0 + 1e-12)) / rhs);
        interp.max_residual = std::max(interp.max_residual, violation);
    }
    checks.push_back(interp);

    return checks;
}

inline int cmd_verify(const ExperimentConfig& cfg, int, std::ostream& log) {
    ArtifactWriter out(cfg.output_dir);
    out.write("config_echo.ini", canonical_config(cfg));

    const std::vector<IdentityCheck> checks = run_identity_suite(cfg);
    bool pass = true;
    json items = json::object();
    for (const auto& c : checks) {
        pass = pass && c.pass();
        items[c.name] = json{{"max_residual", c.max_residual},
                             {"threshold", c.threshold},
                             {"pass", c.pass()}};
        log << (c.pass() ? "  ok  " : " FAIL ") << c.name << "  max_residual=" << c.max_residual
            << " threshold=" << c.threshold << "\n";
    }

    json report;
    report["command"] = "verify";
    report["config_hash"] = config_hash_hex(cfg);
    report["identity_suite"] = items;
    report["pass"] = pass;
    out.write("report.json", report.dump(2) + "\n");
    out.finalize_manifest(json{{"config_hash", config_hash_hex(cfg)}});

    log << "verify: " << (pass ? "all identities hold" : "FAILED") << "\n";
    if (!pass) write_error_log(cfg.output_dir, "verify", {"identity suite failed"});
    return pass ? 0 : 1;
}

} // namespace simlab
