#pragma once

#include <cctype>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "simlab/euler_solver.hpp"
#include "simlab/lattice.hpp"
#include "simlab/nse_solver.hpp"
#include "simlab/stochastic.hpp"

namespace simlab {

/// Round-trippable double formatting used for every numeric artifact.
inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Full experiment description.  The config file is the single source of
/// truth; the CLI may only choose the subcommand and override seed,
/// output_dir and the worker count.
struct ExperimentConfig {
    // [lattice]
    int n = 32;
    double box = 2.0 * M_PI;
    // [solver]
    double nu = 0.1;
    std::vector<double> nu_list; // sweep only
    double alpha = 2.0;
    double dt = 0.02;
    double dealias_fraction = 2.0 / 3.0;
    int picard_sweeps = 1;
    bool nonlinearity = true;
    // [noise]
    double sigma0 = 0.4;
    double decay_exponent = 6.0;
    bool active_all = true;
    std::vector<std::pair<int, int>> active_modes;
    // [sampling]
    double burn_in = -1.0; // < 0: auto 20/nu
    double horizon = 80.0;
    int n_replicas = 6;
    long snapshot_every = 50; // steps
    long diag_every = 10;     // steps
    std::vector<double> beta_fractions = {0.1, 0.25, 0.4};
    // [euler]
    double euler_dt = 1e-3;
    std::string euler_scheme = "rk4";
    std::vector<double> euler_t_list = {1.0, 5.0};
    double euler_horizon = 10.0;
    double euler_drift_tolerance = 1e-8;
    // [run]
    std::uint64_t seed = 1;
    std::string output_dir = "out";

    Lattice lattice() const { return make_lattice(n, box); }

    SolverParams solver_params() const {
        SolverParams p;
        p.nu = nu;
        p.alpha = alpha;
        p.dt = dt;
        p.lattice = lattice();
        p.dealias = DealiasRule{dealias_fraction};
        p.picard_sweeps = picard_sweeps;
        p.nonlinearity_on = nonlinearity;
        return p;
    }

    NoiseSpec noise_spec() const {
        NoiseSpec s;
        s.sigma0 = sigma0;
        s.decay_exponent = decay_exponent;
        s.active_all = active_all;
        if (!active_all)
            for (auto [m1, m2] : active_modes) s.insert_mode_pair(m1, m2);
        return s;
    }

    EulerParams euler_params() const {
        EulerParams p;
        p.dt = euler_dt;
        p.lattice = lattice();
        p.dealias = DealiasRule{dealias_fraction};
        p.scheme = euler_scheme_from_string(euler_scheme);
        return p;
    }

    double resolved_burn_in(double for_nu) const {
        return burn_in < 0.0 ? 20.0 / for_nu : burn_in;
    }
};

struct ConfigParseResult {
    ExperimentConfig config;
    std::vector<std::string> errors;   // syntax + semantic violations, all of them
    std::vector<std::string> warnings;
    bool ok() const { return errors.empty(); }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',' || c == ' ' || c == '\t') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

struct KeyValue {
    std::string value;
    int line = 0;
    bool consumed = false;
};

} // namespace detail

/// Parse the sectioned key = value config format.  Unknown keys, bad syntax
/// and semantic violations are all collected (not just the first); the
/// returned config is only meaningful when errors is empty.
inline ConfigParseResult parse_config(const std::string& text) {
    ConfigParseResult result;
    std::map<std::string, detail::KeyValue> kv;

    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                result.errors.push_back("line " + std::to_string(line_no) +
                                        ": unterminated section header");
                continue;
            }
            section = detail::trim(line.substr(1, line.size() - 2));
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            result.errors.push_back("line " + std::to_string(line_no) + ", column " +
                                    std::to_string(line.size() + 1) + ": expected 'key = value'");
            continue;
        }
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) {
            result.errors.push_back("line " + std::to_string(line_no) + ", column 1: empty key");
            continue;
        }
        kv[section + "." + key] = detail::KeyValue{value, line_no, false};
    }

    ExperimentConfig& c = result.config;
    auto err_at = [&](const detail::KeyValue& e, const std::string& msg) {
        result.errors.push_back("line " + std::to_string(e.line) + ": " + msg);
    };
    auto get = [&](const std::string& key) -> detail::KeyValue* {
        auto it = kv.find(key);
        if (it == kv.end()) return nullptr;
        it->second.consumed = true;
        return &it->second;
    };
    auto get_double = [&](const std::string& key, double& dst) {
        if (auto* e = get(key)) {
            try {
                std::size_t pos = 0;
                const double v = std::stod(e->value, &pos);
                if (pos != e->value.size()) throw std::invalid_argument("");
                dst = v;
            } catch (...) {
                err_at(*e, key + ": not a number: '" + e->value + "'");
            }
        }
    };
    auto get_long = [&](const std::string& key, auto& dst) {
        if (auto* e = get(key)) {
            try {
                std::size_t pos = 0;
                const long long v = std::stoll(e->value, &pos);
                if (pos != e->value.size()) throw std::invalid_argument("");
                dst = static_cast<std::decay_t<decltype(dst)>>(v);
            } catch (...) {
                err_at(*e, key + ": not an integer: '" + e->value + "'");
            }
        }
    };
    auto get_bool = [&](const std::string& key, bool& dst) {
        if (auto* e = get(key)) {
            if (e->value == "on" || e->value == "true" || e->value == "1") dst = true;
            else if (e->value == "off" || e->value == "false" || e->value == "0") dst = false;
            else err_at(*e, key + ": expected on/off, got '" + e->value + "'");
        }
    };
    auto get_string = [&](const std::string& key, std::string& dst) {
        if (auto* e = get(key)) dst = e->value;
    };
    auto get_double_list = [&](const std::string& key, std::vector<double>& dst) {
        if (auto* e = get(key)) {
            std::vector<double> vals;
            for (const std::string& tok : detail::split_list(e->value)) {
                try {
                    std::size_t pos = 0;
                    vals.push_back(std::stod(tok, &pos));
                    if (pos != tok.size()) throw std::invalid_argument("");
                } catch (...) {
                    err_at(*e, key + ": not a number: '" + tok + "'");
                    return;
                }
            }
            dst = vals;
        }
    };

    get_long("lattice.n", c.n);
    get_double("lattice.box", c.box);
    get_double("solver.nu", c.nu);
    get_double_list("solver.nu_list", c.nu_list);
    get_double("solver.alpha", c.alpha);
    get_double("solver.dt", c.dt);
    get_double("solver.dealias_fraction", c.dealias_fraction);
    get_long("solver.picard_sweeps", c.picard_sweeps);
    get_bool("solver.nonlinearity", c.nonlinearity);
    get_double("noise.sigma0", c.sigma0);
    get_double("noise.decay_exponent", c.decay_exponent);
    if (auto* e = get("noise.active_set")) {
        if (e->value == "all") {
            c.active_all = true;
        } else {
            c.active_all = false;
            c.active_modes.clear();
            // explicit list of mode pairs: (m1,m2) (m1,m2) ...
            std::string v = e->value;
            for (char& ch : v)
                if (ch == '(' || ch == ')') ch = ' ';
            const auto toks = detail::split_list(v);
            if (toks.size() % 2 != 0) {
                err_at(*e, "noise.active_set: expected pairs (m1,m2)");
            } else {
                try {
                    for (std::size_t i = 0; i + 1 < toks.size(); i += 2)
                        c.active_modes.emplace_back(std::stoi(toks[i]), std::stoi(toks[i + 1]));
                } catch (...) {
                    err_at(*e, "noise.active_set: bad integer in mode pair");
                }
            }
        }
    }
    if (auto* e = get("sampling.burn_in")) {
        if (e->value == "auto") {
            c.burn_in = -1.0;
        } else {
            try {
                c.burn_in = std::stod(e->value);
            } catch (...) {
                err_at(*e, "sampling.burn_in: expected a number or 'auto'");
            }
        }
    }
    get_double("sampling.horizon", c.horizon);
    get_long("sampling.n_replicas", c.n_replicas);
    get_long("sampling.snapshot_every", c.snapshot_every);
    get_long("sampling.diag_every", c.diag_every);
    get_double_list("sampling.beta_fractions", c.beta_fractions);
    get_double("euler.dt", c.euler_dt);
    get_string("euler.scheme", c.euler_scheme);
    get_double_list("euler.t_list", c.euler_t_list);
    get_double("euler.horizon", c.euler_horizon);
    get_double("euler.drift_tolerance", c.euler_drift_tolerance);
    get_long("run.seed", c.seed);
    get_string("run.output_dir", c.output_dir);

    for (const auto& [key, e] : kv)
        if (!e.consumed)
            result.errors.push_back("line " + std::to_string(e.line) + ": unknown key '" + key +
                                    "'");

    // semantic validation: report every violation
    auto check = [&](bool ok, const std::string& msg) {
        if (!ok) result.errors.push_back(msg);
    };
    check(c.n >= 8, "lattice.n must be >= 8");
    check(c.n % 2 == 0, "lattice.n must be even");
    check(c.box > 0.0, "lattice.box must be > 0");
    check(c.nu > 0.0, "solver.nu must be > 0");
    for (std::size_t i = 0; i + 1 < c.nu_list.size(); ++i)
        if (!(c.nu_list[i] > c.nu_list[i + 1])) {
            result.errors.push_back("solver.nu_list must be strictly decreasing");
            break;
        }
    for (double v : c.nu_list)
        if (!(v > 0.0)) {
            result.errors.push_back("solver.nu_list entries must be > 0");
            break;
        }
    check(c.alpha > 1.0, "solver.alpha must be > 1");
    check(c.dt > 0.0, "solver.dt must be > 0");
    check(c.dealias_fraction > 0.0 && c.dealias_fraction <= 1.0,
          "solver.dealias_fraction must be in (0, 1]");
    check(c.picard_sweeps >= 0, "solver.picard_sweeps must be >= 0");
    check(c.sigma0 >= 0.0, "noise.sigma0 must be >= 0");
    check(c.horizon > 0.0, "sampling.horizon must be > 0");
    check(c.n_replicas >= 1, "sampling.n_replicas must be >= 1");
    check(c.snapshot_every >= 0, "sampling.snapshot_every must be >= 0");
    check(c.diag_every >= 0, "sampling.diag_every must be >= 0");
    for (double f : c.beta_fractions)
        if (!(f > 0.0 && f < 1.0)) {
            result.errors.push_back(
                "sampling.beta_fractions must lie in (0, 1): beta = fraction / (2 C_alpha) "
                "hits the exponential-moment singularity at 1");
            break;
        }
    check(c.euler_dt > 0.0, "euler.dt must be > 0");
    check(c.euler_scheme == "rk4" || c.euler_scheme == "midpoint",
          "euler.scheme must be rk4 or midpoint");
    for (double t : c.euler_t_list)
        if (t < 0.0) {
            result.errors.push_back("euler.t_list entries must be >= 0");
            break;
        }
    check(c.euler_horizon > 0.0, "euler.horizon must be > 0");

    return result;
}

/// Canonical form: every field appears, defaults included, numbers with 17
/// significant digits.  parse_config(canonical_config(c)) reproduces c.
inline std::string canonical_config(const ExperimentConfig& c) {
    std::ostringstream out;
    auto list = [](const std::vector<double>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i)
            s += (i ? ", " : "") + format_g17(v[i]);
        return s;
    };
    out << "[lattice]\n";
    out << "n = " << c.n << "\n";
    out << "box = " << format_g17(c.box) << "\n\n";
    out << "[solver]\n";
    out << "nu = " << format_g17(c.nu) << "\n";
    if (!c.nu_list.empty()) out << "nu_list = " << list(c.nu_list) << "\n";
    out << "alpha = " << format_g17(c.alpha) << "\n";
    out << "dt = " << format_g17(c.dt) << "\n";
    out << "dealias_fraction = " << format_g17(c.dealias_fraction) << "\n";
    out << "picard_sweeps = " << c.picard_sweeps << "\n";
    out << "nonlinearity = " << (c.nonlinearity ? "on" : "off") << "\n\n";
    out << "[noise]\n";
    out << "sigma0 = " << format_g17(c.sigma0) << "\n";
    out << "decay_exponent = " << format_g17(c.decay_exponent) << "\n";
    if (c.active_all) {
        out << "active_set = all\n\n";
    } else {
        out << "active_set =";
        std::set<std::pair<int, int>> sym;
        for (auto [m1, m2] : c.active_modes) {
            sym.insert({m1, m2});
            sym.insert({-m1, -m2});
        }
        for (auto [m1, m2] : sym) out << " (" << m1 << "," << m2 << ")";
        out << "\n\n";
    }
    out << "[sampling]\n";
    out << "burn_in = " << (c.burn_in < 0.0 ? std::string("auto") : format_g17(c.burn_in))
        << "\n";
    out << "horizon = " << format_g17(c.horizon) << "\n";
    out << "n_replicas = " << c.n_replicas << "\n";
    out << "snapshot_every = " << c.snapshot_every << "\n";
    out << "diag_every = " << c.diag_every << "\n";
    out << "beta_fractions = " << list(c.beta_fractions) << "\n\n";
    out << "[euler]\n";
    out << "dt = " << format_g17(c.euler_dt) << "\n";
    out << "scheme = " << c.euler_scheme << "\n";
    out << "t_list = " << list(c.euler_t_list) << "\n";
    out << "horizon = " << format_g17(c.euler_horizon) << "\n";
    out << "drift_tolerance = " << format_g17(c.euler_drift_tolerance) << "\n\n";
    out << "[run]\n";
    out << "seed = " << c.seed << "\n";
    // output_dir is run plumbing, not experiment identity: leaving it out
    // keeps artifact bytes independent of where they are written
    return out.str();
}

} // namespace simlab
