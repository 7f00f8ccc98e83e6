#ifndef AGESIR_SCENARIO_HPP
#define AGESIR_SCENARIO_HPP

#include <chrono>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "agesir/config.hpp"
#include "agesir/control_ode.hpp"
#include "agesir/control_pide.hpp"
#include "agesir/csv.hpp"
#include "agesir/demography.hpp"
#include "agesir/equilibria.hpp"
#include "agesir/ode_reduction.hpp"
#include "agesir/pide.hpp"

namespace agesir {

inline VitalRates rates_from_config(const ScenarioConfig& cfg, const AgeGrid& grid) {
    if (cfg.profile == "okuwa-like") return okuwa_like_rates(cfg.beta0, grid);
    if (cfg.profile != "tabulated") throw ConfigError("rates.profile must be okuwa-like|tabulated");
    if (static_cast<int>(cfg.mu_table.size()) != grid.n_nodes ||
        static_cast<int>(cfg.beta_table.size()) != grid.n_nodes ||
        static_cast<int>(cfg.gamma_table.size()) != grid.n_nodes)
        throw ConfigError("tabulated rates must have one entry per grid node");
    VitalRates r;
    auto table_fn = [grid](std::vector<double> tab) {
        return [grid, tab = std::move(tab)](double a) { return detail::interp_profile(tab, grid, a); };
    };
    r.mu = table_fn(cfg.mu_table);
    r.beta = table_fn(cfg.beta_table);
    r.gamma = table_fn(cfg.gamma_table);
    r.birth_rate = birth_rate_normalizing(
        [&r](double a) { return std::exp(-integrate(r.mu, 0.0, a)); }, grid);
    r.validate(grid);
    return r;
}

/** Per-bin integrals of i(t,.)*weight over [edge_k, edge_{k+1}); the quantity
 *  the reference plots show per age class. */
inline std::vector<double> aggregate_age_bins(std::span<const double> i_field,
                                              std::span<const double> weight,
                                              const std::vector<double>& edges,
                                              const AgeGrid& grid) {
    int n_bins = static_cast<int>(edges.size()) - 1;
    if (n_bins < 1) throw std::invalid_argument("aggregate_age_bins: need at least one bin");
    for (double e : edges)
        if (e < 0.0 || e > grid.max_age + 1e-12)
            throw std::invalid_argument("aggregate_age_bins: edge outside grid");
    double da = grid.da();
    std::vector<double> bins(n_bins, 0.0);
    // trapezoid panels [a_j, a_{j+1}] assigned to the bin containing their midpoint
    for (int j = 0; j + 1 < grid.n_nodes; ++j) {
        double mid = grid.node(j) + 0.5 * da;
        int b = -1;
        for (int k = 0; k < n_bins; ++k)
            if (mid >= edges[k] && mid < edges[k + 1]) { b = k; break; }
        if (b < 0) continue;
        bins[b] += 0.5 * (i_field[j] * weight[j] + i_field[j + 1] * weight[j + 1]) * da;
    }
    return bins;
}

struct RunReport {
    double R0 = 0.0;
    std::string classification;
    bool converged = false;
    double final_total_I = 0.0;
    double wall_ms = 0.0;
    std::vector<std::string> files;
    std::vector<std::string> diagnostics;
};

namespace detail {

inline void write_field_csv(const std::string& path, const std::vector<FieldState>& snaps,
                            const AgeGrid& grid, int which, RunReport& rep) {
    CsvWriter w(path, {"t", "a", "value"});
    for (const FieldState& s : snaps)
        for (int j = 0; j < grid.n_nodes; ++j) {
            const std::vector<double>& f = which == 0 ? s.S : which == 1 ? s.I : s.R;
            w.row(std::vector<double>{s.t, grid.node(j), f[j]});
        }
    rep.files.push_back(path);
}

inline void write_summary_csv(const std::string& path, const Trajectory& traj, RunReport& rep) {
    CsvWriter w(path, {"t", "total_I", "total_S", "total_R", "min_state", "max_state"});
    for (std::size_t k = 0; k < traj.times.size(); ++k)
        w.row(std::vector<double>{traj.times[k], traj.total_I[k], traj.total_S[k], traj.total_R[k],
                                  traj.min_state[k], traj.max_state[k]});
    rep.files.push_back(path);
}

inline void write_theta_csv(const std::string& path, const Trajectory& traj, const AgeGrid& grid,
                            RunReport& rep) {
    CsvWriter w(path, {"t", "a", "theta"});
    for (std::size_t k = 0; k < traj.snapshots.size(); ++k)
        for (int j = 0; j < grid.n_nodes; ++j)
            w.row(std::vector<double>{traj.snapshots[k].t, grid.node(j), traj.snapshot_theta[k][j]});
    rep.files.push_back(path);
}

} // namespace detail

inline RunReport run_scenario(const ScenarioConfig& cfg) {
    auto t_start = std::chrono::steady_clock::now();
    std::filesystem::create_directories(cfg.output_dir);
    AgeGrid grid(cfg.L, cfg.grid_nodes());
    VitalRates rates = rates_from_config(cfg, grid);
    std::vector<double> c = stationary_density_profile(rates, grid);

    RunReport rep;
    EquilibriumReport eq = equilibrium_report(rates, {}, grid);
    rep.R0 = eq.R0;
    rep.classification = to_string(eq.classification);

    auto out = [&](const std::string& name) { return cfg.output_dir + "/" + name; };

    if (cfg.model == "ode") {
        std::vector<double> edges(cfg.n_classes + 1);
        for (int k = 0; k <= cfg.n_classes; ++k) edges[k] = cfg.L * k / cfg.n_classes;
        ClassParams cp = build_class_params(
            edges, [&](double a) { return stationary_density(std::min(a, grid.clamp_age()), rates, grid); },
            rates);

        FieldState init = initial_conditions_builtin(grid);
        OdeState x0;
        x0.i.resize(cfg.n_classes);
        x0.s.resize(cfg.n_classes);
        for (int k = 0; k < cfg.n_classes; ++k) {
            std::vector<double> e2{edges[k], edges[k + 1]};
            double Ik = aggregate_age_bins(init.I, c, e2, grid)[0];
            x0.i[k] = Ik / cp.N[k];
            x0.s[k] = 1.0 - x0.i[k];
        }

        OdePolicy policy = [n = cfg.n_classes](double, const OdeState&) {
            return std::vector<double>(n, 0.0);
        };
        std::shared_ptr<SwitchOffLatch> latch;
        OdeGains gains = OdeGains::uniform(cfg.n_classes, cfg.r1, cfg.r2);
        if (cfg.controller == "ode-feedback") {
            latch = std::make_shared<SwitchOffLatch>(cfg.delta);
            policy = make_ode_closed_loop_policy(cp, gains, latch);
        } else if (cfg.controller == "pide-feedback") {
            throw ConfigError("pide-feedback controller requires model.kind = pide");
        }

        // Past eradication the disease-free state is still unstable for R0 > 1,
        // so integrator noise grows if the run is carried on; stop once the
        // dynamics are quiescent.
        OdeTrajectory traj = integrate_adaptive(x0, policy, cp, 0.0, cfg.T, cfg.rel_tol, cfg.conv_tol);
        rep.converged = traj.converged;
        rep.diagnostics = traj.diagnostics;
        double final_I = 0.0;
        for (int k = 0; k < cfg.n_classes; ++k) final_I += cp.N[k] * traj.states.back().i[k];
        rep.final_total_I = final_I;

        CsvWriter w(out("trajectory.csv"), {"t", "k", "s", "i", "theta"});
        for (std::size_t m = 0; m < traj.times.size(); ++m)
            for (int k = 0; k < cfg.n_classes; ++k)
                w.row(std::vector<double>{traj.times[m], double(k + 1), traj.states[m].s[k],
                                          traj.states[m].i[k], traj.thetas[m][k]});
        rep.files.push_back(out("trajectory.csv"));
        CsvWriter ws(out("summary.csv"), {"t", "total_I", "max_i", "min_s", "max_theta"});
        for (std::size_t m = 0; m < traj.times.size(); ++m) {
            double tot = 0.0, mi = 0.0, ms = 1e300, mt = 0.0;
            for (int k = 0; k < cfg.n_classes; ++k) {
                tot += cp.N[k] * traj.states[m].i[k];
                mi = std::max(mi, traj.states[m].i[k]);
                ms = std::min(ms, traj.states[m].s[k]);
                mt = std::max(mt, traj.thetas[m][k]);
            }
            ws.row(std::vector<double>{traj.times[m], tot, mi, ms, mt});
        }
        rep.files.push_back(out("summary.csv"));
    } else {
        SchemeConfig scheme{cfg.dt, cfg.T, grid,
                            cfg.variant == "raw"          ? PideVariant::raw
                            : cfg.variant == "homogeneous" ? PideVariant::homogeneous
                                                            : PideVariant::normalized};
        FieldState init = initial_conditions_builtin(grid);
        ControlPolicy policy = zero_control;
        std::shared_ptr<SwitchOffLatch> latch;
        PideGains pg;
        if (cfg.controller == "pide-feedback") {
            if (scheme.variant != PideVariant::raw)
                throw ConfigError("pide-feedback requires model.variant = raw");
            pg = positive_gain_design(rates, grid, trapezoid(c, grid.da()));
            pg.delta = cfg.delta;
            latch = std::make_shared<SwitchOffLatch>(cfg.delta);
            policy = make_pide_closed_loop_policy(rates, pg, grid, latch);
        } else if (cfg.controller == "ode-feedback") {
            throw ConfigError("ode-feedback controller requires model.kind = ode");
        }
        if (scheme.variant == PideVariant::raw) init = to_raw(init, c);
        else if (scheme.variant == PideVariant::homogeneous) init = shift_to_homogeneous(init);

        Trajectory traj = simulate(init, policy, scheme, rates, c);
        rep.converged = traj.total_I.back() < cfg.delta;
        rep.final_total_I = traj.total_I.back();
        rep.diagnostics = traj.violations;

        detail::write_field_csv(out("S.csv"), traj.snapshots, grid, 0, rep);
        detail::write_field_csv(out("I.csv"), traj.snapshots, grid, 1, rep);
        detail::write_field_csv(out("R.csv"), traj.snapshots, grid, 2, rep);
        detail::write_summary_csv(out("summary.csv"), traj, rep);
        detail::write_theta_csv(out("theta.csv"), traj, grid, rep);
    }

    rep.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t_start).count();
    CsvWriter wr(out("report.csv"), {"R0", "is_dfe_stable", "converged", "final_total_I", "wall_ms"});
    wr.row(std::vector<double>{rep.R0, rep.classification == "DFE-stable" ? 1.0 : 0.0,
                               rep.converged ? 1.0 : 0.0, rep.final_total_I, rep.wall_ms});
    rep.files.push_back(out("report.csv"));
    return rep;
}

/** Named presets that reproduce the reference experiments. */
inline ScenarioConfig figure_preset(int figure) {
    ScenarioConfig c;
    switch (figure) {
        case 2: // open-loop PIDE, subcritical
            c.model = "pide"; c.variant = "normalized"; c.beta0 = 600.0;
            break;
        case 3: // open-loop PIDE, supercritical
            c.model = "pide"; c.variant = "normalized"; c.beta0 = 800.0;
            break;
        case 4: case 5: case 6: // NODE closed loop (i, s, theta views of one run)
            c.model = "ode"; c.beta0 = 800.0; c.n_classes = 100;
            c.controller = "ode-feedback"; c.r1 = 200.0; c.r2 = 80.0; c.delta = 1e-10;
            c.T = 2.0; c.rel_tol = 1e-8;
            break;
        case 7: case 8: case 9: // PIDE closed loop, positive gain design
            c.model = "pide"; c.variant = "raw"; c.beta0 = 800.0;
            c.controller = "pide-feedback"; c.delta = 1e-6;
            c.dt = 1e-4; c.T = 1.0;
            break;
        default:
            throw ConfigError("reproduce-figure: figure must be in 2..9");
    }
    c.output_dir = "out/figure" + std::to_string(figure);
    return c;
}

} // namespace agesir

#endif
