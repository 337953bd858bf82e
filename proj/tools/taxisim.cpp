// Command-line front end: run experiments, materialize presets, sweep the
// regularization family, run the oracle agreement suite and re-validate
// stored time series. Exit code 0 means every asserted margin passed.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "taxisim/taxisim.hpp"

namespace fs = std::filesystem;
using namespace taxisim;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string summary_text(const RunSummary& s, const ReportContext& ctx) {
    std::ostringstream out;
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    out << "accepted_steps " << s.accepted_steps << "\n"
        << "rejected_steps " << s.rejected_steps << "\n"
        << "final_t " << num(s.final_state.t) << "\n"
        << "final_checksum " << std::hex << s.final_checksum << std::dec << "\n"
        << "mass_rel_drift_max " << num(s.mass_rel_drift_max) << "\n"
        << "max_sup_c " << num(s.max_sup_c) << "\n"
        << "min_c " << num(s.min_c) << "\n"
        << "min_n " << num(s.min_n) << "\n"
        << "min_quasi_margin " << num(s.min_quasi_margin) << "\n"
        << "min_margin_plus_slack " << num(s.min_margin_plus_slack) << "\n"
        << "min_ck_margin " << num(s.min_ck_margin) << "\n"
        << "uniform_int_time_integral " << num(s.uniform_int_time_integral) << "\n"
        << "final_sup_d2_n " << num(s.final_sup_d2_n) << "\n"
        << "final_sup_d2_c " << num(s.final_sup_d2_c) << "\n";
    if (s.eta0) out << "eta0 " << num(*s.eta0) << "\n";
    if (s.t0_conditional)
        out << "t0_conditional " << num(*s.t0_conditional) << "\n"
            << "cond_at_t0 " << num(s.cond_at_t0) << "\n"
            << "max_cond_after_t0 " << num(s.max_cond_after_t0) << "\n";
    if (s.stabilization_time) out << "stabilization_time " << num(*s.stabilization_time) << "\n";
    if (s.aborted) out << "aborted " << s.abort_reason << "\n";
    out << "c0_inf " << num(ctx.c0_inf) << "\n";
    return out.str();
}

/// Margins that gate the exit code of `run` / `preset`.
bool margins_pass(const RunSummary& s, const ReportContext& ctx) {
    bool ok = !s.aborted;
    ok = ok && s.mass_rel_drift_max <= 1e-8;
    ok = ok && s.max_sup_c <= ctx.c0_inf * (1.0 + 1e-12);
    ok = ok && s.min_c > 0.0;
    ok = ok && s.min_n >= 0.0;
    ok = ok && (s.accepted_steps == 0 || s.min_margin_plus_slack >= 0.0);
    ok = ok && s.min_ck_margin >= -1e-10;
    if (s.t0_conditional && s.eta0 && s.accepted_steps > 0)
        ok = ok && s.max_cond_after_t0 <= s.cond_at_t0 + 1e-3 * *s.eta0;
    return ok;
}

int execute_run(const SimConfig& cfg, const std::string& outdir) {
    Simulation sim(cfg);
    RunSummary s = sim.run();
    const ReportContext& ctx = sim.context();
    if (!outdir.empty()) {
        fs::create_directories(outdir);
        emit_timeseries(s.reports, (fs::path(outdir) / "timeseries.csv").string());
        std::ofstream((fs::path(outdir) / "config.ini").string()) << serialize_config(cfg);
        std::ofstream((fs::path(outdir) / "summary.txt").string()) << summary_text(s, ctx);
        const double n_hi = std::max(max_interior(s.final_state.n), 1e-12);
        emit_heatmap(s.final_state.n, (fs::path(outdir) / "final_n.pgm").string(), 0.0, n_hi);
        const double c_hi = std::max(ctx.c0_inf, 1e-12);
        emit_heatmap(s.final_state.c, (fs::path(outdir) / "final_c.pgm").string(), 0.0, c_hi);
    }
    std::cout << summary_text(s, ctx);
    const bool ok = margins_pass(s, ctx);
    std::cout << (ok ? "margins: PASS" : "margins: FAIL") << "\n";
    std::cerr << "wall time " << s.wall_time_s << " s\n";
    return ok ? 0 : 1;
}

int execute_family(const SimConfig& cfg, const std::vector<double>& eps_list,
                   const std::string& outdir) {
    EpsilonFamilyTable t = epsilon_family(cfg, eps_list);
    std::ostringstream out;
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    out << "eps_hi,eps_lo,dist_n,dist_c,dist_u,failed\n";
    bool ok = true;
    for (std::size_t k = 0; k < t.rows.size(); ++k) {
        const auto& r = t.rows[k];
        out << num(r.eps_hi) << "," << num(r.eps_lo) << "," << num(r.dist_n) << ","
            << num(r.dist_c) << "," << num(r.dist_u) << "," << (r.failed ? 1 : 0) << "\n";
        ok = ok && !r.failed;
        if (k > 0 && !(t.rows[k - 1].dist_n > r.dist_n)) ok = false;  // must shrink with eps
    }
    // the conserved mass must not depend on eps
    for (std::size_t j = 1; j < t.mass_traces.size() && ok; ++j) {
        if (t.mass_traces[j].size() != t.mass_traces[0].size()) ok = false;
        for (std::size_t k = 0; ok && k < t.mass_traces[j].size(); ++k)
            if (std::abs(t.mass_traces[j][k] - t.mass_traces[0][k]) > 1e-12) ok = false;
    }
    std::cout << out.str();
    if (!outdir.empty()) {
        fs::create_directories(outdir);
        std::ofstream((fs::path(outdir) / "epsilon_family.csv").string()) << out.str();
    }
    std::cout << (ok ? "margins: PASS" : "margins: FAIL") << "\n";
    return ok ? 0 : 1;
}

int execute_oracle(const SimConfig& cfg) {
    // independent quadrature agreement on random small states
    GridSpec g(8, 8, 1.0, 1.0);
    ReportContext ctx;
    ctx.chi = cfg.chi;
    ctx.n_bar0 = 1.0;
    ctx.c0_inf = 1.0;
    ctx.f = cfg.sensitivity;
    if (cfg.sensitivity.superlinear_at_zero())
        ctx.cond = conditional_parameters(g, cfg.chi, 1.0, 1.0, cfg.sensitivity, 0.1);
    std::mt19937 rng(cfg.seed);
    std::uniform_real_distribution<double> dn(0.0, 2.0), dc(0.05, 1.0), du(-0.5, 0.5);
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        ScalarField n(g), c(g);
        MacVelocity u(g);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                n(i, j) = dn(rng);
                c(i, j) = dc(rng);
            }
        fill_ghost_neumann_inplace(n);
        fill_ghost_neumann_inplace(c);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 1; i < g.nx; ++i)
                u.u(i, j) = du(rng);
        for (int j = 1; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i)
                u.v(i, j) = du(rng);
        FunctionalReport a = evaluate_report(n, c, u, 0.0, ctx);
        FunctionalReport b = oracle::brute_force_report(n, c, u, ctx);
        const auto va = detail::report_values(a), vb = detail::report_values(b);
        for (std::size_t k = 0; k < va.size(); ++k) {
            if (std::isnan(va[k]) && std::isnan(vb[k])) continue;
            const double d =
                std::abs(va[k] - vb[k]) / std::max({std::abs(va[k]), std::abs(vb[k]), 1.0});
            if (d > worst) worst = d;
        }
    }
    std::cout << "oracle agreement: worst relative disagreement " << worst << "\n";

    // homogeneous reduction against the ode reference
    SimConfig hom = cfg;
    hom.grid = GridSpec(8, 8, 1.0, 1.0);
    hom.fluid_mode = FluidMode::none;
    hom.init.n_kind = InitSpec::Scalar::constant;
    hom.init.n_mean = 1.0;
    hom.init.c_kind = InitSpec::Scalar::constant;
    hom.init.c_mean = 1.0;
    hom.init.u_kind = InitSpec::Velocity::none;
    hom.init.phi_kind = InitSpec::Potential::none;
    hom.diffusion = DiffusionMode::implicit_euler;
    hom.dt_max = 1e-3;
    hom.t_end = 1.0;
    hom.conditional = false;
    hom.report_every = 1000;
    RunSummary s = run(hom);
    const double exact = oracle::homogeneous_ode(1.0, 1.0, cfg.sensitivity, 1.0);
    const double got = s.final_state.c(4, 4);
    const double ode_err = std::abs(got - exact) / exact;
    std::cout << "homogeneous run vs ode: relative error " << ode_err << "\n";

    const bool ok = worst <= 1e-12 && ode_err <= 1e-4;
    std::cout << (ok ? "margins: PASS" : "margins: FAIL") << "\n";
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"finite-volume chemotaxis-fluid simulator with inequality diagnostics"};
    app.require_subcommand(1);

    std::string config_path, outdir, preset_name, csv_path, eps_csv;
    bool print_only = false;

    auto* cmd_run = app.add_subcommand("run", "run a configuration file");
    cmd_run->add_option("config", config_path, "path to a config file")->required();
    cmd_run->add_option("--out", outdir, "directory for emitted artifacts");

    auto* cmd_preset = app.add_subcommand("preset", "run (or print) a named experiment preset");
    cmd_preset->add_option("name", preset_name, "preset name")->required();
    cmd_preset->add_option("--out", outdir, "directory for emitted artifacts");
    cmd_preset->add_flag("--print", print_only, "print the resolved config instead of running");

    auto* cmd_sweep = app.add_subcommand("sweep-eps", "regularization-family sweep");
    cmd_sweep->add_option("config", config_path, "path to a config file")->required();
    cmd_sweep->add_option("--eps", eps_csv, "comma-separated eps values, non-increasing")
        ->required();
    cmd_sweep->add_option("--out", outdir, "directory for emitted artifacts");

    auto* cmd_oracle = app.add_subcommand("oracle", "run the oracle agreement suite");
    cmd_oracle->add_option("config", config_path, "path to a config file")->required();

    auto* cmd_check = app.add_subcommand("check", "re-validate margins of a stored time series");
    cmd_check->add_option("csv", csv_path, "timeseries.csv produced by run/preset")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_run->parsed()) return execute_run(parse_config(read_file(config_path)), outdir);
        if (cmd_preset->parsed()) {
            SimConfig cfg = preset(preset_name);
            if (print_only) {
                std::cout << serialize_config(cfg);
                return 0;
            }
            if (!cfg.eps_list.empty()) return execute_family(cfg, cfg.eps_list, outdir);
            return execute_run(cfg, outdir);
        }
        if (cmd_sweep->parsed()) {
            SimConfig cfg = parse_config(read_file(config_path));
            std::vector<double> eps;
            for (const std::string& tok : detail::split(eps_csv, ','))
                eps.push_back(std::stod(tok));
            return execute_family(cfg, eps, outdir);
        }
        if (cmd_oracle->parsed()) return execute_oracle(parse_config(read_file(config_path)));
        if (cmd_check->parsed()) {
            CheckResult res = check_timeseries(parse_timeseries(csv_path));
            for (const std::string& f : res.failures) std::cout << "FAIL " << f << "\n";
            std::cout << (res.ok ? "margins: PASS" : "margins: FAIL") << "\n";
            return res.ok ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
