#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "taxisim/driver.hpp"
#include "taxisim/functionals.hpp"
#include "taxisim/oracle.hpp"

using namespace taxisim;

namespace {

double rel_diff(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0}); }

} // namespace

TEST_CASE("homogeneous ode reference") {
    SECTION("no bacteria, no consumption") {
        CHECK(oracle::homogeneous_ode(0.0, 0.7, SensitivitySpec::power(2.0, 1.0), 5.0) == 0.7);
    }

    SECTION("quadratic consumption: separation of variables") {
        CHECK(oracle::homogeneous_ode(1.0, 1.0, SensitivitySpec::power(2.0, 1.0), 1.0) ==
              Catch::Approx(0.5).epsilon(1e-14));
    }

    SECTION("linear consumption: exponential decay") {
        CHECK(oracle::homogeneous_ode(1.0, 1.0, SensitivitySpec::power(1.0, 1.0), 1.0) ==
              Catch::Approx(std::exp(-1.0)).epsilon(1e-14));
        CHECK(oracle::homogeneous_ode(1.0, 1.0, SensitivitySpec::linear(1.0), 1.0) ==
              Catch::Approx(std::exp(-1.0)).epsilon(1e-14));
    }

    SECTION("generic f falls back to the reference integrator") {
        // c' = -c^3 has the closed form c0 / sqrt(1 + 2 c0^2 t)
        const double got = oracle::homogeneous_ode(1.0, 1.0, SensitivitySpec::power(3.0, 1.0), 0.5);
        CHECK(got == Catch::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-10));
    }
}

TEST_CASE("brute-force quadratures agree with the diagnostics engine") {
    GridSpec g(8, 8, 1.0, 1.0);
    auto f = SensitivitySpec::power(2.0, 1.0);
    ReportContext ctx;
    ctx.chi = 1.3;
    ctx.n_bar0 = 1.0;
    ctx.c0_inf = 1.0;
    ctx.f = f;
    ctx.cond = conditional_parameters(g, 1.3, 1.0, 1.0, f, 0.1);

    std::mt19937 rng(4242);
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
        if (rep % 7 == 0) n(rep % g.nx, (3 * rep) % g.ny) = 0.0;  // exercise the ln floor
        fill_ghost_neumann_inplace(n);
        fill_ghost_neumann_inplace(c);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 1; i < g.nx; ++i)
                u.u(i, j) = du(rng);
        for (int j = 1; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i)
                u.v(i, j) = du(rng);

        FunctionalReport main = evaluate_report(n, c, u, 0.0, ctx);
        FunctionalReport ref = oracle::brute_force_report(n, c, u, ctx);

        const std::pair<const char*, std::pair<double, double>> entries[] = {
            {"mass_n", {main.mass_n, ref.mass_n}},
            {"sup_c", {main.sup_c, ref.sup_c}},
            {"entropy_n", {main.entropy_n, ref.entropy_n}},
            {"neg_log_mass", {main.neg_log_mass, ref.neg_log_mass}},
            {"w_mass", {main.w_mass, ref.w_mass}},
            {"fisher_n", {main.fisher_n, ref.fisher_n}},
            {"dirichlet_w", {main.dirichlet_w, ref.dirichlet_w}},
            {"kinetic", {main.kinetic, ref.kinetic}},
            {"dirichlet_u", {main.dirichlet_u, ref.dirichlet_u}},
            {"c_l2", {main.c_l2, ref.c_l2}},
            {"dirichlet_c", {main.dirichlet_c, ref.dirichlet_c}},
            {"lap_w_l2", {main.lap_w_l2, ref.lap_w_l2}},
            {"quasi_energy_rhs", {main.quasi_energy_rhs, ref.quasi_energy_rhs}},
            {"cond_F", {main.cond_F, ref.cond_F}},
            {"uniform_int", {main.uniform_int, ref.uniform_int}},
            {"ck_margin", {main.ck_margin, ref.ck_margin}},
            {"heihoff_ratio", {main.heihoff_ratio, ref.heihoff_ratio}},
            {"dist_n_l1", {main.dist_n_l1, ref.dist_n_l1}},
            {"dist_n_sup", {main.dist_n_sup, ref.dist_n_sup}},
            {"c_l1", {main.c_l1, ref.c_l1}},
            {"u_l1", {main.u_l1, ref.u_l1}},
            {"floored_cells", {main.floored_cells, ref.floored_cells}},
        };
        for (const auto& [name, vals] : entries) {
            const double d = rel_diff(vals.first, vals.second);
            worst = std::max(worst, d);
            INFO(name << ": main " << vals.first << " vs oracle " << vals.second);
            CHECK(d <= 1e-12);
        }
    }
    INFO("worst relative disagreement " << worst);
    CHECK(worst <= 1e-12);
}

TEST_CASE("brute force reproduces the two-valued closed form") {
    GridSpec g(8, 8, 1.0, 1.0);
    ScalarField n(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            n(i, j) = g.xc(i) < 0.5 ? 1.0 : 3.0;
    fill_ghost_neumann_inplace(n);
    ScalarField c(g, 1.0);
    fill_ghost_neumann_inplace(c);
    MacVelocity u(g);
    ReportContext ctx;
    ctx.n_bar0 = 2.0;
    ctx.c0_inf = 1.0;
    ctx.f = SensitivitySpec::power(2.0, 1.0);
    FunctionalReport ref = oracle::brute_force_report(n, c, u, ctx);
    CHECK(ref.entropy_n == Catch::Approx(0.5 * std::log(0.5) + 1.5 * std::log(1.5)).epsilon(1e-13));
    CHECK(ref.fisher_n > 0.0);

    ScalarField flat(g, 1.0);
    fill_ghost_neumann_inplace(flat);
    ReportContext ctx2 = ctx;
    ctx2.n_bar0 = 1.0;
    FunctionalReport r2 = oracle::brute_force_report(flat, c, u, ctx2);
    CHECK(r2.fisher_n == 0.0);
}

TEST_CASE("homogeneous simulator runs match the ode oracle") {
    SimConfig cfg;
    cfg.grid = GridSpec(8, 8, 1.0, 1.0);
    cfg.sensitivity = SensitivitySpec::power(2.0, 1.0);
    cfg.fluid_mode = FluidMode::none;
    cfg.init.n_kind = InitSpec::Scalar::constant;
    cfg.init.n_mean = 1.0;
    cfg.init.c_kind = InitSpec::Scalar::constant;
    cfg.init.c_mean = 1.0;
    cfg.init.u_kind = InitSpec::Velocity::none;
    cfg.init.phi_kind = InitSpec::Potential::none;
    cfg.diffusion = DiffusionMode::implicit_euler;
    cfg.dt_max = 1e-3;
    cfg.t_end = 1.0;
    cfg.report_every = 1000;
    RunSummary s = run(cfg);
    const double exact = oracle::homogeneous_ode(1.0, 1.0, cfg.sensitivity, 1.0);
    const double got = s.final_state.c(4, 4);
    INFO("simulated " << got << " vs ode " << exact);
    CHECK(rel_diff(got, exact) <= 1e-4);
}

TEST_CASE("fine-grid reference and first-order convergence") {
    SimConfig cfg;
    cfg.grid = GridSpec(32, 32, 1.0, 1.0);
    cfg.chi = 1.0;
    cfg.eps = 1e-3;
    cfg.sensitivity = SensitivitySpec::power(2.0, 1.0);
    cfg.fluid_mode = FluidMode::none;
    cfg.init.n_kind = InitSpec::Scalar::cosine;
    cfg.init.n_mean = 1.0;
    cfg.init.n_amp = 0.5;
    cfg.init.c_kind = InitSpec::Scalar::cosine;
    cfg.init.c_mean = 0.75;
    cfg.init.c_amp = 0.25;
    cfg.init.u_kind = InitSpec::Velocity::none;
    cfg.init.phi_kind = InitSpec::Potential::none;
    cfg.diffusion = DiffusionMode::implicit_euler;
    cfg.dt_max = 2.5e-4;
    cfg.t_end = 0.25;
    cfg.report_every = 1000;

    SECTION("homogeneous data: coarse and fine agree to round-off") {
        SimConfig flat = cfg;
        flat.init.n_kind = InitSpec::Scalar::constant;
        flat.init.c_kind = InitSpec::Scalar::constant;
        const double d = oracle::fine_grid_distance_n(flat, 2);
        CHECK(d <= 1e-12);
    }

    SECTION("refinement distances behave like a first-order method") {
        const double d2 = oracle::fine_grid_distance_n(cfg, 2);
        const double d4 = oracle::fine_grid_distance_n(cfg, 4);
        INFO("coarse-vs-fine " << d2 << ", coarse-vs-finer " << d4);
        CHECK(d2 > 0.0);
        CHECK(d4 >= d2);  // the finer reference exposes at least as much error

        SimConfig half = cfg;
        half.grid = GridSpec(64, 64, 1.0, 1.0);
        const double d2_half = oracle::fine_grid_distance_n(half, 2);
        const double order = std::log2(d2 / d2_half);
        INFO("distance halves as " << d2 << " -> " << d2_half << ", observed order " << order);
        CHECK(order >= 0.8);
        CHECK(d2 <= 2.0 * std::pow(2.0, 0.8) * d2_half);
    }
}
