#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "taxisim/fluid.hpp"
#include "taxisim/grid.hpp"
#include "taxisim/operators.hpp"

using namespace taxisim;

namespace {

constexpr double kPi = std::numbers::pi;

/// Discretely divergence-free vortex from a node-based streamfunction;
/// max |u| is roughly amp. The sin^2 profile also vanishes tangentially at
/// the walls, so the initial data is compatible with no-slip.
MacVelocity vortex(const GridSpec& g, double amp) {
    auto psi = [&](int i, int j) {
        const double sx = std::sin(kPi * g.xf(i) / g.lx);
        const double sy = std::sin(kPi * g.yf(j) / g.ly);
        return amp / kPi * sx * sx * sy * sy;
    };
    MacVelocity u(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i)
            u.u(i, j) = (psi(i, j + 1) - psi(i, j)) / g.dy;
    for (int j = 0; j <= g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            u.v(i, j) = -(psi(i + 1, j) - psi(i, j)) / g.dx;
    u.clamp_boundary();
    return u;
}

double max_change(const MacVelocity& a, const MacVelocity& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.udata().size(); ++k)
        m = std::max(m, std::abs(a.udata()[k] - b.udata()[k]));
    for (std::size_t k = 0; k < a.vdata().size(); ++k)
        m = std::max(m, std::abs(a.vdata()[k] - b.vdata()[k]));
    return m;
}

bool no_slip_exact(const MacVelocity& u) {
    const GridSpec& g = u.grid();
    for (int j = 0; j < g.ny; ++j)
        if (u.u(0, j) != 0.0 || u.u(g.nx, j) != 0.0) return false;
    for (int i = 0; i < g.nx; ++i)
        if (u.v(i, 0) != 0.0 || u.v(i, g.ny) != 0.0) return false;
    return true;
}

} // namespace

TEST_CASE("pressure poisson solve") {
    SECTION("zero rhs gives zero pressure") {
        GridSpec g(32, 32, 1.0, 1.0);
        ScalarField rhs(g, 0.0);
        ScalarField p = pressure_poisson(rhs, 1e-10);
        CHECK(max_abs_interior(p) == 0.0);
    }

    SECTION("manufactured solution cos(pi x)cos(pi y) at second order") {
        auto l2_err = [](int n) {
            GridSpec g(n, n, 1.0, 1.0);
            ScalarField rhs(g);
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i)
                    rhs(i, j) = -2.0 * kPi * kPi * std::cos(kPi * g.xc(i)) * std::cos(kPi * g.yc(j));
            PoissonInfo info;
            ScalarField p = pressure_poisson(rhs, 1e-12, &info);
            CHECK(info.rel_residual <= 1e-12);
            double acc = 0.0;
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i) {
                    const double d = p(i, j) - std::cos(kPi * g.xc(i)) * std::cos(kPi * g.yc(j));
                    acc += d * d;
                }
            return std::sqrt(acc * g.cell_volume());
        };
        const double e32 = l2_err(32), e64 = l2_err(64);
        INFO("L2 errors " << e32 << " -> " << e64);
        CHECK(std::log2(e32 / e64) >= 1.9);
    }

    SECTION("incompatible rhs has its mean removed and reported") {
        GridSpec g(16, 16, 1.0, 1.0);
        ScalarField rhs(g, 0.1);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i)
                rhs(i, j) += std::cos(kPi * g.xc(i));
        PoissonInfo info;
        ScalarField p = pressure_poisson(rhs, 1e-10, &info);
        CHECK(info.removed_mean == Catch::Approx(0.1).margin(1e-12));
        CHECK(info.rel_residual <= 1e-10);
        // gauge: mean-zero result
        CHECK(std::abs(integrate(p)) <= 1e-10 * g.area());
    }
}

TEST_CASE("advance_u") {
    SECTION("rest state with no forcing stays exactly at rest") {
        GridSpec g(32, 32, 1.0, 1.0);
        MacVelocity u(g);
        ScalarField n(g, 1.0);
        fill_ghost_neumann_inplace(n);
        FluidParams params = FluidParams::make(FluidMode::navier_stokes, ScalarField(g, 0.0));
        FluidStepResult r = advance_u(u, n, params, 1e-3);
        CHECK(r.u.max_face_speed() == 0.0);
        CHECK(max_abs_interior(r.pressure) == 0.0);
    }

    SECTION("gradient forcing is absorbed by the pressure: u stays zero") {
        GridSpec g(64, 64, 1.0, 1.0);
        MacVelocity u(g);
        ScalarField n(g, 2.0);
        fill_ghost_neumann_inplace(n);
        ScalarField phi(g);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i)
                phi(i, j) = 0.3 * g.yc(j);
        FluidParams params = FluidParams::make(FluidMode::navier_stokes, phi, 1e-12);
        FluidStepResult r = advance_u(u, n, params, 1e-4);
        INFO("max |u| = " << r.u.max_face_speed());
        CHECK(r.u.max_face_speed() <= 1e-10);
    }

    SECTION("mode none short-circuits to the zero object") {
        GridSpec g(16, 16, 1.0, 1.0);
        MacVelocity u = vortex(g, 0.5);
        ScalarField n(g, 1.0);
        FluidParams params = FluidParams::make(FluidMode::none, ScalarField());
        FluidStepResult r = advance_u(u, n, params, 1e-3);
        CHECK(r.u.max_face_speed() == 0.0);
    }

    SECTION("poisson_tol outside (0, 1e-6] is rejected") {
        GridSpec g(8, 8, 1.0, 1.0);
        CHECK_THROWS_AS(FluidParams::make(FluidMode::none, ScalarField(), 1e-3), sim_error);
        CHECK_THROWS_AS(FluidParams::make(FluidMode::none, ScalarField(), 0.0), sim_error);
    }
}

TEST_CASE("taylor-green vortex: energy decays and the discrete balance closes") {
    GridSpec g(128, 128, 1.0, 1.0);
    MacVelocity u = vortex(g, 1.0);
    ScalarField n(g, 0.0);
    fill_ghost_neumann_inplace(n);
    FluidParams params = FluidParams::make(FluidMode::navier_stokes, ScalarField(g, 0.0), 1e-10);
    FluidWorkspace ws;

    const double dt = 0.5 * g.dx * g.dx / 4.0;
    const int steps = 50;
    std::vector<double> ke(steps + 1), diss(steps + 1);
    ke[0] = kinetic_energy(u);
    diss[0] = mac_dirichlet_energy(u);
    for (int s = 0; s < steps; ++s) {
        FluidStepResult r = advance_u(u, n, params, dt, &ws);
        u = r.u;
        ke[s + 1] = kinetic_energy(u);
        diss[s + 1] = mac_dirichlet_energy(u);
        CHECK(no_slip_exact(u));
    }

    double max_rel_defect = 0.0;
    for (int s = 0; s < steps; ++s) {
        CHECK(ke[s + 1] <= ke[s] * (1.0 + 1e-14));
        const double rate = (ke[s + 1] - ke[s]) / dt;
        const double d_mid = 0.5 * (diss[s] + diss[s + 1]);
        const double defect = std::abs(rate + d_mid);
        max_rel_defect = std::max(max_rel_defect, defect / std::max(std::abs(rate), d_mid));
    }
    INFO("max relative defect of d/dt KE = -dissipation: " << max_rel_defect);
    CHECK(max_rel_defect <= 0.02);
}

TEST_CASE("interpolate_to_cells") {
    GridSpec g(32, 32, 1.0, 1.0);

    SECTION("constant face velocity maps to the same cell values") {
        MacVelocity u(g);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i <= g.nx; ++i)
                u.u(i, j) = 1.0;
        CellVector c = interpolate_to_cells(u);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                CHECK(c.x(i, j) == 1.0);
                CHECK(c.y(i, j) == 0.0);
            }
    }

    SECTION("linear shear is reproduced at cell centers") {
        MacVelocity u(g);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i <= g.nx; ++i)
                u.u(i, j) = g.yc(j);
        CellVector c = interpolate_to_cells(u);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i)
                CHECK(c.x(i, j) == Catch::Approx(g.yc(j)).margin(1e-14));
    }

    SECTION("cell interpolation does not create kinetic energy") {
        std::mt19937 rng(17);
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        MacVelocity u(g);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 1; i < g.nx; ++i)
                u.u(i, j) = dist(rng);
        for (int j = 1; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i)
                u.v(i, j) = dist(rng);
        double face_ke = 0.0;
        for (double v : u.udata()) face_ke += 0.5 * v * v;
        for (double v : u.vdata()) face_ke += 0.5 * v * v;
        face_ke *= g.cell_volume();
        CHECK(kinetic_energy(u) <= face_ke * (1.0 + 1e-12));
    }
}

TEST_CASE("projection") {
    GridSpec g(64, 64, 1.0, 1.0);

    SECTION("a streamfunction vortex is already discretely divergence-free") {
        MacVelocity u = vortex(g, 1.0);
        ScalarField div = mac_divergence(u);
        CHECK(max_abs_interior(div) <= 1e-12);
    }

    SECTION("projecting a divergence-free field is idempotent to solver tolerance") {
        MacVelocity u = vortex(g, 1.0);
        MacVelocity pu = project_div_free(u, 1e-10);
        CHECK(max_change(u, pu) <= 10.0 * 1e-10);
    }

    SECTION("projection kills the gradient part of a perturbed field") {
        MacVelocity u = vortex(g, 1.0);
        ScalarField q(g);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i)
                q(i, j) = 0.2 * std::cos(kPi * g.xc(i)) * std::cos(2 * kPi * g.yc(j));
        fill_ghost_neumann_inplace(q);
        MacVelocity dirty = u;
        for (int j = 0; j < g.ny; ++j)
            for (int i = 1; i < g.nx; ++i)
                dirty.u(i, j) += (q(i, j) - q(i - 1, j)) / g.dx;
        for (int j = 1; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i)
                dirty.v(i, j) += (q(i, j) - q(i, j - 1)) / g.dy;
        MacVelocity cleaned = project_div_free(dirty, 1e-12);
        INFO("residual distance to the divergence-free part: " << max_change(u, cleaned));
        CHECK(max_change(u, cleaned) <= 1e-8);
        CHECK(max_abs_interior(mac_divergence(cleaned)) <= 1e-8);
    }
}

TEST_CASE("viscosity treatments") {
    GridSpec g(48, 48, 1.0, 1.0);
    ScalarField n(g, 0.0);
    fill_ghost_neumann_inplace(n);

    SECTION("implicit and explicit agree to O(dt^2) on one step") {
        MacVelocity u = vortex(g, 1.0);
        const double dt = 1e-6;
        FluidParams pe = FluidParams::make(FluidMode::stokes, ScalarField(g, 0.0), 1e-12, false);
        FluidParams pi = FluidParams::make(FluidMode::stokes, ScalarField(g, 0.0), 1e-12, true);
        MacVelocity ue = advance_u(u, n, pe, dt).u;
        MacVelocity ui = advance_u(u, n, pi, dt).u;
        CHECK(max_change(ue, ui) <= 1e-8);
    }

    SECTION("implicit viscosity is stable far beyond the explicit limit") {
        MacVelocity u = vortex(g, 1.0);
        FluidParams pi = FluidParams::make(FluidMode::navier_stokes, ScalarField(g, 0.0), 1e-10, true);
        FluidWorkspace ws;
        const double dt = 10.0 * g.dx * g.dx / 4.0;
        double ke = kinetic_energy(u);
        for (int s = 0; s < 20; ++s) {
            u = advance_u(u, n, pi, dt, &ws).u;
            const double ke_new = kinetic_energy(u);
            CHECK(ke_new <= ke * (1.0 + 1e-12));
            ke = ke_new;
            CHECK(no_slip_exact(u));
        }
    }

    SECTION("stokes mode drops the advective term") {
        // an asymmetric vortex pair so (u . grad) u is appreciably nonzero
        MacVelocity u = vortex(g, 1.0);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 1; i < g.nx; ++i)
                u.u(i, j) += 0.3 * std::sin(2 * kPi * g.yc(j));
        u = project_div_free(u, 1e-12);
        const double dt = 1e-4;
        FluidParams ns = FluidParams::make(FluidMode::navier_stokes, ScalarField(g, 0.0), 1e-10);
        FluidParams st = FluidParams::make(FluidMode::stokes, ScalarField(g, 0.0), 1e-10);
        MacVelocity u_ns = advance_u(u, n, ns, dt).u;
        MacVelocity u_st = advance_u(u, n, st, dt).u;
        CHECK(max_change(u_ns, u_st) > 1e-7);
    }
}
