#pragma once

#include <cmath>
#include <vector>

#include "taxisim/grid.hpp"
#include "taxisim/linsolve.hpp"
#include "taxisim/operators.hpp"
#include "taxisim/reduce.hpp"

namespace taxisim {

enum class FluidMode { navier_stokes, stokes, none };

/// Fluid configuration. `phi` is the gravitational potential driving the
/// buoyancy force n grad(phi); it must carry filled ghosts (use make()).
struct FluidParams {
    FluidMode mode = FluidMode::none;
    ScalarField phi;
    double poisson_tol = 1e-10;
    bool implicit_viscosity = false;

    static FluidParams make(FluidMode mode, ScalarField phi, double poisson_tol = 1e-10,
                            bool implicit_viscosity = false) {
        if (!(poisson_tol > 0.0) || poisson_tol > 1e-6)
            throw sim_error("fluid: poisson_tol must lie in (0, 1e-6]");
        FluidParams p;
        p.mode = mode;
        if (!phi.empty()) fill_ghost_neumann_inplace(phi);
        p.phi = std::move(phi);
        p.poisson_tol = poisson_tol;
        p.implicit_viscosity = implicit_viscosity;
        return p;
    }
};

struct FluidWorkspace {
    CgWorkspace cg;
    std::vector<double> warm_p, warm_ux, warm_uy;
};

struct FluidStepResult {
    MacVelocity u;
    ScalarField pressure;
    PoissonInfo poisson;
};

/// Discrete divergence of a MAC velocity at cell centers.
inline ScalarField mac_divergence(const MacVelocity& u) {
    const GridSpec& g = u.grid();
    ScalarField d(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            d(i, j) = (u.u(i + 1, j) - u.u(i, j)) / g.dx + (u.v(i, j + 1) - u.v(i, j)) / g.dy;
    return d;
}

/// Two-point face averages per component, exact for fields linear in the
/// staggered direction.
inline CellVector interpolate_to_cells(const MacVelocity& u) {
    const GridSpec& g = u.grid();
    CellVector out{ScalarField(g), ScalarField(g)};
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            out.x(i, j) = 0.5 * (u.u(i, j) + u.u(i + 1, j));
            out.y(i, j) = 0.5 * (u.v(i, j) + u.v(i, j + 1));
        }
    fill_ghost_neumann_inplace(out.x);
    fill_ghost_neumann_inplace(out.y);
    return out;
}

namespace detail {

// Viscous stencil on the ux grid. No-slip walls: the normal-boundary faces
// (i = 0, nx) hold zero, the tangential walls reflect (ghost = -value) so the
// wall-interpolated velocity vanishes.
inline double lap_ux(const MacVelocity& u, int i, int j) {
    const GridSpec& g = u.grid();
    const double c = u.u(i, j);
    const double xl = u.u(i - 1, j), xr = u.u(i + 1, j);
    const double yl = (j > 0) ? u.u(i, j - 1) : -c;
    const double yr = (j < g.ny - 1) ? u.u(i, j + 1) : -c;
    return (xl - 2.0 * c + xr) / (g.dx * g.dx) + (yl - 2.0 * c + yr) / (g.dy * g.dy);
}

inline double lap_uy(const MacVelocity& u, int i, int j) {
    const GridSpec& g = u.grid();
    const double c = u.v(i, j);
    const double yl = u.v(i, j - 1), yr = u.v(i, j + 1);
    const double xl = (i > 0) ? u.v(i - 1, j) : -c;
    const double xr = (i < g.nx - 1) ? u.v(i + 1, j) : -c;
    return (xl - 2.0 * c + xr) / (g.dx * g.dx) + (yl - 2.0 * c + yr) / (g.dy * g.dy);
}

/// Donor-cell advection term div(u x u) evaluated on interior faces.
/// x-momentum: u-fluxes at cell centers, v-fluxes at corners; corner fluxes on
/// the walls vanish with the no-slip normal velocity.
inline void mac_advection(const MacVelocity& u, FaceField& adv) {
    const GridSpec& g = u.grid();
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 1; i < g.nx; ++i) {
            double fc[2];
            for (int s = 0; s < 2; ++s) {
                const int ic = i - 1 + s;
                const double ucc = 0.5 * (u.u(ic, j) + u.u(ic + 1, j));
                fc[s] = ucc * (ucc > 0.0 ? u.u(ic, j) : u.u(ic + 1, j));
            }
            double gc[2];
            for (int s = 0; s < 2; ++s) {
                const int jc = j + s;  // corner rows j and j+1
                if (jc == 0 || jc == g.ny) {
                    gc[s] = 0.0;
                    continue;
                }
                const double vc = 0.5 * (u.v(i - 1, jc) + u.v(i, jc));
                gc[s] = vc * (vc > 0.0 ? u.u(i, jc - 1) : u.u(i, jc));
            }
            adv.fx(i, j) = (fc[1] - fc[0]) / g.dx + (gc[1] - gc[0]) / g.dy;
        }
    }
    for (int j = 1; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            double fc[2];
            for (int s = 0; s < 2; ++s) {
                const int jc = j - 1 + s;
                const double vcc = 0.5 * (u.v(i, jc) + u.v(i, jc + 1));
                fc[s] = vcc * (vcc > 0.0 ? u.v(i, jc) : u.v(i, jc + 1));
            }
            double gc[2];
            for (int s = 0; s < 2; ++s) {
                const int ic = i + s;  // corner columns i and i+1
                if (ic == 0 || ic == g.nx) {
                    gc[s] = 0.0;
                    continue;
                }
                const double uc = 0.5 * (u.u(ic, j - 1) + u.u(ic, j));
                gc[s] = uc * (uc > 0.0 ? u.v(ic - 1, j) : u.v(ic, j));
            }
            adv.fy(i, j) = (fc[1] - fc[0]) / g.dy + (gc[1] - gc[0]) / g.dx;
        }
    }
}

// Helmholtz (I - dt Lap) solves on the staggered component grids, interior
// unknowns only; boundary faces are no-slip zero Dirichlet data.
inline void apply_helmholtz_ux(const GridSpec& g, double dt, const std::vector<double>& x,
                               std::vector<double>& y) {
    const int nxi = g.nx - 1, ny = g.ny;
    const double ax = dt / (g.dx * g.dx), ay = dt / (g.dy * g.dy);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nxi; ++i) {
            const std::size_t k = static_cast<std::size_t>(j) * nxi + i;
            const double c = x[k];
            const double xl = (i > 0) ? x[k - 1] : 0.0;
            const double xr = (i < nxi - 1) ? x[k + 1] : 0.0;
            const double yl = (j > 0) ? x[k - nxi] : -c;
            const double yr = (j < ny - 1) ? x[k + nxi] : -c;
            y[k] = c - ax * (xl - 2.0 * c + xr) - ay * (yl - 2.0 * c + yr);
        }
    }
}

inline void apply_helmholtz_uy(const GridSpec& g, double dt, const std::vector<double>& x,
                               std::vector<double>& y) {
    const int nx = g.nx, nyi = g.ny - 1;
    const double ax = dt / (g.dx * g.dx), ay = dt / (g.dy * g.dy);
    for (int j = 0; j < nyi; ++j) {
        for (int i = 0; i < nx; ++i) {
            const std::size_t k = static_cast<std::size_t>(j) * nx + i;
            const double c = x[k];
            const double xl = (i > 0) ? x[k - 1] : -c;
            const double xr = (i < nx - 1) ? x[k + 1] : -c;
            const double yl = (j > 0) ? x[k - nx] : 0.0;
            const double yr = (j < nyi - 1) ? x[k + nx] : 0.0;
            y[k] = c - ax * (xl - 2.0 * c + xr) - ay * (yl - 2.0 * c + yr);
        }
    }
}

} // namespace detail

/// Buoyancy force n grad(phi) on interior faces (arithmetic face mean of n).
inline FaceField buoyancy_force(const ScalarField& n, const ScalarField& phi) {
    const GridSpec& g = n.grid();
    FaceField f(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 1; i < g.nx; ++i)
            f.fx(i, j) = 0.5 * (n(i - 1, j) + n(i, j)) * (phi(i, j) - phi(i - 1, j)) / g.dx;
    for (int j = 1; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            f.fy(i, j) = 0.5 * (n(i, j - 1) + n(i, j)) * (phi(i, j) - phi(i, j - 1)) / g.dy;
    return f;
}

/// Rate of work of the buoyancy force against the velocity, sum over faces.
inline double buoyancy_work(const ScalarField& n, const ScalarField& phi, const MacVelocity& u) {
    const GridSpec& g = n.grid();
    FaceField f = buoyancy_force(n, phi);
    std::vector<double> terms;
    terms.reserve(static_cast<std::size_t>(2 * g.nx) * g.ny);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 1; i < g.nx; ++i)
            terms.push_back(f.fx(i, j) * u.u(i, j));
    for (int j = 1; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            terms.push_back(f.fy(i, j) * u.v(i, j));
    return pairwise_sum(terms) * g.cell_volume();
}

/// Dirichlet energy of the velocity as the quadratic form -sum u . Lap(u) vol
/// of the discrete viscous operator; this is the dissipation rate appearing
/// in the semi-discrete kinetic energy balance.
inline double mac_dirichlet_energy(const MacVelocity& u) {
    const GridSpec& g = u.grid();
    std::vector<double> terms;
    terms.reserve(static_cast<std::size_t>(2 * g.nx) * g.ny);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 1; i < g.nx; ++i)
            terms.push_back(-u.u(i, j) * detail::lap_ux(u, i, j));
    for (int j = 1; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            terms.push_back(-u.v(i, j) * detail::lap_uy(u, i, j));
    return pairwise_sum(terms) * g.cell_volume();
}

/// Kinetic energy (1/2) int |u|^2 from the cell-interpolated velocity.
inline double kinetic_energy(const MacVelocity& u) {
    const GridSpec& g = u.grid();
    CellVector c = interpolate_to_cells(u);
    std::vector<double> cells(static_cast<std::size_t>(g.nx) * g.ny);
    std::size_t k = 0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            cells[k++] = 0.5 * (c.x(i, j) * c.x(i, j) + c.y(i, j) * c.y(i, j));
    return integrate_cells(g, cells);
}

/// Remove the discrete-divergence part of u (used on loaded initial data).
inline MacVelocity project_div_free(MacVelocity u, double tol, FluidWorkspace* ws = nullptr) {
    const GridSpec& g = u.grid();
    u.clamp_boundary();
    ScalarField rhs = mac_divergence(u);
    FluidWorkspace local;
    FluidWorkspace& w = ws ? *ws : local;
    ScalarField q = pressure_poisson(rhs, tol, nullptr, &w.cg, nullptr);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 1; i < g.nx; ++i)
            u.u(i, j) -= (q(i, j) - q(i - 1, j)) / g.dx;
    for (int j = 1; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            u.v(i, j) -= (q(i, j) - q(i, j - 1)) / g.dy;
    u.clamp_boundary();
    return u;
}

/// One momentum step with Chorin projection: explicit (or backward-Euler)
/// viscosity, donor-cell advection (dropped in stokes mode), buoyancy n
/// grad(phi), then a pure-Neumann pressure solve enforcing the discrete
/// divergence constraint. Boundary faces stay exactly zero throughout.
inline FluidStepResult advance_u(const MacVelocity& u, const ScalarField& n,
                                 const FluidParams& params, double dt,
                                 FluidWorkspace* ws = nullptr) {
    const GridSpec& g = u.grid();
    FluidStepResult out{MacVelocity(g), ScalarField(g, 0.0), {}};
    if (params.mode == FluidMode::none) return out;

    FluidWorkspace local;
    FluidWorkspace& w = ws ? *ws : local;

    FaceField adv(g);
    if (params.mode == FluidMode::navier_stokes) detail::mac_advection(u, adv);
    FaceField force = buoyancy_force(n, params.phi);

    MacVelocity star(g);
    if (params.implicit_viscosity) {
        // rhs = u + dt (force - adv), then (I - dt Lap) u* = rhs per component
        {
            const int nxi = g.nx - 1;
            std::vector<double> b(static_cast<std::size_t>(nxi) * g.ny);
            for (int j = 0; j < g.ny; ++j)
                for (int i = 1; i < g.nx; ++i)
                    b[static_cast<std::size_t>(j) * nxi + (i - 1)] =
                        u.u(i, j) + dt * (force.fx(i, j) - adv.fx(i, j));
            std::vector<double> x = (w.warm_ux.size() == b.size()) ? w.warm_ux : b;
            conjugate_gradient(
                [&](const std::vector<double>& in, std::vector<double>& outv) {
                    detail::apply_helmholtz_ux(g, dt, in, outv);
                },
                b, x, params.poisson_tol, 20 * (g.nx + g.ny) + 200, w.cg);
            w.warm_ux = x;
            for (int j = 0; j < g.ny; ++j)
                for (int i = 1; i < g.nx; ++i)
                    star.u(i, j) = x[static_cast<std::size_t>(j) * nxi + (i - 1)];
        }
        {
            const int nyi = g.ny - 1;
            std::vector<double> b(static_cast<std::size_t>(g.nx) * nyi);
            for (int j = 1; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i)
                    b[static_cast<std::size_t>(j - 1) * g.nx + i] =
                        u.v(i, j) + dt * (force.fy(i, j) - adv.fy(i, j));
            std::vector<double> x = (w.warm_uy.size() == b.size()) ? w.warm_uy : b;
            conjugate_gradient(
                [&](const std::vector<double>& in, std::vector<double>& outv) {
                    detail::apply_helmholtz_uy(g, dt, in, outv);
                },
                b, x, params.poisson_tol, 20 * (g.nx + g.ny) + 200, w.cg);
            w.warm_uy = x;
            for (int j = 1; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i)
                    star.v(i, j) = x[static_cast<std::size_t>(j - 1) * g.nx + i];
        }
    } else {
        for (int j = 0; j < g.ny; ++j)
            for (int i = 1; i < g.nx; ++i)
                star.u(i, j) =
                    u.u(i, j) + dt * (detail::lap_ux(u, i, j) - adv.fx(i, j) + force.fx(i, j));
        for (int j = 1; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i)
                star.v(i, j) =
                    u.v(i, j) + dt * (detail::lap_uy(u, i, j) - adv.fy(i, j) + force.fy(i, j));
    }
    star.clamp_boundary();

    ScalarField rhs = mac_divergence(star);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            rhs(i, j) /= dt;
    out.pressure = pressure_poisson(rhs, params.poisson_tol, &out.poisson, &w.cg, &w.warm_p);

    out.u = star;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 1; i < g.nx; ++i)
            out.u.u(i, j) -= dt * (out.pressure(i, j) - out.pressure(i - 1, j)) / g.dx;
    for (int j = 1; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            out.u.v(i, j) -= dt * (out.pressure(i, j) - out.pressure(i, j - 1)) / g.dy;
    out.u.clamp_boundary();
    return out;
}

} // namespace taxisim
