#pragma once

#include <cmath>

#include "taxisim/driver.hpp"
#include "taxisim/functionals.hpp"
#include "taxisim/grid.hpp"
#include "taxisim/sensitivity.hpp"

// Reference implementations kept deliberately naive: plain nested loops and
// left-to-right sums, sharing no quadrature or stencil code with the main
// path. Their only job is to disagree loudly when the main path drifts.
namespace taxisim::oracle {

/// Oxygen value at time t for spatially homogeneous states, c' = -n f(c).
/// Closed forms for the power laws p = 1, 2; otherwise a classical 4-stage
/// one-step integration at reference resolution.
inline double homogeneous_ode(double n_bar, double c0, const SensitivitySpec& f, double t) {
    if (!(n_bar >= 0.0) || !(c0 > 0.0)) throw sim_error("homogeneous_ode: need n >= 0, c0 > 0");
    if (n_bar == 0.0 || t == 0.0) return c0;
    if (f.kind() == SensitivitySpec::Kind::power && f.exponent() == 2.0)
        return c0 / (1.0 + n_bar * c0 * t);
    if (f.kind() == SensitivitySpec::Kind::linear ||
        (f.kind() == SensitivitySpec::Kind::power && f.exponent() == 1.0))
        return c0 * std::exp(-n_bar * t);

    const double dt = 1e-6;
    auto rhs = [&](double c) { return -n_bar * f.f(std::max(c, 0.0)); };
    double c = c0;
    double s = 0.0;
    while (s < t) {
        const double h = std::min(dt, t - s);
        const double k1 = rhs(c);
        const double k2 = rhs(c + 0.5 * h * k1);
        const double k3 = rhs(c + 0.5 * h * k2);
        const double k4 = rhs(c + h * k3);
        c += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        s += h;
    }
    return c;
}

/// All per-state report entries recomputed naively. Cross-state fields
/// (rates, margins) stay zero, matching a first report.
inline FunctionalReport brute_force_report(const ScalarField& n, const ScalarField& c,
                                           const MacVelocity& u, const ReportContext& ctx) {
    const GridSpec& g = n.grid();
    const int nx = g.nx, ny = g.ny;
    const double vol = g.dx * g.dy;
    FunctionalReport r;

    // mirror-ghost accessors (index clamping reproduces the zero-flux rule)
    auto nat = [&](int i, int j) {
        i = i < 0 ? 0 : (i >= nx ? nx - 1 : i);
        j = j < 0 ? 0 : (j >= ny ? ny - 1 : j);
        return n(i, j);
    };
    auto wat = [&](int i, int j) {
        i = i < 0 ? 0 : (i >= nx ? nx - 1 : i);
        j = j < 0 ? 0 : (j >= ny ? ny - 1 : j);
        return -std::log(c(i, j) / ctx.c0_inf);
    };

    double mass = 0.0, entropy = 0.0, neglog = 0.0, wmass = 0.0, c2 = 0.0, rhs = 0.0;
    double uniform = 0.0, c1 = 0.0, dn1 = 0.0, dnsup = 0.0, supc = c(0, 0);
    int floored = 0;
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const double nv = n(i, j), cv = c(i, j);
            mass += nv * vol;
            if (nv > 0.0) entropy += nv * std::log(nv / ctx.n_bar0) * vol;
            if (nv < ctx.ln_floor) {
                neglog += -std::log(ctx.ln_floor) * vol;
                ++floored;
            } else {
                neglog += -std::log(nv) * vol;
            }
            wmass += -std::log(cv / ctx.c0_inf) * vol;
            c2 += cv * cv * vol;
            rhs += nv * ctx.f.ratio(cv) * vol;
            const double s = nv * ctx.f.f(cv);
            if (s > 0.0) uniform += s * std::abs(std::log(s)) * vol;
            c1 += cv * vol;
            dn1 += std::abs(nv - ctx.n_bar0) * vol;
            if (std::abs(nv - ctx.n_bar0) > dnsup) dnsup = std::abs(nv - ctx.n_bar0);
            if (cv > supc) supc = cv;
        }
    }
    r.mass_n = mass;
    r.sup_c = supc;
    r.entropy_n = entropy;
    r.neg_log_mass = neglog;
    r.w_mass = wmass;
    r.c_l2 = c2;
    r.quasi_energy_rhs = ctx.chi * ctx.chi * rhs;
    r.uniform_int = uniform;
    r.floored_cells = floored;
    r.c_l1 = c1;
    r.dist_n_l1 = dn1;
    r.dist_n_sup = dnsup;

    double fisher = 0.0, dw = 0.0, dc = 0.0;
    for (int j = 0; j < ny; ++j) {
        for (int i = 1; i < nx; ++i) {
            const double dnf = (n(i, j) - n(i - 1, j)) / g.dx;
            const double m = 0.5 * (n(i - 1, j) + n(i, j));
            if (m > ctx.ln_floor) fisher += dnf * dnf / (m * m) * vol;
            const double dwf = (wat(i, j) - wat(i - 1, j)) / g.dx;
            dw += dwf * dwf * vol;
            const double dcf = (c(i, j) - c(i - 1, j)) / g.dx;
            dc += dcf * dcf * vol;
        }
    }
    for (int j = 1; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const double dnf = (n(i, j) - n(i, j - 1)) / g.dy;
            const double m = 0.5 * (n(i, j - 1) + n(i, j));
            if (m > ctx.ln_floor) fisher += dnf * dnf / (m * m) * vol;
            const double dwf = (wat(i, j) - wat(i, j - 1)) / g.dy;
            dw += dwf * dwf * vol;
            const double dcf = (c(i, j) - c(i, j - 1)) / g.dy;
            dc += dcf * dcf * vol;
        }
    }
    r.fisher_n = fisher;
    r.dirichlet_w = dw;
    r.dirichlet_c = dc;

    double lw2 = 0.0;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const double lap = (wat(i - 1, j) - 2.0 * wat(i, j) + wat(i + 1, j)) / (g.dx * g.dx) +
                               (wat(i, j - 1) - 2.0 * wat(i, j) + wat(i, j + 1)) / (g.dy * g.dy);
            lw2 += lap * lap * vol;
        }
    r.lap_w_l2 = lw2;

    double kin = 0.0, u1 = 0.0;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const double ux = 0.5 * (u.u(i, j) + u.u(i + 1, j));
            const double uy = 0.5 * (u.v(i, j) + u.v(i, j + 1));
            kin += 0.5 * (ux * ux + uy * uy) * vol;
            u1 += std::hypot(ux, uy) * vol;
        }
    r.kinetic = kin;
    r.u_l1 = u1;

    double du = 0.0;
    for (int j = 0; j < ny; ++j)
        for (int i = 1; i < nx; ++i) {
            const double cval = u.u(i, j);
            const double yl = (j > 0) ? u.u(i, j - 1) : -cval;
            const double yr = (j < ny - 1) ? u.u(i, j + 1) : -cval;
            const double lap = (u.u(i - 1, j) - 2.0 * cval + u.u(i + 1, j)) / (g.dx * g.dx) +
                               (yl - 2.0 * cval + yr) / (g.dy * g.dy);
            du += -cval * lap * vol;
        }
    for (int j = 1; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const double cval = u.v(i, j);
            const double xl = (i > 0) ? u.v(i - 1, j) : -cval;
            const double xr = (i < nx - 1) ? u.v(i + 1, j) : -cval;
            const double lap = (xl - 2.0 * cval + xr) / (g.dx * g.dx) +
                               (u.v(i, j - 1) - 2.0 * cval + u.v(i, j + 1)) / (g.dy * g.dy);
            du += -cval * lap * vol;
        }
    r.dirichlet_u = du;

    // csiszar margin and the functional-inequality ratio for n
    {
        const double mean = mass / g.area();
        double ent_own = 0.0, l1 = 0.0, relgrad = 0.0;
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                if (n(i, j) > 0.0) ent_own += n(i, j) * std::log(n(i, j) / mean) * vol;
                l1 += std::abs(n(i, j) - mean) * vol;
            }
        for (int j = 0; j < ny; ++j)
            for (int i = 1; i < nx; ++i) {
                const double d = (n(i, j) - n(i - 1, j)) / g.dx;
                const double m = 0.5 * (n(i - 1, j) + n(i, j));
                if (m > 0.0) relgrad += d * d / (m * m) * vol;
            }
        for (int j = 1; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const double d = (n(i, j) - n(i, j - 1)) / g.dy;
                const double m = 0.5 * (n(i, j - 1) + n(i, j));
                if (m > 0.0) relgrad += d * d / (m * m) * vol;
            }
        r.ck_margin = 2.0 * mass * ent_own - l1 * l1;
        r.heihoff_ratio = ent_own > 0.0 ? mass * relgrad / ent_own : 0.0;
    }

    if (ctx.cond)
        r.cond_F = r.entropy_n + 0.5 * ctx.cond->K * r.dirichlet_w + r.kinetic / ctx.cond->L +
                   0.5 * ctx.cond->M * r.c_l2;
    else
        r.cond_F = std::numeric_limits<double>::quiet_NaN();
    return r;
}

/// Block-average a fine field onto a coarser grid (exact for cell averages).
inline ScalarField restrict_to(const ScalarField& fine, const GridSpec& coarse) {
    const GridSpec& gf = fine.grid();
    if (gf.nx % coarse.nx != 0 || gf.ny % coarse.ny != 0)
        throw sim_error("restrict_to: grids are not nested");
    const int rx = gf.nx / coarse.nx, ry = gf.ny / coarse.ny;
    ScalarField out(coarse);
    for (int j = 0; j < coarse.ny; ++j)
        for (int i = 0; i < coarse.nx; ++i) {
            double acc = 0.0;
            for (int jj = 0; jj < ry; ++jj)
                for (int ii = 0; ii < rx; ++ii)
                    acc += fine(i * rx + ii, j * ry + jj);
            out(i, j) = acc / (rx * ry);
        }
    fill_ghost_neumann_inplace(out);
    return out;
}

/// Same physics on a refine_factor-times finer grid; the result serves as a
/// reference trajectory for convergence-order assertions.
inline RunSummary fine_grid_reference(const SimConfig& cfg, int refine_factor) {
    if (refine_factor != 2 && refine_factor != 4)
        throw sim_error("fine_grid_reference: refine_factor must be 2 or 4");
    SimConfig fine = cfg;
    fine.grid = GridSpec(cfg.grid.nx * refine_factor, cfg.grid.ny * refine_factor, cfg.grid.lx,
                         cfg.grid.ly);
    return run(fine);
}

/// L1 distance between a run's final n and the restricted final n of the
/// refined reference.
inline double fine_grid_distance_n(const SimConfig& cfg, int refine_factor) {
    RunSummary coarse = run(cfg);
    RunSummary fine = fine_grid_reference(cfg, refine_factor);
    ScalarField restricted = restrict_to(fine.final_state.n, cfg.grid);
    const GridSpec& g = cfg.grid;
    double acc = 0.0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            acc += std::abs(coarse.final_state.n(i, j) - restricted(i, j)) * g.dx * g.dy;
    return acc;
}

} // namespace taxisim::oracle
