#pragma once

#include <cmath>
#include <string>

#include "taxisim/grid.hpp"
#include "taxisim/linsolve.hpp"
#include "taxisim/operators.hpp"
#include "taxisim/sensitivity.hpp"

namespace taxisim {

/// Taxis and consumption parameters for the two scalar species.
struct SpeciesParams {
    double chi = 1.0;     // taxis strength
    double eps = 0.0;     // saturation of the taxis response; 0 = classical mode
    double c0_inf = 1.0;  // sup bound carried by the initial oxygen field
    double delta = 1.0;   // positive lower bound of the initial oxygen field

    void validate() const {
        if (!(chi > 0.0)) throw sim_error("species: chi must be positive");
        if (!(eps >= 0.0)) throw sim_error("species: eps must be nonnegative");
        if (!(delta > 0.0))
            throw sim_error("species: delta must be positive (initial oxygen needs a "
                            "strictly positive lower bound)");
        if (!(c0_inf >= delta)) throw sim_error("species: c0_inf must be >= delta");
    }
};

/// A step produced an invalid state (negative density); the caller should
/// retry with a smaller time step.
struct step_rejected : sim_error {
    double suggested_dt;
    step_rejected(const std::string& what, double dt_next)
        : sim_error(what + "; suggested dt = " + std::to_string(dt_next)),
          suggested_dt(dt_next) {}
};

enum class DiffusionMode { explicit_euler, implicit_euler };

struct TransportOptions {
    DiffusionMode diffusion = DiffusionMode::explicit_euler;
    double cg_tol = 1e-10;  // relative residual of the implicit diffusion solve
};

struct TransportWorkspace {
    CgWorkspace cg;
    std::vector<double> warm_n, warm_c;
};

/// Face drift velocity chi * grad(c) / ((1 + eps n) c). The face denominator
/// uses the harmonic mean of c (bounds the factor when one neighbour is
/// small) and the arithmetic mean of n. Requires c > 0 and filled ghosts.
inline FaceField taxis_drift(const ScalarField& c, const ScalarField& n,
                             const SpeciesParams& params) {
    const GridSpec& g = c.grid();
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            if (!(c(i, j) > 0.0))
                throw positivity_error("taxis_drift: oxygen not strictly positive", i, j, c(i, j));

    FaceField drift(g);
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 1; i < g.nx; ++i) {
            const double cl = c(i - 1, j), cr = c(i, j);
            const double ch = 2.0 * cl * cr / (cl + cr);
            const double nf = 0.5 * (n(i - 1, j) + n(i, j));
            drift.fx(i, j) = params.chi * (cr - cl) / g.dx / ((1.0 + params.eps * nf) * ch);
        }
    }
    for (int j = 1; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const double cl = c(i, j - 1), cr = c(i, j);
            const double ch = 2.0 * cl * cr / (cl + cr);
            const double nf = 0.5 * (n(i, j - 1) + n(i, j));
            drift.fy(i, j) = params.chi * (cr - cl) / g.dy / ((1.0 + params.eps * nf) * ch);
        }
    }
    return drift;  // boundary faces stay zero: no flux through the walls
}

/// Sum of fluid and drift velocities on faces.
inline FaceField total_face_velocity(const MacVelocity& u, const FaceField& drift) {
    const GridSpec& g = u.grid();
    FaceField v(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i)
            v.fx(i, j) = u.u(i, j) + drift.fx(i, j);
    for (int j = 0; j <= g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            v.fy(i, j) = u.v(i, j) + drift.fy(i, j);
    return v;
}

namespace detail {

/// Donor-cell advective fluxes q_up * v on interior faces; boundary faces are
/// forced to exactly zero so the flux-form update conserves mass bit-tight.
inline FaceField upwind_fluxes(const ScalarField& q, const FaceField& v) {
    const GridSpec& g = q.grid();
    FaceField flux(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 1; i < g.nx; ++i) {
            const double vf = v.fx(i, j);
            flux.fx(i, j) = vf * (vf > 0.0 ? q(i - 1, j) : q(i, j));
        }
    for (int j = 1; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double vf = v.fy(i, j);
            flux.fy(i, j) = vf * (vf > 0.0 ? q(i, j - 1) : q(i, j));
        }
    return flux;
}

inline void add_diffusive_fluxes(const ScalarField& q, FaceField& flux) {
    const GridSpec& g = q.grid();
    for (int j = 0; j < g.ny; ++j)
        for (int i = 1; i < g.nx; ++i)
            flux.fx(i, j) -= (q(i, j) - q(i - 1, j)) / g.dx;
    for (int j = 1; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            flux.fy(i, j) -= (q(i, j) - q(i, j - 1)) / g.dy;
}

inline ScalarField apply_flux_update(const ScalarField& q, const FaceField& flux, double dt) {
    const GridSpec& g = q.grid();
    ScalarField out(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            out(i, j) = q(i, j) - dt * ((flux.fx(i + 1, j) - flux.fx(i, j)) / g.dx +
                                        (flux.fy(i, j + 1) - flux.fy(i, j)) / g.dy);
    return out;
}

/// Backward-Euler diffusion applied in flux form: the implicit solution only
/// shapes the fluxes, so the update telescopes and mass stays exact even at
/// finite solver tolerance.
inline ScalarField implicit_diffusion(const ScalarField& q, double dt, const TransportOptions& opt,
                                      TransportWorkspace& ws, std::vector<double>& warm) {
    ScalarField sol = helmholtz_neumann_solve(q, dt, opt.cg_tol, ws.cg, &warm);
    const GridSpec& g = q.grid();
    ScalarField out(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double lap = (sol(i - 1, j) - 2.0 * sol(i, j) + sol(i + 1, j)) / (g.dx * g.dx) +
                               (sol(i, j - 1) - 2.0 * sol(i, j) + sol(i, j + 1)) / (g.dy * g.dy);
            out(i, j) = q(i, j) + dt * lap;
        }
    return out;
}

} // namespace detail

/// One conservative finite-volume step for the cell density: face flux
/// -grad(n) + n_up (drift + u), upwinded by the sign of the total face
/// velocity. Rejects the step (post-hoc CFL guard) if any cell goes negative.
inline ScalarField advance_n(const ScalarField& n, const FaceField& drift, const MacVelocity& u,
                             double dt, const TransportOptions& opt = {},
                             TransportWorkspace* ws = nullptr) {
    const FaceField vel = total_face_velocity(u, drift);
    FaceField flux = detail::upwind_fluxes(n, vel);
    ScalarField out;
    if (opt.diffusion == DiffusionMode::explicit_euler) {
        detail::add_diffusive_fluxes(n, flux);
        out = detail::apply_flux_update(n, flux, dt);
    } else {
        TransportWorkspace local;
        TransportWorkspace& w = ws ? *ws : local;
        ScalarField adv = detail::apply_flux_update(n, flux, dt);
        fill_ghost_neumann_inplace(adv);
        out = detail::implicit_diffusion(adv, dt, opt, w, w.warm_n);
    }
    const GridSpec& g = n.grid();
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            if (out(i, j) < 0.0)
                throw step_rejected("advance_n: negative density at cell (" + std::to_string(i) +
                                        "," + std::to_string(j) + ")",
                                    0.5 * dt);
    fill_ghost_neumann_inplace(out);
    return out;
}

/// One step for the oxygen: explicit advection (+ diffusion, or implicit in
/// flux form), then the consumption sink applied as the multiplicative factor
/// 1/(1 + dt n f(c)/c) which keeps c strictly positive without clipping. The
/// quotient f(c)/c is continuously extended by f'(0), so superlinear f damps
/// the sink where c is tiny.
inline ScalarField advance_c(const ScalarField& c, const ScalarField& n, const MacVelocity& u,
                             const SensitivitySpec& f, double dt, const TransportOptions& opt = {},
                             TransportWorkspace* ws = nullptr) {
    const GridSpec& g = c.grid();
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            if (!(c(i, j) > 0.0))
                throw positivity_error("advance_c: oxygen not strictly positive", i, j, c(i, j));

    FaceField uface(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i)
            uface.fx(i, j) = u.u(i, j);
    for (int j = 0; j <= g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            uface.fy(i, j) = u.v(i, j);

    FaceField flux = detail::upwind_fluxes(c, uface);
    ScalarField star;
    if (opt.diffusion == DiffusionMode::explicit_euler) {
        detail::add_diffusive_fluxes(c, flux);
        star = detail::apply_flux_update(c, flux, dt);
    } else {
        TransportWorkspace local;
        TransportWorkspace& w = ws ? *ws : local;
        ScalarField adv = detail::apply_flux_update(c, flux, dt);
        fill_ghost_neumann_inplace(adv);
        star = detail::implicit_diffusion(adv, dt, opt, w, w.warm_c);
    }

    ScalarField out(g);
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const double cs = star(i, j);
            if (!(cs > 0.0))
                throw step_rejected("advance_c: transport drove oxygen to " + std::to_string(cs) +
                                        " at cell (" + std::to_string(i) + "," + std::to_string(j) +
                                        ")",
                                    0.5 * dt);
            out(i, j) = cs / (1.0 + dt * n(i, j) * f.ratio(cs));
        }
    }
    fill_ghost_neumann_inplace(out);
    return out;
}

/// w = -ln(c / c0_inf), the transform that turns the singular taxis factor
/// grad(c)/c into -grad(w). Requires 0 < c <= c0_inf (up to round-off slack).
inline ScalarField log_transform(const ScalarField& c, double c0_inf) {
    const GridSpec& g = c.grid();
    const double tol = 1e-10 * std::max(1.0, c0_inf);
    ScalarField w(g);
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const double v = c(i, j);
            if (!(v > 0.0))
                throw positivity_error("log_transform: oxygen not strictly positive", i, j, v);
            if (v > c0_inf + tol)
                throw sim_error("log_transform: c exceeds its sup bound at cell (" +
                                std::to_string(i) + "," + std::to_string(j) +
                                "): " + std::to_string(v) + " > " + std::to_string(c0_inf));
            w(i, j) = -std::log(v / c0_inf);
        }
    }
    fill_ghost_neumann_inplace(w);
    return w;
}

} // namespace taxisim
