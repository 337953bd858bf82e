#pragma once

#include <cmath>
#include <functional>
#include <sstream>
#include <vector>

#include "taxisim/grid.hpp"
#include "taxisim/operators.hpp"
#include "taxisim/reduce.hpp"

namespace taxisim {

/// Iterative solve failed to reach its tolerance; message carries the tail of
/// the residual history.
struct solver_error : sim_error {
    using sim_error::sim_error;
};

struct CgWorkspace {
    std::vector<double> r, p, Ap, prod;
    void resize(std::size_t n) {
        r.resize(n);
        p.resize(n);
        Ap.resize(n);
        prod.resize(n);
    }
};

namespace detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b,
                  std::vector<double>& prod) {
    for (std::size_t k = 0; k < a.size(); ++k) prod[k] = a[k] * b[k];
    return pairwise_sum(prod);
}

} // namespace detail

/// Plain conjugate gradients on an SPD operator given as a functor
/// apply(x, y) computing y = A x. Stops at ||r||_2 <= tol * ||b||_2.
/// x is used as the initial guess (warm start). Returns iteration count.
template <class Apply>
int conjugate_gradient(Apply&& apply, const std::vector<double>& b, std::vector<double>& x,
                       double tol, int max_iter, CgWorkspace& ws) {
    const std::size_t n = b.size();
    ws.resize(n);
    x.resize(n, 0.0);

    for (std::size_t k = 0; k < n; ++k) ws.prod[k] = b[k] * b[k];
    const double b_norm = std::sqrt(pairwise_sum(ws.prod));
    if (b_norm == 0.0) {
        std::fill(x.begin(), x.end(), 0.0);
        return 0;
    }
    const double target = tol * b_norm;

    apply(x, ws.Ap);
    for (std::size_t k = 0; k < n; ++k) ws.r[k] = b[k] - ws.Ap[k];
    ws.p = ws.r;
    double rr = detail::dot(ws.r, ws.r, ws.prod);

    std::vector<double> history;
    for (int it = 0; it < max_iter; ++it) {
        if (std::sqrt(rr) <= target) return it;
        apply(ws.p, ws.Ap);
        const double pAp = detail::dot(ws.p, ws.Ap, ws.prod);
        if (!(pAp > 0.0))
            throw solver_error("cg: operator lost positive definiteness (pAp=" +
                               std::to_string(pAp) + ")");
        const double alpha = rr / pAp;
        for (std::size_t k = 0; k < n; ++k) x[k] += alpha * ws.p[k];
        for (std::size_t k = 0; k < n; ++k) ws.r[k] -= alpha * ws.Ap[k];
        const double rr_new = detail::dot(ws.r, ws.r, ws.prod);
        history.push_back(std::sqrt(rr_new));
        const double beta = rr_new / rr;
        rr = rr_new;
        for (std::size_t k = 0; k < n; ++k) ws.p[k] = ws.r[k] + beta * ws.p[k];
    }
    if (std::sqrt(rr) <= target) return max_iter;

    std::ostringstream oss;
    oss << "cg: no convergence in " << max_iter << " iterations; target " << target
        << ", residual tail:";
    const std::size_t tail = history.size() > 8 ? history.size() - 8 : 0;
    for (std::size_t k = tail; k < history.size(); ++k) oss << " " << history[k];
    throw solver_error(oss.str());
}

// ---------------------------------------------------------------------------
// Cell-centered operators with homogeneous Neumann boundaries
// ---------------------------------------------------------------------------

namespace detail {

/// y = (I - dt Lap) x on the interior cells, zero-flux walls.
inline void apply_helmholtz_neumann(const GridSpec& g, double dt, const std::vector<double>& x,
                                    std::vector<double>& y) {
    const double ax = dt / (g.dx * g.dx), ay = dt / (g.dy * g.dy);
    const int nx = g.nx, ny = g.ny;
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const std::size_t k = static_cast<std::size_t>(j) * nx + i;
            const double c = x[k];
            const double xl = (i > 0) ? x[k - 1] : c;
            const double xr = (i < nx - 1) ? x[k + 1] : c;
            const double yl = (j > 0) ? x[k - nx] : c;
            const double yr = (j < ny - 1) ? x[k + nx] : c;
            y[k] = c - ax * (xl - 2.0 * c + xr) - ay * (yl - 2.0 * c + yr);
        }
    }
}

/// y = -Lap x on the interior cells, zero-flux walls.
inline void apply_neg_laplace_neumann(const GridSpec& g, const std::vector<double>& x,
                                      std::vector<double>& y) {
    const double ax = 1.0 / (g.dx * g.dx), ay = 1.0 / (g.dy * g.dy);
    const int nx = g.nx, ny = g.ny;
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const std::size_t k = static_cast<std::size_t>(j) * nx + i;
            const double c = x[k];
            const double xl = (i > 0) ? x[k - 1] : c;
            const double xr = (i < nx - 1) ? x[k + 1] : c;
            const double yl = (j > 0) ? x[k - nx] : c;
            const double yr = (j < ny - 1) ? x[k + nx] : c;
            y[k] = -ax * (xl - 2.0 * c + xr) - ay * (yl - 2.0 * c + yr);
        }
    }
}

inline std::vector<double> pack_cells(const ScalarField& f) {
    const GridSpec& g = f.grid();
    std::vector<double> v(static_cast<std::size_t>(g.nx) * g.ny);
    std::size_t k = 0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            v[k++] = f(i, j);
    return v;
}

inline void unpack_cells(const std::vector<double>& v, ScalarField& f) {
    const GridSpec& g = f.grid();
    std::size_t k = 0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            f(i, j) = v[k++];
}

} // namespace detail

/// Solve (I - dt Lap) x = rhs with zero-flux walls. The returned field has
/// its ghosts filled. `warm` (optional) seeds and then caches the solution.
inline ScalarField helmholtz_neumann_solve(const ScalarField& rhs, double dt, double tol,
                                           CgWorkspace& ws, std::vector<double>* warm = nullptr,
                                           int* iters_out = nullptr) {
    const GridSpec& g = rhs.grid();
    std::vector<double> b = detail::pack_cells(rhs);
    std::vector<double> x = (warm && warm->size() == b.size()) ? *warm : b;
    const int max_iter = 20 * (g.nx + g.ny) + 200;
    int iters = conjugate_gradient(
        [&](const std::vector<double>& in, std::vector<double>& out) {
            detail::apply_helmholtz_neumann(g, dt, in, out);
        },
        b, x, tol, max_iter, ws);
    if (iters_out) *iters_out = iters;
    if (warm) *warm = x;
    ScalarField out(g);
    detail::unpack_cells(x, out);
    fill_ghost_neumann_inplace(out);
    return out;
}

struct PoissonInfo {
    int iterations = 0;
    double removed_mean = 0.0;  // mean of the incompatible part subtracted from rhs
    double rel_residual = 0.0;
};

/// Solve Lap p = rhs with zero-flux walls (pure Neumann). The nullspace of
/// constants is fixed by returning a mean-zero p; an incompatible rhs has its
/// mean removed first and the amount is reported, never silently dropped.
inline ScalarField pressure_poisson(const ScalarField& rhs, double tol, PoissonInfo* info = nullptr,
                                    CgWorkspace* ws = nullptr, std::vector<double>* warm = nullptr) {
    const GridSpec& g = rhs.grid();
    std::vector<double> b = detail::pack_cells(rhs);
    const double mean = pairwise_sum(b) / static_cast<double>(b.size());
    for (double& v : b) v = -(v - mean);  // solve (-Lap) p = -(rhs - mean), SPD side
    CgWorkspace local_ws;
    CgWorkspace& w = ws ? *ws : local_ws;
    std::vector<double> x = (warm && warm->size() == b.size()) ? *warm : std::vector<double>(b.size(), 0.0);
    const int max_iter = 40 * (g.nx + g.ny) + 400;
    int iters = conjugate_gradient(
        [&](const std::vector<double>& in, std::vector<double>& out) {
            detail::apply_neg_laplace_neumann(g, in, out);
        },
        b, x, tol, max_iter, w);
    // gauge fix: mean-zero solution
    const double xmean = pairwise_sum(x) / static_cast<double>(x.size());
    for (double& v : x) v -= xmean;
    if (warm) *warm = x;
    if (info) {
        info->iterations = iters;
        info->removed_mean = mean;
        // recompute the achieved relative residual against the compatible rhs
        std::vector<double> Ax(x.size());
        detail::apply_neg_laplace_neumann(g, x, Ax);
        double num = 0.0, den = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) {
            const double d = Ax[k] - b[k];
            num += d * d;
            den += b[k] * b[k];
        }
        info->rel_residual = den > 0.0 ? std::sqrt(num / den) : 0.0;
    }
    ScalarField out(g);
    detail::unpack_cells(x, out);
    fill_ghost_neumann_inplace(out);
    return out;
}

} // namespace taxisim
