#pragma once

#include <cmath>

#include "taxisim/grid.hpp"
#include "taxisim/reduce.hpp"

namespace taxisim {

/// Throws if any interior value is non-finite; reports the offending cell.
inline void require_finite(const ScalarField& f, const char* name) {
    const GridSpec& g = f.grid();
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            if (!std::isfinite(f(i, j)))
                throw positivity_error(std::string(name) + ": non-finite value", i, j, f(i, j));
}

/// Zero-flux ghost fill: every ghost cell mirrors its adjacent interior cell,
/// so the one-sided difference across each boundary face vanishes exactly.
inline void fill_ghost_neumann_inplace(ScalarField& f) {
    const GridSpec& g = f.grid();
    for (int j = 0; j < g.ny; ++j) {
        f(-1, j) = f(0, j);
        f(g.nx, j) = f(g.nx - 1, j);
    }
    for (int i = 0; i < g.nx; ++i) {
        f(i, -1) = f(i, 0);
        f(i, g.ny) = f(i, g.ny - 1);
    }
    // corners (unused by the 5-point stencil, kept consistent anyway)
    f(-1, -1) = f(0, 0);
    f(g.nx, -1) = f(g.nx - 1, 0);
    f(-1, g.ny) = f(0, g.ny - 1);
    f(g.nx, g.ny) = f(g.nx - 1, g.ny - 1);
}

inline ScalarField fill_ghost_neumann(ScalarField f) {
    require_finite(f, "fill_ghost_neumann");
    fill_ghost_neumann_inplace(f);
    return f;
}

/// Central difference across each face. Ghosts must be filled; with Neumann
/// ghosts every boundary-face component is exactly zero.
inline FaceField gradient(const ScalarField& f) {
    const GridSpec& g = f.grid();
    FaceField out(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i)
            out.fx(i, j) = (f(i, j) - f(i - 1, j)) / g.dx;
    for (int j = 0; j <= g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            out.fy(i, j) = (f(i, j) - f(i, j - 1)) / g.dy;
    return out;
}

/// Conservative divergence: net outflux per cell volume. Summed against cell
/// volumes this telescopes to the total boundary flux.
inline ScalarField divergence(const FaceField& flux) {
    const GridSpec& g = flux.grid();
    ScalarField out(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            out(i, j) = (flux.fx(i + 1, j) - flux.fx(i, j)) / g.dx +
                        (flux.fy(i, j + 1) - flux.fy(i, j)) / g.dy;
    return out;
}

/// 5-point Laplacian as divergence of the face gradient (ghosts must be filled).
inline ScalarField laplacian(const ScalarField& f) { return divergence(gradient(f)); }

/// Midpoint quadrature over the interior cells, pairwise-summed.
inline double integrate(const ScalarField& f) {
    const GridSpec& g = f.grid();
    std::vector<double> cells(static_cast<std::size_t>(g.nx) * g.ny);
    std::size_t k = 0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            cells[k++] = f(i, j);
    return pairwise_sum(cells) * g.cell_volume();
}

/// Pairwise-summed integral of a per-cell functional value array.
inline double integrate_cells(const GridSpec& g, std::vector<double>& cells) {
    return pairwise_sum(cells) * g.cell_volume();
}

inline double max_interior(const ScalarField& f) {
    const GridSpec& g = f.grid();
    double m = f(0, 0);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            m = std::max(m, f(i, j));
    return m;
}

inline double min_interior(const ScalarField& f) {
    const GridSpec& g = f.grid();
    double m = f(0, 0);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            m = std::min(m, f(i, j));
    return m;
}

inline double max_abs_interior(const ScalarField& f) {
    const GridSpec& g = f.grid();
    double m = 0.0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            m = std::max(m, std::abs(f(i, j)));
    return m;
}

} // namespace taxisim
