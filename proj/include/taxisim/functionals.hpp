#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "taxisim/fluid.hpp"
#include "taxisim/grid.hpp"
#include "taxisim/operators.hpp"
#include "taxisim/reduce.hpp"
#include "taxisim/sensitivity.hpp"
#include "taxisim/species.hpp"

namespace taxisim {

/// The consumption function violates a hypothesis required by the requested
/// analysis machinery (conditional-energy experiments need f'(0) = 0).
struct hypothesis_error : sim_error {
    using sim_error::sim_error;
};

/// Weights and constants of the conditional energy functional, all derived
/// from the domain, chi, the conserved mass, the oxygen sup bound and f.
struct ConditionalParams {
    double K = 0.0;      // weight of the |grad w|^2 term
    double L = 0.0;      // inverse weight of the kinetic term
    double M = 0.0;      // weight of the c^2 term
    double eta0 = 0.0;   // smallness threshold below which the functional dissipates
    double A = 0.0;      // oxygen level below which g is provably small
    double g_max = 0.0;  // max of g on [0, c0_inf]
    double cP = 0.0, cS = 0.0, cG = 0.0;  // Poincare / L1-Sobolev / Gagliardo-Nirenberg
};

/// One row of the diagnostics time series. Field order here is the CSV
/// column order; new fields may only be appended.
struct FunctionalReport {
    double t = 0.0;
    double mass_n = 0.0;        // int n
    double sup_c = 0.0;         // max c
    double entropy_n = 0.0;     // int n ln(n / n_bar0)
    double neg_log_mass = 0.0;  // -int ln n
    double w_mass = 0.0;        // int w
    double fisher_n = 0.0;      // int |grad n|^2 / n^2
    double dirichlet_w = 0.0;   // int |grad w|^2
    double kinetic = 0.0;       // (1/2) int |u|^2 (cell-interpolated)
    double dirichlet_u = 0.0;   // int |grad u|^2 (viscous quadratic form)
    double c_l2 = 0.0;          // int c^2
    double dirichlet_c = 0.0;   // int |grad c|^2
    double lap_w_l2 = 0.0;      // int |lap w|^2
    double quasi_energy_lhs_rate = 0.0;  // realized rate of the step ending here
    double quasi_energy_rhs = 0.0;       // chi^2 int n f(c)/c
    double cond_F = 0.0;                 // conditional energy functional
    double uniform_int = 0.0;            // int n f(c) |ln(n f(c))|
    double ck_margin = 0.0;              // Csiszar-Kullback margin for n
    double heihoff_ratio = 0.0;          // empirical functional-inequality ratio for n
    // appended columns
    double dist_n_l1 = 0.0;   // int |n - n_bar0|
    double dist_n_sup = 0.0;  // max |n - n_bar0|
    double c_l1 = 0.0;        // int c
    double u_l1 = 0.0;        // int |u| (cell-interpolated magnitude)
    double floored_cells = 0.0;  // cells clamped at the ln floor (reported, never silent)
    double dt = 0.0;             // dt of the step ending at this report
    double quasi_margin = 0.0;   // quasi-energy margin of that step
    double quasi_slack = 0.0;    // slack budget used for that margin
};

/// Static context needed to evaluate reports.
struct ReportContext {
    double chi = 1.0;
    double n_bar0 = 1.0;  // initial mass / area
    double c0_inf = 1.0;
    SensitivitySpec f = SensitivitySpec::power(2.0);
    std::optional<ConditionalParams> cond;  // absent when f'(0) != 0
    double ln_floor = 1e-30;
    double slack_kappa = 10.0;  // one knob for every inequality slack, never tuned per test
};

namespace detail {

/// Face-sum quadrature of |grad q|^2 / m(q)^2 with arithmetic face means in
/// the denominator; faces with a vanishing mean contribute zero (both cells
/// are then zero and so is the gradient).
inline double weighted_gradient_sq(const ScalarField& q, bool relative, double floor_val) {
    const GridSpec& g = q.grid();
    std::vector<double> terms;
    terms.reserve(static_cast<std::size_t>(2 * g.nx) * g.ny);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 1; i < g.nx; ++i) {
            const double d = (q(i, j) - q(i - 1, j)) / g.dx;
            if (relative) {
                const double m = 0.5 * (q(i - 1, j) + q(i, j));
                terms.push_back(m > floor_val ? d * d / (m * m) : 0.0);
            } else {
                terms.push_back(d * d);
            }
        }
    for (int j = 1; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double d = (q(i, j) - q(i, j - 1)) / g.dy;
            if (relative) {
                const double m = 0.5 * (q(i, j - 1) + q(i, j));
                terms.push_back(m > floor_val ? d * d / (m * m) : 0.0);
            } else {
                terms.push_back(d * d);
            }
        }
    return pairwise_sum(terms) * g.cell_volume();
}

} // namespace detail

/// int |grad q|^2 over interior faces.
inline double dirichlet_energy(const ScalarField& q) {
    return detail::weighted_gradient_sq(q, false, 0.0);
}

/// int |grad q|^2 / q^2 over interior faces (relative Fisher-type quantity).
inline double relative_gradient_energy(const ScalarField& q, double floor_val = 0.0) {
    return detail::weighted_gradient_sq(q, true, floor_val);
}

/// Margin of the Csiszar-Kullback inequality for a nonnegative field:
/// 2 (int phi)(int phi ln(phi/mean)) - (int |phi - mean|)^2, nonnegative up
/// to quadrature round-off.
inline double csiszar_check(const ScalarField& phi) {
    const GridSpec& g = phi.grid();
    std::vector<double> vals, ent, l1;
    vals.reserve(static_cast<std::size_t>(g.nx) * g.ny);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double v = phi(i, j);
            if (!(v >= 0.0))
                throw positivity_error("csiszar_check: field must be nonnegative", i, j, v);
            vals.push_back(v);
        }
    const double mass = pairwise_sum(vals) * g.cell_volume();
    if (mass <= 0.0) throw sim_error("csiszar_check: field is identically zero");
    const double mean = mass / g.area();
    ent.reserve(vals.size());
    l1.reserve(vals.size());
    for (double v : vals) {
        ent.push_back(v > 0.0 ? v * std::log(v / mean) : 0.0);
        l1.push_back(std::abs(v - mean));
    }
    const double entropy = pairwise_sum(ent) * g.cell_volume();
    const double l1dist = pairwise_sum(l1) * g.cell_volume();
    return 2.0 * mass * entropy - l1dist * l1dist;
}

/// Empirical ratio [(int psi) int |grad psi|^2/psi^2] / int psi ln(psi/mean).
/// The functional inequality asserts a positive lower bound; we record the
/// ratio and let runs keep a running minimum. Constant psi is rejected (0/0).
inline double heihoff_ratio(const ScalarField& psi) {
    const GridSpec& g = psi.grid();
    std::vector<double> vals, ent;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double v = psi(i, j);
            if (!(v > 0.0))
                throw positivity_error("heihoff_ratio: field must be positive", i, j, v);
            vals.push_back(v);
        }
    const double mass = pairwise_sum(vals) * g.cell_volume();
    const double mean = mass / g.area();
    for (double v : vals) ent.push_back(v * std::log(v / mean));
    const double entropy = pairwise_sum(ent) * g.cell_volume();
    if (!(entropy > 0.0))
        throw sim_error("heihoff_ratio: entropy vanishes (constant field), ratio undefined");
    return mass * relative_gradient_energy(psi) / entropy;
}

/// int n f(c) |ln(n f(c))| with the integrand extended by 0 where n f(c) = 0.
inline double uniform_integrability(const ScalarField& n, const ScalarField& c,
                                    const SensitivitySpec& f) {
    const GridSpec& g = n.grid();
    std::vector<double> terms(static_cast<std::size_t>(g.nx) * g.ny);
    std::size_t k = 0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double s = n(i, j) * f.f(c(i, j));
            terms[k++] = s > 0.0 ? s * std::abs(std::log(s)) : 0.0;
        }
    return integrate_cells(g, terms);
}

/// Quadrature of |grad c|^2/c^2 restricted to the small-oxygen set {c <= A};
/// a face contributes when both adjacent cells qualify.
inline double small_c_gradient(const ScalarField& c, double A) {
    const GridSpec& g = c.grid();
    std::vector<double> terms;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 1; i < g.nx; ++i) {
            const double cl = c(i - 1, j), cr = c(i, j);
            if (!(cl > 0.0) || !(cr > 0.0))
                throw positivity_error("small_c_gradient: c must be positive", i, j,
                                       std::min(cl, cr));
            if (cl <= A && cr <= A) {
                const double d = (cr - cl) / g.dx;
                const double m = 0.5 * (cl + cr);
                terms.push_back(d * d / (m * m));
            }
        }
    for (int j = 1; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double cl = c(i, j - 1), cr = c(i, j);
            if (cl <= A && cr <= A) {
                const double d = (cr - cl) / g.dy;
                const double m = 0.5 * (cl + cr);
                terms.push_back(d * d / (m * m));
            }
        }
    return terms.empty() ? 0.0 : pairwise_sum(terms) * g.cell_volume();
}

struct StabilizationMetrics {
    double dist_n_l1 = 0.0;
    double c_l1 = 0.0;
    double u_l1 = 0.0;
    double dist_n_c0 = 0.0;
};

inline StabilizationMetrics stabilization_metrics(const ScalarField& n, const ScalarField& c,
                                                  const MacVelocity& u, double n_bar0) {
    const GridSpec& g = n.grid();
    StabilizationMetrics m;
    std::vector<double> dn, cc, uu;
    CellVector uc = interpolate_to_cells(u);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            dn.push_back(std::abs(n(i, j) - n_bar0));
            cc.push_back(c(i, j));
            uu.push_back(std::hypot(uc.x(i, j), uc.y(i, j)));
            m.dist_n_c0 = std::max(m.dist_n_c0, std::abs(n(i, j) - n_bar0));
        }
    m.dist_n_l1 = pairwise_sum(dn) * g.cell_volume();
    m.c_l1 = pairwise_sum(cc) * g.cell_volume();
    m.u_l1 = pairwise_sum(uu) * g.cell_volume();
    return m;
}

// ---------------------------------------------------------------------------
// Conditional-energy constants
// ---------------------------------------------------------------------------

namespace detail {

/// Library of zero-flux test fields used to estimate the embedding constants:
/// the tensor cosines (Neumann eigenfunctions) plus a few off-center bumps.
inline std::vector<ScalarField> constant_test_library(const GridSpec& g) {
    std::vector<ScalarField> lib;
    constexpr double kPi = 3.14159265358979323846;
    for (int k = 0; k < 8; ++k) {
        for (int m = 0; m < 8; ++m) {
            if (k == 0 && m == 0) continue;
            ScalarField f(g);
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i)
                    f(i, j) = std::cos(k * kPi * g.xc(i) / g.lx) * std::cos(m * kPi * g.yc(j) / g.ly);
            fill_ghost_neumann_inplace(f);
            lib.push_back(std::move(f));
        }
    }
    const double centers[][2] = {{0.5, 0.5}, {0.3, 0.6}, {0.7, 0.25}};
    for (auto& ctr : centers) {
        ScalarField f(g);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                const double rx = (g.xc(i) / g.lx - ctr[0]), ry = (g.yc(j) / g.ly - ctr[1]);
                f(i, j) = std::exp(-40.0 * (rx * rx + ry * ry));
            }
        fill_ghost_neumann_inplace(f);
        lib.push_back(std::move(f));
    }
    return lib;
}

inline CellVector face_gradient_at_cells(const ScalarField& f) {
    const GridSpec& g = f.grid();
    FaceField grad = gradient(f);
    CellVector out{ScalarField(g), ScalarField(g)};
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            out.x(i, j) = 0.5 * (grad.fx(i, j) + grad.fx(i + 1, j));
            out.y(i, j) = 0.5 * (grad.fy(i, j) + grad.fy(i, j + 1));
        }
    return out;
}

} // namespace detail

/// Derive K, L, M, A, eta0 and the embedding constants. The Poincare constant
/// comes from the exact first nonzero Neumann eigenvalue of the rectangle;
/// the L1-Sobolev and Gagliardo-Nirenberg constants are estimated by
/// maximizing their defining ratios over a fixed library of smooth zero-flux
/// fields and then doubled, which only makes eta0 more conservative.
inline ConditionalParams conditional_parameters(const GridSpec& domain, double chi, double n0_mass,
                                                double c0_inf, const SensitivitySpec& f,
                                                double grad_phi_inf = 0.0) {
    if (!f.superlinear_at_zero())
        throw hypothesis_error(
            "conditional_parameters: f'(0) = 0 required (superlinear decay of the consumption "
            "rate near zero); got f = " + f.describe());

    constexpr double kPi = 3.14159265358979323846;
    ConditionalParams p;
    const double lmax = std::max(domain.lx, domain.ly);
    const double lambda1 = kPi * kPi / (lmax * lmax);
    p.cP = 1.0 / lambda1;

    // estimate cS and cG over the library
    double cS = 0.0, cG = 0.0;
    for (const ScalarField& phi : detail::constant_test_library(domain)) {
        const GridSpec& g = phi.grid();
        CellVector grad = detail::face_gradient_at_cells(phi);
        ScalarField lap = laplacian(phi);
        std::vector<double> l2dev, gl1, g4, g2, lap2;
        const double mean = integrate(phi) / g.area();
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                const double gv = grad.x(i, j) * grad.x(i, j) + grad.y(i, j) * grad.y(i, j);
                l2dev.push_back((phi(i, j) - mean) * (phi(i, j) - mean));
                gl1.push_back(std::sqrt(gv));
                g2.push_back(gv);
                g4.push_back(gv * gv);
                lap2.push_back(lap(i, j) * lap(i, j));
            }
        const double vol = g.cell_volume();
        const double num_s = pairwise_sum(l2dev) * vol;
        const double den_s = pairwise_sum(gl1) * vol;
        if (den_s > 0.0) cS = std::max(cS, num_s / (den_s * den_s));
        const double num_g = pairwise_sum(g4) * vol;
        const double den_g = (pairwise_sum(lap2) * vol) * (pairwise_sum(g2) * vol);
        if (den_g > 0.0) cG = std::max(cG, num_g / den_g);
    }
    p.cS = 2.0 * cS;
    p.cG = 2.0 * cG;

    const double n_bar0 = n0_mass / domain.area();
    p.K = 16.0 * p.cP * chi * chi * n_bar0;

    auto g_of = [&](double s) {
        const double r = f.ratio(s);
        return p.K * r * r + r + std::abs(f.fprime(s));
    };

    const int samples = 4096;
    double g_max = 0.0;
    for (int k = 0; k <= samples; ++k) g_max = std::max(g_max, g_of(c0_inf * k / samples));
    p.g_max = g_max;

    const double threshold = 1.0 / (16.0 * p.cP * n_bar0);
    double A = 0.0;
    for (int k = 1; k <= samples; ++k) {
        const double s = c0_inf * k / samples;
        if (g_of(s) > threshold) break;
        A = s;
    }
    if (A == 0.0)
        throw hypothesis_error(
            "conditional_parameters: no oxygen level A with g(s) <= 1/(16 cP n_bar0) on (0, A]; "
            "the smallness requirement fails for this f / mass combination");
    p.A = A;

    p.L = 2.0 * p.cP * p.cS * grad_phi_inf * grad_phi_inf * n0_mass + 1.0;
    p.M = 2.0 * p.K * p.g_max * n_bar0 / (A * A);

    const double c5 = p.K * (p.K * p.L + 0.5);
    const double c6 = 2.0 * p.cS * domain.area() * n_bar0 *
                      (p.K * p.g_max + chi * chi) * (p.K * p.g_max + chi * chi);
    const double c7 = 2.0 * p.cG * (c5 + c6) / p.K;
    p.eta0 = p.K / (8.0 * c7);
    return p;
}

/// The conditional energy functional evaluated from report entries.
inline double conditional_functional(const FunctionalReport& r, const ConditionalParams& p) {
    return r.entropy_n + 0.5 * p.K * r.dirichlet_w + (1.0 / p.L) * r.kinetic + 0.5 * p.M * r.c_l2;
}

// ---------------------------------------------------------------------------
// Report evaluation
// ---------------------------------------------------------------------------

/// Evaluate every per-state functional. When `prev` is given together with
/// the step size, the realized quasi-energy rate, margin and slack of the
/// step ending at this state are filled in (they stay zero on the first
/// report). Flooring of ln n below ctx.ln_floor is counted, never silent.
inline FunctionalReport evaluate_report(const ScalarField& n, const ScalarField& c,
                                        const MacVelocity& u, double t, const ReportContext& ctx,
                                        const FunctionalReport* prev = nullptr,
                                        double step_dt = 0.0) {
    const GridSpec& g = n.grid();
    FunctionalReport r;
    r.t = t;

    std::vector<double> mass, ent, neglog, c2, cf_rhs, uint_terms;
    const std::size_t ncells = static_cast<std::size_t>(g.nx) * g.ny;
    mass.reserve(ncells);
    ent.reserve(ncells);
    neglog.reserve(ncells);
    c2.reserve(ncells);
    cf_rhs.reserve(ncells);
    uint_terms.reserve(ncells);
    int floored = 0;
    double sup_c = c(0, 0);
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const double nv = n(i, j), cv = c(i, j);
            if (!(cv > 0.0))
                throw positivity_error("evaluate_report: oxygen must be positive", i, j, cv);
            mass.push_back(nv);
            ent.push_back(nv > 0.0 ? nv * std::log(nv / ctx.n_bar0) : 0.0);
            double nfloor = nv;
            if (nv < ctx.ln_floor) {
                nfloor = ctx.ln_floor;
                ++floored;
            }
            neglog.push_back(-std::log(nfloor));
            c2.push_back(cv * cv);
            cf_rhs.push_back(nv * ctx.f.ratio(cv));
            const double s = nv * ctx.f.f(cv);
            uint_terms.push_back(s > 0.0 ? s * std::abs(std::log(s)) : 0.0);
            sup_c = std::max(sup_c, cv);
        }
    }
    const double vol = g.cell_volume();
    r.mass_n = pairwise_sum(mass) * vol;
    r.sup_c = sup_c;
    r.entropy_n = pairwise_sum(ent) * vol;
    r.neg_log_mass = pairwise_sum(neglog) * vol;
    r.c_l2 = pairwise_sum(c2) * vol;
    r.quasi_energy_rhs = ctx.chi * ctx.chi * pairwise_sum(cf_rhs) * vol;
    r.uniform_int = pairwise_sum(uint_terms) * vol;
    r.floored_cells = floored;

    ScalarField w = log_transform(c, ctx.c0_inf);
    r.w_mass = integrate(w);
    r.fisher_n = relative_gradient_energy(n, ctx.ln_floor);
    r.dirichlet_w = dirichlet_energy(w);
    r.dirichlet_c = dirichlet_energy(c);
    {
        ScalarField lw = laplacian(w);
        std::vector<double> lw2(ncells);
        std::size_t k = 0;
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i)
                lw2[k++] = lw(i, j) * lw(i, j);
        r.lap_w_l2 = integrate_cells(g, lw2);
    }

    r.kinetic = kinetic_energy(u);
    r.dirichlet_u = mac_dirichlet_energy(u);

    {
        // margin and inequality ratio against the state's own mean; cells at
        // exactly zero contribute their continuous limits. A ratio of 0 marks
        // "not evaluated" (constant state, 0/0).
        const double mean = r.mass_n / g.area();
        std::vector<double> ent_own(ncells), l1(ncells);
        std::size_t k = 0;
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                const double v = n(i, j);
                ent_own[k] = v > 0.0 ? v * std::log(v / mean) : 0.0;
                l1[k] = std::abs(v - mean);
                ++k;
            }
        const double entropy_own = pairwise_sum(ent_own) * vol;
        const double l1dist = pairwise_sum(l1) * vol;
        r.ck_margin = 2.0 * r.mass_n * entropy_own - l1dist * l1dist;
        const double relgrad = relative_gradient_energy(n, 0.0);
        r.heihoff_ratio = entropy_own > 0.0 ? r.mass_n * relgrad / entropy_own : 0.0;
    }

    if (ctx.cond) {
        r.cond_F = conditional_functional(r, *ctx.cond);
    } else {
        r.cond_F = std::numeric_limits<double>::quiet_NaN();
    }

    StabilizationMetrics sm = stabilization_metrics(n, c, u, ctx.n_bar0);
    r.dist_n_l1 = sm.dist_n_l1;
    r.dist_n_sup = sm.dist_n_c0;
    r.c_l1 = sm.c_l1;
    r.u_l1 = sm.u_l1;

    if (prev && step_dt > 0.0) {
        r.dt = step_dt;
        const double chi2 = ctx.chi * ctx.chi;
        const double e_prev = prev->neg_log_mass + chi2 * prev->w_mass;
        const double e_next = r.neg_log_mass + chi2 * r.w_mass;
        const double rate = (e_next - e_prev) / step_dt + 0.5 * prev->fisher_n +
                            0.5 * chi2 * prev->dirichlet_w;
        r.quasi_energy_lhs_rate = rate;
        r.quasi_margin = prev->quasi_energy_rhs - rate;
        const double scale =
            std::max({std::abs((e_next - e_prev) / step_dt), 0.5 * prev->fisher_n,
                      0.5 * chi2 * prev->dirichlet_w, prev->quasi_energy_rhs});
        r.quasi_slack = ctx.slack_kappa * (step_dt + g.dx * g.dx) * scale;
    }
    return r;
}

/// Margin of the quasi-energy inequality over one step: dissipation and
/// source are taken at the step's start state, the rate from the difference
/// of the two reports. Claim: margin >= -slack.
inline double quasi_energy_check(const FunctionalReport& prev, const FunctionalReport& next,
                                 double dt, const ReportContext& ctx, const GridSpec& g,
                                 double* slack_out = nullptr) {
    const double chi2 = ctx.chi * ctx.chi;
    const double e_prev = prev.neg_log_mass + chi2 * prev.w_mass;
    const double e_next = next.neg_log_mass + chi2 * next.w_mass;
    const double rate =
        (e_next - e_prev) / dt + 0.5 * prev.fisher_n + 0.5 * chi2 * prev.dirichlet_w;
    if (slack_out) {
        const double scale = std::max({std::abs((e_next - e_prev) / dt), 0.5 * prev.fisher_n,
                                       0.5 * chi2 * prev.dirichlet_w, prev.quasi_energy_rhs});
        *slack_out = ctx.slack_kappa * (dt + g.dx * g.dx) * scale;
    }
    return prev.quasi_energy_rhs - rate;
}

} // namespace taxisim
