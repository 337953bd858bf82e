#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "taxisim/fluid.hpp"
#include "taxisim/functionals.hpp"
#include "taxisim/grid.hpp"
#include "taxisim/operators.hpp"
#include "taxisim/sensitivity.hpp"
#include "taxisim/species.hpp"

namespace taxisim {

/// Named initial-data generators. Fields are sampled at cell centers /
/// faces; velocities come from a node-based streamfunction and are therefore
/// discretely divergence-free before the load-time projection even runs.
struct InitSpec {
    enum class Scalar { constant, cosine, random };
    enum class Velocity { none, vortex };
    enum class Potential { none, linear_y };

    Scalar n_kind = Scalar::cosine;
    double n_mean = 1.0, n_amp = 0.5;
    Scalar c_kind = Scalar::constant;
    double c_mean = 1.0, c_amp = 0.0;
    Velocity u_kind = Velocity::vortex;
    double u_amp = 0.1;
    Potential phi_kind = Potential::linear_y;
    double phi_coef = 0.1;
};

struct SimConfig {
    GridSpec grid{64, 64, 1.0, 1.0};
    double chi = 1.0;
    double eps = 1e-3;
    double delta = -1.0;  // < 0 means "derive from the initial oxygen minimum"
    SensitivitySpec sensitivity = SensitivitySpec::power(2.0);
    FluidMode fluid_mode = FluidMode::navier_stokes;
    double poisson_tol = 1e-10;
    InitSpec init;
    double t_end = 50.0;
    double dt_max = 5e-4;
    double cfl_safety = 0.8;
    int report_every = 100;
    unsigned seed = 1;
    DiffusionMode diffusion = DiffusionMode::implicit_euler;
    bool conditional = false;  // request the conditional-energy machinery (gates on f'(0)=0)
    bool stop_on_stabilization = false;
    std::vector<double> eps_list;  // used by the epsilon-family experiment

    void validate() const {
        if (!(t_end >= 0.0)) throw sim_error("config: t_end must be nonnegative");
        if (!(dt_max > 0.0)) throw sim_error("config: dt_max must be positive");
        if (!(cfl_safety > 0.0 && cfl_safety < 1.0))
            throw sim_error("config: cfl_safety must lie in (0, 1)");
        if (report_every < 1) throw sim_error("config: report_every must be >= 1");
        if (!(chi > 0.0)) throw sim_error("config: chi must be positive");
        if (!(eps >= 0.0)) throw sim_error("config: eps must be nonnegative");
    }
};

struct SimState {
    ScalarField n, c;
    MacVelocity u;
    ScalarField pressure;
    double t = 0.0;
};

struct RunSummary {
    std::vector<FunctionalReport> reports;
    long accepted_steps = 0;
    long rejected_steps = 0;
    double sum_dt = 0.0;
    double wall_time_s = 0.0;
    std::uint64_t final_checksum = 0;
    bool aborted = false;
    std::string abort_reason;

    double initial_mass = 0.0;
    double mass_rel_drift_max = 0.0;
    double max_sup_c = 0.0;
    double min_c = std::numeric_limits<double>::infinity();
    double min_n = std::numeric_limits<double>::infinity();
    double min_quasi_margin = std::numeric_limits<double>::infinity();
    double min_margin_plus_slack = std::numeric_limits<double>::infinity();
    double min_ck_margin = std::numeric_limits<double>::infinity();
    double uniform_int_time_integral = 0.0;

    std::optional<double> eta0;
    std::optional<double> t0_conditional;  // first t with cond_F < 0.9 eta0
    double cond_at_t0 = std::numeric_limits<double>::quiet_NaN();
    double max_cond_after_t0 = -std::numeric_limits<double>::infinity();

    std::optional<double> stabilization_time;
    SimState final_state;
    // discrete C2 proxies of the final state (sup of difference-quotient derivatives)
    double final_sup_d2_n = 0.0, final_sup_d2_c = 0.0;
};

namespace detail {

inline ScalarField make_scalar_init(const GridSpec& g, InitSpec::Scalar kind, double mean,
                                    double amp, std::mt19937& rng) {
    constexpr double kPi = 3.14159265358979323846;
    ScalarField f(g);
    switch (kind) {
        case InitSpec::Scalar::constant:
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i)
                    f(i, j) = mean;
            break;
        case InitSpec::Scalar::cosine:
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i)
                    f(i, j) = mean + amp * std::cos(2.0 * kPi * g.xc(i) / g.lx) *
                                         std::cos(2.0 * kPi * g.yc(j) / g.ly);
            break;
        case InitSpec::Scalar::random: {
            std::uniform_real_distribution<double> dist(-1.0, 1.0);
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i)
                    f(i, j) = mean + amp * dist(rng);
            break;
        }
    }
    fill_ghost_neumann_inplace(f);
    return f;
}

inline MacVelocity make_velocity_init(const GridSpec& g, InitSpec::Velocity kind, double amp) {
    constexpr double kPi = 3.14159265358979323846;
    MacVelocity u(g);
    if (kind == InitSpec::Velocity::none) return u;
    auto psi = [&](int i, int j) {
        const double sx = std::sin(kPi * g.xf(i) / g.lx);
        const double sy = std::sin(kPi * g.yf(j) / g.ly);
        return amp / kPi * sx * sx * sy * sy;
    };
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i)
            u.u(i, j) = (psi(i, j + 1) - psi(i, j)) / g.dy;
    for (int j = 0; j <= g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            u.v(i, j) = -(psi(i + 1, j) - psi(i, j)) / g.dx;
    u.clamp_boundary();
    return u;
}

inline ScalarField make_potential(const GridSpec& g, InitSpec::Potential kind, double coef) {
    ScalarField phi(g, 0.0);
    if (kind == InitSpec::Potential::linear_y)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i)
                phi(i, j) = coef * g.yc(j);
    fill_ghost_neumann_inplace(phi);
    return phi;
}

inline double max_face_gradient(const ScalarField& f) {
    FaceField grad = gradient(f);
    double m = 0.0;
    const GridSpec& g = f.grid();
    for (int j = 0; j < g.ny; ++j)
        for (int i = 1; i < g.nx; ++i)
            m = std::max(m, std::abs(grad.fx(i, j)));
    for (int j = 1; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            m = std::max(m, std::abs(grad.fy(i, j)));
    return m;
}

inline void fnv1a_mix(std::uint64_t& h, const double* data, std::size_t count) {
    for (std::size_t k = 0; k < count; ++k) {
        std::uint64_t bits;
        std::memcpy(&bits, &data[k], sizeof(bits));
        for (int b = 0; b < 8; ++b) {
            h ^= (bits >> (8 * b)) & 0xffu;
            h *= 1099511628211ull;
        }
    }
}

inline std::uint64_t state_checksum(const SimState& s) {
    std::uint64_t h = 1469598103934665603ull;
    fnv1a_mix(h, s.n.raw().data(), s.n.raw().size());
    fnv1a_mix(h, s.c.raw().data(), s.c.raw().size());
    fnv1a_mix(h, s.u.udata().data(), s.u.udata().size());
    fnv1a_mix(h, s.u.vdata().data(), s.u.vdata().size());
    return h;
}

inline double sup_second_differences(const ScalarField& f) {
    const GridSpec& g = f.grid();
    double m = 0.0;
    for (int j = 1; j < g.ny - 1; ++j)
        for (int i = 1; i < g.nx - 1; ++i) {
            m = std::max(m, std::abs(f(i - 1, j) - 2 * f(i, j) + f(i + 1, j)) / (g.dx * g.dx));
            m = std::max(m, std::abs(f(i, j - 1) - 2 * f(i, j) + f(i, j + 1)) / (g.dy * g.dy));
        }
    return m;
}

} // namespace detail

/// Time-step bound: diffusive limit dx^2/8 (explicit mode, two species) and
/// advective limit dx/speed over the combined fluid + drift face speed,
/// scaled by the safety factor and capped at dt_max.
inline double cfl_dt_for_speed(const GridSpec& g, double max_speed, const SimConfig& cfg) {
    if (!std::isfinite(max_speed)) throw sim_error("cfl: non-finite face speed");
    const double h = std::min(g.dx, g.dy);
    double dt = cfg.dt_max;
    if (cfg.diffusion == DiffusionMode::explicit_euler)
        dt = std::min(dt, cfg.cfl_safety * h * h / 8.0);
    if (max_speed > 0.0) dt = std::min(dt, cfg.cfl_safety * h / max_speed);
    return std::min(dt, cfg.dt_max);
}

inline double cfl_dt(const SimState& state, const SimConfig& cfg) {
    SpeciesParams sp{cfg.chi, cfg.eps, max_interior(state.c), min_interior(state.c)};
    FaceField drift = taxis_drift(state.c, state.n, sp);
    FaceField total = total_face_velocity(state.u, drift);
    double speed = 0.0;
    for (double v : total.xdata()) speed = std::max(speed, std::abs(v));
    for (double v : total.ydata()) speed = std::max(speed, std::abs(v));
    return cfl_dt_for_speed(state.n.grid(), speed, cfg);
}

/// A run aborted after repeated step rejections; carries the partial summary.
struct run_aborted : sim_error {
    using sim_error::sim_error;
};

/// Owns the state, workspaces and diagnostics bookkeeping of one experiment.
class Simulation {
  public:
    explicit Simulation(SimConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        const GridSpec& g = cfg_.grid;
        std::mt19937 rng(cfg_.seed);

        state_.n = detail::make_scalar_init(g, cfg_.init.n_kind, cfg_.init.n_mean, cfg_.init.n_amp, rng);
        state_.c = detail::make_scalar_init(g, cfg_.init.c_kind, cfg_.init.c_mean, cfg_.init.c_amp, rng);
        state_.u = detail::make_velocity_init(g, cfg_.init.u_kind, cfg_.init.u_amp);
        state_.pressure = ScalarField(g, 0.0);

        const double n_min = min_interior(state_.n);
        if (!(n_min > 0.0))
            throw sim_error("init: n0 must be strictly positive (min = " + std::to_string(n_min) +
                            "); ln n0 must be integrable");
        const double c_min = min_interior(state_.c);
        const double c_max = max_interior(state_.c);
        species_.chi = cfg_.chi;
        species_.eps = cfg_.eps;
        species_.c0_inf = c_max;
        species_.delta = cfg_.delta < 0.0 ? c_min : cfg_.delta;
        species_.validate();
        if (c_min < species_.delta)
            throw sim_error("init: initial oxygen dips below delta (c0 >= delta > 0 required)");

        ScalarField phi = detail::make_potential(g, cfg_.init.phi_kind, cfg_.init.phi_coef);
        const double grad_phi_inf = detail::max_face_gradient(phi);
        fluid_ = FluidParams::make(cfg_.fluid_mode, std::move(phi), cfg_.poisson_tol,
                                   cfg_.diffusion == DiffusionMode::implicit_euler);

        // divergence-free initial velocity (tight projection at load)
        if (cfg_.fluid_mode != FluidMode::none)
            state_.u = project_div_free(std::move(state_.u), std::min(cfg_.poisson_tol, 1e-12),
                                        &fluid_ws_);
        else
            state_.u = MacVelocity(g);  // the zero object

        ctx_.chi = cfg_.chi;
        ctx_.n_bar0 = integrate(state_.n) / g.area();
        ctx_.c0_inf = species_.c0_inf;
        ctx_.f = cfg_.sensitivity;
        if (cfg_.conditional && !cfg_.sensitivity.superlinear_at_zero())
            throw hypothesis_error(
                "conditional-functional experiment requested with f'(0) != 0: f'(0) = 0 required "
                "(got f = " + cfg_.sensitivity.describe() + ")");
        if (cfg_.sensitivity.superlinear_at_zero()) {
            ctx_.cond = conditional_parameters(g, cfg_.chi, integrate(state_.n), species_.c0_inf,
                                               cfg_.sensitivity, grad_phi_inf);
            summary_.eta0 = ctx_.cond->eta0;
        }

        transport_.diffusion = cfg_.diffusion;
        transport_.cg_tol = 1e-10;

        summary_.initial_mass = integrate(state_.n);
        last_report_ = evaluate_report(state_.n, state_.c, state_.u, 0.0, ctx_);
        initial_report_ = last_report_;
        summary_.reports.push_back(last_report_);
        note_report(last_report_);
    }

    const SimConfig& config() const { return cfg_; }
    const SimState& state() const { return state_; }
    const ReportContext& context() const { return ctx_; }
    const SpeciesParams& species() const { return species_; }
    const FunctionalReport& last_report() const { return last_report_; }
    const FunctionalReport& initial_report() const { return initial_report_; }
    const RunSummary& summary() const { return summary_; }

    bool done() const { return state_.t >= cfg_.t_end || summary_.aborted || stopped_early_; }

    /// One accepted step: drift and dt from the current state, all substeps
    /// advanced from the old state with one shared dt, halving on rejection.
    void step_once() {
        const GridSpec& g = cfg_.grid;
        FaceField drift = taxis_drift(state_.c, state_.n, species_);
        FaceField total = total_face_velocity(state_.u, drift);
        double speed = 0.0;
        for (double v : total.xdata()) speed = std::max(speed, std::abs(v));
        for (double v : total.ydata()) speed = std::max(speed, std::abs(v));
        double dt = cfl_dt_for_speed(g, speed, cfg_);
        dt = std::min(dt, cfg_.t_end - state_.t);

        for (int attempt = 0;; ++attempt) {
            try {
                FluidStepResult fr = advance_u(state_.u, state_.n, fluid_, dt, &fluid_ws_);
                ScalarField n_new = advance_n(state_.n, drift, state_.u, dt, transport_, &transport_ws_);
                ScalarField c_new = advance_c(state_.c, state_.n, state_.u, cfg_.sensitivity, dt,
                                              transport_, &transport_ws_);
                state_.n = std::move(n_new);
                state_.c = std::move(c_new);
                state_.u = std::move(fr.u);
                state_.pressure = std::move(fr.pressure);
                state_.t += dt;
                break;
            } catch (const step_rejected& e) {
                ++summary_.rejected_steps;
                if (attempt >= 6) {
                    summary_.aborted = true;
                    summary_.abort_reason =
                        "six consecutive step rejections; last: " + std::string(e.what());
                    finalize();
                    throw run_aborted(summary_.abort_reason);
                }
                dt *= 0.5;
            }
        }

        ++summary_.accepted_steps;
        summary_.sum_dt += dt;
        FunctionalReport r = evaluate_report(state_.n, state_.c, state_.u, state_.t, ctx_,
                                             &last_report_, dt);
        note_report(r);
        summary_.uniform_int_time_integral += dt * r.uniform_int;
        if (summary_.accepted_steps % cfg_.report_every == 0 || state_.t >= cfg_.t_end)
            summary_.reports.push_back(r);
        last_report_ = r;

        if (!summary_.stabilization_time && stabilized(r)) {
            summary_.stabilization_time = state_.t;
            if (cfg_.stop_on_stabilization)
                grace_deadline_ = state_.t + std::min(1.0, 0.02 * cfg_.t_end);
        }
        if (grace_deadline_ && state_.t >= *grace_deadline_) stopped_early_ = true;
    }

    RunSummary run() {
        const auto start = std::chrono::steady_clock::now();
        try {
            while (!done()) step_once();
        } catch (const run_aborted&) {
            // partial summary below
        }
        if (summary_.reports.back().t < state_.t) summary_.reports.push_back(last_report_);
        finalize();
        summary_.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return summary_;
    }

  private:
    bool stabilized(const FunctionalReport& r) const {
        const double tiny = 1e-300;
        return r.dist_n_l1 <= 0.01 * std::max(initial_report_.dist_n_l1, tiny) &&
               r.c_l1 <= 0.01 * std::max(initial_report_.c_l1, tiny) &&
               r.u_l1 <= 0.01 * std::max(initial_report_.u_l1, tiny) &&
               r.dist_n_sup <= 0.05 * std::max(initial_report_.dist_n_sup, tiny);
    }

    void note_report(const FunctionalReport& r) {
        summary_.max_sup_c = std::max(summary_.max_sup_c, r.sup_c);
        summary_.min_n = std::min(summary_.min_n, min_interior(state_.n));
        summary_.min_c = std::min(summary_.min_c, min_interior(state_.c));
        summary_.mass_rel_drift_max =
            std::max(summary_.mass_rel_drift_max,
                     std::abs(r.mass_n - summary_.initial_mass) / summary_.initial_mass);
        summary_.min_ck_margin = std::min(summary_.min_ck_margin, r.ck_margin);
        if (r.dt > 0.0) {
            summary_.min_quasi_margin = std::min(summary_.min_quasi_margin, r.quasi_margin);
            summary_.min_margin_plus_slack =
                std::min(summary_.min_margin_plus_slack, r.quasi_margin + r.quasi_slack);
        }
        if (ctx_.cond) {
            if (!summary_.t0_conditional && r.cond_F < 0.9 * ctx_.cond->eta0) {
                summary_.t0_conditional = r.t;
                summary_.cond_at_t0 = r.cond_F;
            } else if (summary_.t0_conditional && r.t > *summary_.t0_conditional) {
                summary_.max_cond_after_t0 = std::max(summary_.max_cond_after_t0, r.cond_F);
            }
        }
    }

    void finalize() {
        summary_.final_checksum = detail::state_checksum(state_);
        summary_.final_state = state_;
        summary_.final_sup_d2_n = detail::sup_second_differences(state_.n);
        summary_.final_sup_d2_c = detail::sup_second_differences(state_.c);
    }

    SimConfig cfg_;
    SimState state_;
    SpeciesParams species_;
    FluidParams fluid_;
    ReportContext ctx_;
    TransportOptions transport_;
    TransportWorkspace transport_ws_;
    FluidWorkspace fluid_ws_;
    FunctionalReport last_report_, initial_report_;
    RunSummary summary_;
    std::optional<double> grace_deadline_;
    bool stopped_early_ = false;
};

inline RunSummary run(const SimConfig& cfg) { return Simulation(cfg).run(); }

/// Run until the conditional functional first drops below 0.9 eta0 (or t_end),
/// gated on the f'(0)=0 hypothesis. Not reaching t0 is an outcome, not an
/// error. Returns the summary; t0 and the cond_F trace live inside it.
inline RunSummary eventual_smallness_search(SimConfig cfg) {
    cfg.conditional = true;
    return run(cfg);
}

// ---------------------------------------------------------------------------
// Epsilon family
// ---------------------------------------------------------------------------

struct EpsilonFamilyRow {
    double eps_hi = 0.0, eps_lo = 0.0;
    double dist_n = 0.0, dist_c = 0.0, dist_u = 0.0;  // L1 in space-time
    bool failed = false;
};

struct EpsilonFamilyTable {
    std::vector<double> eps;
    std::vector<EpsilonFamilyRow> rows;
    std::vector<std::vector<double>> mass_traces;  // one per eps, at report times
    std::vector<double> report_times;
};

namespace detail {

struct Snapshots {
    std::vector<double> times;
    std::vector<ScalarField> n, c;
    std::vector<CellVector> u;
    std::vector<double> mass;
};

inline Snapshots run_with_snapshots(SimConfig cfg) {
    Snapshots snap;
    Simulation sim(std::move(cfg));
    auto record = [&](const FunctionalReport& r) {
        snap.times.push_back(r.t);
        snap.n.push_back(sim.state().n);
        snap.c.push_back(sim.state().c);
        snap.u.push_back(interpolate_to_cells(sim.state().u));
        snap.mass.push_back(r.mass_n);
    };
    record(sim.last_report());
    long steps = 0;
    while (!sim.done()) {
        sim.step_once();
        ++steps;
        if (steps % sim.config().report_every == 0 || sim.done()) record(sim.last_report());
    }
    return snap;
}

inline double l1_distance(const ScalarField& a, const ScalarField& b) {
    const GridSpec& g = a.grid();
    std::vector<double> d(static_cast<std::size_t>(g.nx) * g.ny);
    std::size_t k = 0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            d[k++] = std::abs(a(i, j) - b(i, j));
    return integrate_cells(g, d);
}

} // namespace detail

/// Run the same grid and data for each eps and tabulate adjacent-pair
/// L1(space-time) distances of n, c and the cell velocity, plus the mass
/// traces (identical across eps when transport is conservative).
inline EpsilonFamilyTable epsilon_family(const SimConfig& base, const std::vector<double>& eps_list) {
    if (eps_list.size() < 2) throw sim_error("epsilon_family: need at least two eps values");
    for (std::size_t k = 0; k + 1 < eps_list.size(); ++k)
        if (!(eps_list[k] >= eps_list[k + 1]))
            throw sim_error("epsilon_family: eps values must be non-increasing");
    if (!(eps_list.back() >= 0.0)) throw sim_error("epsilon_family: eps must be nonnegative");

    EpsilonFamilyTable table;
    table.eps = eps_list;
    std::optional<detail::Snapshots> prev;
    for (std::size_t k = 0; k < eps_list.size(); ++k) {
        SimConfig cfg = base;
        cfg.eps = eps_list[k];
        detail::Snapshots snap;
        bool failed = false;
        try {
            snap = detail::run_with_snapshots(cfg);
        } catch (const sim_error&) {
            failed = true;
        }
        if (!failed) {
            table.mass_traces.push_back(snap.mass);
            if (table.report_times.empty()) table.report_times = snap.times;
        } else {
            table.mass_traces.emplace_back();
        }
        if (k > 0) {
            EpsilonFamilyRow row;
            row.eps_hi = eps_list[k - 1];
            row.eps_lo = eps_list[k];
            row.failed = failed || !prev;
            if (!row.failed) {
                const std::size_t m = std::min(prev->times.size(), snap.times.size());
                for (std::size_t s = 1; s < m; ++s) {
                    if (std::abs(prev->times[s] - snap.times[s]) > 1e-12) {
                        row.failed = true;  // report grids diverged; distances undefined
                        break;
                    }
                    const double dtr = snap.times[s] - snap.times[s - 1];
                    row.dist_n += dtr * detail::l1_distance(prev->n[s], snap.n[s]);
                    row.dist_c += dtr * detail::l1_distance(prev->c[s], snap.c[s]);
                    row.dist_u += dtr * (detail::l1_distance(prev->u[s].x, snap.u[s].x) +
                                         detail::l1_distance(prev->u[s].y, snap.u[s].y));
                }
            }
            table.rows.push_back(row);
        }
        if (!failed)
            prev = std::move(snap);
        else
            prev.reset();
    }
    return table;
}

} // namespace taxisim
