#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "taxisim/driver.hpp"
#include "taxisim/functionals.hpp"
#include "taxisim/grid.hpp"

namespace taxisim {

struct io_error : sim_error {
    using sim_error::sim_error;
};

namespace detail {

inline constexpr std::array<const char*, 27> kReportColumns = {
    "t",           "mass_n",        "sup_c",       "entropy_n",   "neg_log_mass",
    "w_mass",      "fisher_n",      "dirichlet_w", "kinetic",     "dirichlet_u",
    "c_l2",        "dirichlet_c",   "lap_w_l2",    "quasi_energy_lhs_rate",
    "quasi_energy_rhs", "cond_F",   "uniform_int", "ck_margin",   "heihoff_ratio",
    "dist_n_l1",   "dist_n_sup",    "c_l1",        "u_l1",        "floored_cells",
    "dt",          "quasi_margin",  "quasi_slack"};

inline std::array<double, 27> report_values(const FunctionalReport& r) {
    return {r.t,           r.mass_n,        r.sup_c,       r.entropy_n,   r.neg_log_mass,
            r.w_mass,      r.fisher_n,      r.dirichlet_w, r.kinetic,     r.dirichlet_u,
            r.c_l2,        r.dirichlet_c,   r.lap_w_l2,    r.quasi_energy_lhs_rate,
            r.quasi_energy_rhs, r.cond_F,   r.uniform_int, r.ck_margin,   r.heihoff_ratio,
            r.dist_n_l1,   r.dist_n_sup,    r.c_l1,        r.u_l1,        r.floored_cells,
            r.dt,          r.quasi_margin,  r.quasi_slack};
}

inline FunctionalReport report_from_values(const std::array<double, 27>& v) {
    FunctionalReport r;
    r.t = v[0];
    r.mass_n = v[1];
    r.sup_c = v[2];
    r.entropy_n = v[3];
    r.neg_log_mass = v[4];
    r.w_mass = v[5];
    r.fisher_n = v[6];
    r.dirichlet_w = v[7];
    r.kinetic = v[8];
    r.dirichlet_u = v[9];
    r.c_l2 = v[10];
    r.dirichlet_c = v[11];
    r.lap_w_l2 = v[12];
    r.quasi_energy_lhs_rate = v[13];
    r.quasi_energy_rhs = v[14];
    r.cond_F = v[15];
    r.uniform_int = v[16];
    r.ck_margin = v[17];
    r.heihoff_ratio = v[18];
    r.dist_n_l1 = v[19];
    r.dist_n_sup = v[20];
    r.c_l1 = v[21];
    r.u_l1 = v[22];
    r.floored_cells = v[23];
    r.dt = v[24];
    r.quasi_margin = v[25];
    r.quasi_slack = v[26];
    return r;
}

} // namespace detail

/// CSV with a mandatory header, one row per report, 17 significant digits so
/// every float round-trips bit-exactly.
inline void emit_timeseries(const std::vector<FunctionalReport>& reports, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("emit_timeseries: cannot open '" + path + "' for writing");
    for (std::size_t k = 0; k < detail::kReportColumns.size(); ++k)
        out << (k ? "," : "") << detail::kReportColumns[k];
    out << "\n";
    char buf[40];
    for (const FunctionalReport& r : reports) {
        const auto vals = detail::report_values(r);
        for (std::size_t k = 0; k < vals.size(); ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", vals[k]);
            out << (k ? "," : "") << buf;
        }
        out << "\n";
    }
    if (!out) throw io_error("emit_timeseries: write to '" + path + "' failed");
}

inline std::vector<FunctionalReport> parse_timeseries(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("parse_timeseries: cannot open '" + path + "'");
    std::string header;
    if (!std::getline(in, header)) throw io_error("parse_timeseries: empty file");
    {
        std::string expect;
        for (std::size_t k = 0; k < detail::kReportColumns.size(); ++k)
            expect += std::string(k ? "," : "") + detail::kReportColumns[k];
        if (!header.empty() && header.back() == '\r') header.pop_back();
        if (header != expect)
            throw io_error("parse_timeseries: header mismatch; this file was not written by "
                           "emit_timeseries");
    }
    std::vector<FunctionalReport> reports;
    std::string line;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::array<double, 27> vals{};
        const char* p = line.c_str();
        for (std::size_t k = 0; k < vals.size(); ++k) {
            char* end = nullptr;
            vals[k] = std::strtod(p, &end);
            if (end == p)
                throw io_error("parse_timeseries: bad number in line " + std::to_string(lineno));
            p = end;
            if (k + 1 < vals.size()) {
                if (*p != ',')
                    throw io_error("parse_timeseries: expected ',' in line " +
                                   std::to_string(lineno));
                ++p;
            }
        }
        reports.push_back(detail::report_from_values(vals));
    }
    return reports;
}

/// 16-bit binary PGM (P5), big-endian sample order, rows written top-down
/// (largest y first). value = clamp((v - lo)/(hi - lo)) * 65535, rounded.
inline void emit_heatmap(const ScalarField& f, const std::string& path, double lo, double hi) {
    if (!(lo < hi)) throw io_error("emit_heatmap: need lo < hi");
    const GridSpec& g = f.grid();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("emit_heatmap: cannot open '" + path + "' for writing");
    out << "P5\n" << g.nx << " " << g.ny << "\n65535\n";
    for (int j = g.ny - 1; j >= 0; --j) {
        for (int i = 0; i < g.nx; ++i) {
            double s = (f(i, j) - lo) / (hi - lo);
            s = s < 0.0 ? 0.0 : (s > 1.0 ? 1.0 : s);
            const auto v = static_cast<std::uint16_t>(std::llround(s * 65535.0));
            const unsigned char bytes[2] = {static_cast<unsigned char>(v >> 8),
                                            static_cast<unsigned char>(v & 0xff)};
            out.write(reinterpret_cast<const char*>(bytes), 2);
        }
    }
    if (!out) throw io_error("emit_heatmap: write to '" + path + "' failed");
}

struct CheckResult {
    bool ok = true;
    std::vector<std::string> failures;
    void fail(const std::string& msg) {
        ok = false;
        failures.push_back(msg);
    }
};

/// Re-validate every inequality margin a stored time series carries on its
/// own: mass conservation, the oxygen sup bound, per-step quasi-energy
/// margins against their recorded slack, Csiszar-Kullback margins and
/// entropy nonnegativity.
inline CheckResult check_timeseries(const std::vector<FunctionalReport>& reports) {
    CheckResult res;
    if (reports.empty()) {
        res.fail("empty time series");
        return res;
    }
    const double m0 = reports.front().mass_n;
    const double sup0 = reports.front().sup_c;
    for (std::size_t k = 0; k < reports.size(); ++k) {
        const FunctionalReport& r = reports[k];
        const std::string at = "row " + std::to_string(k) + " (t=" + std::to_string(r.t) + ")";
        const auto vals = detail::report_values(r);
        for (std::size_t c = 0; c < vals.size(); ++c)
            if (!std::isfinite(vals[c]) && std::string(detail::kReportColumns[c]) != "cond_F")
                res.fail(at + ": non-finite " + detail::kReportColumns[c]);
        if (std::abs(r.mass_n - m0) > 1e-8 * std::abs(m0))
            res.fail(at + ": mass drift beyond 1e-8");
        if (r.sup_c > sup0 * (1.0 + 1e-12)) res.fail(at + ": sup c exceeds its initial bound");
        if (r.entropy_n < -1e-12) res.fail(at + ": negative entropy");
        const double ck_scale = std::max(1.0, 2.0 * r.mass_n * std::max(r.entropy_n, 0.0));
        if (r.ck_margin < -1e-10 * ck_scale) res.fail(at + ": Csiszar-Kullback margin violated");
        if (r.dt > 0.0 && r.quasi_margin + r.quasi_slack < 0.0)
            res.fail(at + ": quasi-energy margin below -slack");
        if (k > 0 && !(r.t > reports[k - 1].t)) res.fail(at + ": time not increasing");
    }
    return res;
}

} // namespace taxisim
