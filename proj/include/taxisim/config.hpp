#pragma once

#include <charconv>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "taxisim/driver.hpp"

namespace taxisim {

/// Configuration file is malformed; message carries the line number.
struct config_error : sim_error {
    using sim_error::sim_error;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& v, const std::string& key, int line) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return x;
    } catch (const std::exception&) {
        throw config_error("line " + std::to_string(line) + ": invalid numeric value '" + v +
                           "' for key '" + key + "'");
    }
}

inline int parse_int(const std::string& v, const std::string& key, int line) {
    const double x = parse_double(v, key, line);
    const int i = static_cast<int>(x);
    if (x != static_cast<double>(i))
        throw config_error("line " + std::to_string(line) + ": key '" + key +
                           "' expects an integer, got '" + v + "'");
    return i;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

inline SensitivitySpec parse_sensitivity(const std::string& v, int line) {
    const auto parts = split(v, ':');
    if (parts[0] == "linear" && parts.size() == 1) return SensitivitySpec::linear(1e30);
    if (parts[0] == "power" && parts.size() == 2)
        return SensitivitySpec::power(parse_double(parts[1], "f", line), 1e30);
    if (parts[0] == "table" && parts.size() == 2) {
        std::vector<std::pair<double, double>> nodes;
        for (const std::string& node : split(parts[1], ',')) {
            const auto sv = split(node, '/');
            if (sv.size() != 2)
                throw config_error("line " + std::to_string(line) +
                                   ": table nodes must look like s/f(s), got '" + node + "'");
            nodes.emplace_back(parse_double(sv[0], "f", line), parse_double(sv[1], "f", line));
        }
        return SensitivitySpec::from_table(std::move(nodes));
    }
    throw config_error("line " + std::to_string(line) + ": unknown sensitivity '" + v +
                       "' (use linear, power:P or table:s/f,s/f,...)");
}

} // namespace detail

/// Parse the flat key=value format with [grid], [species], [fluid], [init]
/// and [run] sections. Unknown keys, duplicates and malformed values are
/// rejected with their line number; every key has a documented default (the
/// stabilization preset), so the empty file is a valid configuration.
inline SimConfig parse_config(const std::string& text) {
    SimConfig cfg;  // defaults == the reference ("stabilization") configuration
    int nx = 64, ny = 64;
    double lx = 1.0, ly = 1.0;

    static const std::map<std::string, std::set<std::string>> known = {
        {"grid", {"nx", "ny", "lx", "ly"}},
        {"species", {"chi", "eps", "delta", "f"}},
        {"fluid", {"mode", "phi", "poisson_tol"}},
        {"init", {"n", "c", "u", "seed"}},
        {"run",
         {"t_end", "dt_max", "cfl_safety", "report_every", "diffusion", "conditional",
          "stop_on_stabilization", "eps_list"}},
    };

    std::set<std::string> seen;
    std::string section;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw = raw.substr(0, hash);
        const std::string s = detail::trim(raw);
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']')
                throw config_error("line " + std::to_string(line) + ": malformed section header");
            section = s.substr(1, s.size() - 2);
            if (!known.count(section))
                throw config_error("line " + std::to_string(line) + ": unknown section [" +
                                   section + "]");
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw config_error("line " + std::to_string(line) + ": expected key = value");
        const std::string key = detail::trim(s.substr(0, eq));
        const std::string val = detail::trim(s.substr(eq + 1));
        if (section.empty())
            throw config_error("line " + std::to_string(line) + ": key '" + key +
                               "' outside any section");
        if (!known.at(section).count(key))
            throw config_error("line " + std::to_string(line) + ": unknown key '" + key +
                               "' in section [" + section + "]");
        const std::string qualified = section + "." + key;
        if (!seen.insert(qualified).second)
            throw config_error("line " + std::to_string(line) + ": duplicate key '" + qualified +
                               "'");
        if (val.empty())
            throw config_error("line " + std::to_string(line) + ": key '" + qualified +
                               "' has an empty value");

        if (section == "grid") {
            if (key == "nx") nx = detail::parse_int(val, key, line);
            else if (key == "ny") ny = detail::parse_int(val, key, line);
            else if (key == "lx") lx = detail::parse_double(val, key, line);
            else ly = detail::parse_double(val, key, line);
        } else if (section == "species") {
            if (key == "chi") cfg.chi = detail::parse_double(val, key, line);
            else if (key == "eps") cfg.eps = detail::parse_double(val, key, line);
            else if (key == "delta") cfg.delta = detail::parse_double(val, key, line);
            else cfg.sensitivity = detail::parse_sensitivity(val, line);
        } else if (section == "fluid") {
            if (key == "mode") {
                if (val == "navier_stokes") cfg.fluid_mode = FluidMode::navier_stokes;
                else if (val == "stokes") cfg.fluid_mode = FluidMode::stokes;
                else if (val == "none") cfg.fluid_mode = FluidMode::none;
                else
                    throw config_error("line " + std::to_string(line) + ": unknown fluid mode '" +
                                       val + "' (navier_stokes, stokes or none)");
            } else if (key == "phi") {
                const auto parts = detail::split(val, ':');
                if (parts[0] == "none" && parts.size() == 1) {
                    cfg.init.phi_kind = InitSpec::Potential::none;
                } else if (parts[0] == "linear_y" && parts.size() == 2) {
                    cfg.init.phi_kind = InitSpec::Potential::linear_y;
                    cfg.init.phi_coef = detail::parse_double(parts[1], key, line);
                } else {
                    throw config_error("line " + std::to_string(line) + ": unknown potential '" +
                                       val + "' (none or linear_y:G)");
                }
            } else {
                cfg.poisson_tol = detail::parse_double(val, key, line);
            }
        } else if (section == "init") {
            auto parse_scalar = [&](InitSpec::Scalar& kind, double& mean, double& amp) {
                const auto parts = detail::split(val, ':');
                if (parts[0] == "constant" && parts.size() == 2) {
                    kind = InitSpec::Scalar::constant;
                    mean = detail::parse_double(parts[1], key, line);
                    amp = 0.0;
                } else if (parts[0] == "cosine" && parts.size() == 3) {
                    kind = InitSpec::Scalar::cosine;
                    mean = detail::parse_double(parts[1], key, line);
                    amp = detail::parse_double(parts[2], key, line);
                } else if (parts[0] == "random" && parts.size() == 3) {
                    kind = InitSpec::Scalar::random;
                    mean = detail::parse_double(parts[1], key, line);
                    amp = detail::parse_double(parts[2], key, line);
                } else {
                    throw config_error("line " + std::to_string(line) + ": unknown initial data '" +
                                       val + "' (constant:V, cosine:MEAN:AMP or random:MEAN:AMP)");
                }
            };
            if (key == "n") parse_scalar(cfg.init.n_kind, cfg.init.n_mean, cfg.init.n_amp);
            else if (key == "c") parse_scalar(cfg.init.c_kind, cfg.init.c_mean, cfg.init.c_amp);
            else if (key == "u") {
                const auto parts = detail::split(val, ':');
                if (parts[0] == "none" && parts.size() == 1) {
                    cfg.init.u_kind = InitSpec::Velocity::none;
                } else if (parts[0] == "vortex" && parts.size() == 2) {
                    cfg.init.u_kind = InitSpec::Velocity::vortex;
                    cfg.init.u_amp = detail::parse_double(parts[1], key, line);
                } else {
                    throw config_error("line " + std::to_string(line) +
                                       ": unknown velocity init '" + val +
                                       "' (none or vortex:AMP)");
                }
            } else {
                cfg.seed = static_cast<unsigned>(detail::parse_int(val, key, line));
            }
        } else {  // run
            if (key == "t_end") cfg.t_end = detail::parse_double(val, key, line);
            else if (key == "dt_max") cfg.dt_max = detail::parse_double(val, key, line);
            else if (key == "cfl_safety") cfg.cfl_safety = detail::parse_double(val, key, line);
            else if (key == "report_every") cfg.report_every = detail::parse_int(val, key, line);
            else if (key == "diffusion") {
                if (val == "explicit") cfg.diffusion = DiffusionMode::explicit_euler;
                else if (val == "implicit") cfg.diffusion = DiffusionMode::implicit_euler;
                else
                    throw config_error("line " + std::to_string(line) +
                                       ": diffusion must be explicit or implicit");
            } else if (key == "conditional" || key == "stop_on_stabilization") {
                bool flag;
                if (val == "on" || val == "true") flag = true;
                else if (val == "off" || val == "false") flag = false;
                else
                    throw config_error("line " + std::to_string(line) + ": key '" + key +
                                       "' expects on/off");
                (key == "conditional" ? cfg.conditional : cfg.stop_on_stabilization) = flag;
            } else {  // eps_list
                cfg.eps_list.clear();
                for (const std::string& tok : detail::split(val, ','))
                    cfg.eps_list.push_back(detail::parse_double(detail::trim(tok), key, line));
            }
        }
    }

    cfg.grid = GridSpec(nx, ny, lx, ly);
    cfg.validate();

    // parse-time invariants on the initial data and hypotheses
    if (cfg.delta >= 0.0 && cfg.delta == 0.0)
        throw config_error(
            "species.delta = 0 rejected: the initial oxygen needs a strictly positive lower "
            "bound (c0 >= delta > 0)");
    const double c_min = cfg.init.c_kind == InitSpec::Scalar::constant
                             ? cfg.init.c_mean
                             : cfg.init.c_mean - std::abs(cfg.init.c_amp);
    if (!(c_min > 0.0))
        throw config_error("init.c must stay strictly positive (minimum is " +
                           std::to_string(c_min) + ")");
    if (cfg.delta > 0.0 && c_min < cfg.delta)
        throw config_error("init.c dips below species.delta (c0 >= delta required)");
    const double n_min = cfg.init.n_kind == InitSpec::Scalar::constant
                             ? cfg.init.n_mean
                             : cfg.init.n_mean - std::abs(cfg.init.n_amp);
    if (!(n_min > 0.0))
        throw config_error("init.n must be strictly positive so that ln n0 is integrable");
    if (cfg.conditional && !cfg.sensitivity.superlinear_at_zero())
        throw config_error(
            "conditional-functional experiment requested with a consumption function violating "
            "f'(0) = 0 (got f = " + cfg.sensitivity.describe() + "); use e.g. f = power:2");
    return cfg;
}

inline std::string serialize_config(const SimConfig& cfg) {
    std::ostringstream out;
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    out << "[grid]\n"
        << "nx = " << cfg.grid.nx << "\nny = " << cfg.grid.ny << "\nlx = " << num(cfg.grid.lx)
        << "\nly = " << num(cfg.grid.ly) << "\n\n[species]\nchi = " << num(cfg.chi)
        << "\neps = " << num(cfg.eps) << "\n";
    if (cfg.delta >= 0.0) out << "delta = " << num(cfg.delta) << "\n";
    out << "f = ";
    switch (cfg.sensitivity.kind()) {
        case SensitivitySpec::Kind::linear: out << "linear"; break;
        case SensitivitySpec::Kind::power: out << "power:" << num(cfg.sensitivity.exponent()); break;
        case SensitivitySpec::Kind::table: out << "table:(as constructed)"; break;
    }
    out << "\n\n[fluid]\nmode = "
        << (cfg.fluid_mode == FluidMode::navier_stokes
                ? "navier_stokes"
                : cfg.fluid_mode == FluidMode::stokes ? "stokes" : "none")
        << "\nphi = ";
    if (cfg.init.phi_kind == InitSpec::Potential::none) out << "none";
    else out << "linear_y:" << num(cfg.init.phi_coef);
    out << "\npoisson_tol = " << num(cfg.poisson_tol) << "\n\n[init]\n";
    auto scalar = [&](InitSpec::Scalar kind, double mean, double amp) {
        switch (kind) {
            case InitSpec::Scalar::constant: return "constant:" + num(mean);
            case InitSpec::Scalar::cosine: return "cosine:" + num(mean) + ":" + num(amp);
            case InitSpec::Scalar::random: return "random:" + num(mean) + ":" + num(amp);
        }
        return std::string();
    };
    out << "n = " << scalar(cfg.init.n_kind, cfg.init.n_mean, cfg.init.n_amp) << "\n"
        << "c = " << scalar(cfg.init.c_kind, cfg.init.c_mean, cfg.init.c_amp) << "\n"
        << "u = ";
    if (cfg.init.u_kind == InitSpec::Velocity::none) out << "none";
    else out << "vortex:" << num(cfg.init.u_amp);
    out << "\nseed = " << cfg.seed << "\n\n[run]\nt_end = " << num(cfg.t_end)
        << "\ndt_max = " << num(cfg.dt_max) << "\ncfl_safety = " << num(cfg.cfl_safety)
        << "\nreport_every = " << cfg.report_every << "\ndiffusion = "
        << (cfg.diffusion == DiffusionMode::implicit_euler ? "implicit" : "explicit")
        << "\nconditional = " << (cfg.conditional ? "on" : "off") << "\n";
    if (!cfg.eps_list.empty()) {
        out << "eps_list = ";
        for (std::size_t k = 0; k < cfg.eps_list.size(); ++k)
            out << (k ? "," : "") << num(cfg.eps_list[k]);
        out << "\n";
    }
    return out.str();
}

/// Experiment presets keyed to what they demonstrate. Every preset is a
/// fully-resolved configuration; "stabilization" doubles as the reference
/// setup the defaults are taken from.
inline SimConfig preset(const std::string& name) {
    SimConfig ref;  // the reference configuration (== defaults of parse_config)
    ref.grid = GridSpec(64, 64, 1.0, 1.0);
    ref.chi = 1.0;
    ref.eps = 1e-3;
    ref.sensitivity = SensitivitySpec::power(2.0, 1e30);
    ref.fluid_mode = FluidMode::navier_stokes;
    ref.poisson_tol = 1e-10;
    ref.init.n_kind = InitSpec::Scalar::cosine;
    ref.init.n_mean = 1.0;
    ref.init.n_amp = 0.5;
    ref.init.c_kind = InitSpec::Scalar::constant;
    ref.init.c_mean = 1.0;
    ref.init.u_kind = InitSpec::Velocity::vortex;
    ref.init.u_amp = 0.1;
    ref.init.phi_kind = InitSpec::Potential::linear_y;
    ref.init.phi_coef = 0.1;
    ref.t_end = 50.0;
    ref.dt_max = 5e-4;
    ref.cfl_safety = 0.8;
    ref.report_every = 100;
    ref.seed = 1;
    ref.diffusion = DiffusionMode::implicit_euler;

    if (name == "stabilization") return ref;
    if (name == "quasi-energy") {
        SimConfig cfg = ref;
        cfg.t_end = 2.0;
        cfg.report_every = 10;
        return cfg;
    }
    if (name == "uniform-integrability") {
        SimConfig cfg = ref;
        cfg.init.c_mean = 0.5;
        cfg.t_end = 10.0;
        cfg.report_every = 50;
        return cfg;
    }
    if (name == "conditional-energy") {
        SimConfig cfg = ref;
        cfg.init.c_mean = 0.05;
        cfg.init.u_amp = 0.05;
        cfg.t_end = 40.0;
        cfg.report_every = 20;
        cfg.conditional = true;
        return cfg;
    }
    if (name == "epsilon-family") {
        SimConfig cfg = ref;
        cfg.t_end = 5.0;
        cfg.report_every = 50;
        cfg.eps_list = {1e-1, 1e-2, 1e-3, 1e-4};
        return cfg;
    }
    if (name == "fluid-free-3d-proxy") {
        SimConfig cfg = ref;
        cfg.fluid_mode = FluidMode::none;
        cfg.init.u_kind = InitSpec::Velocity::none;
        cfg.init.phi_kind = InitSpec::Potential::none;
        return cfg;
    }
    throw config_error(
        "unknown preset '" + name +
        "'; valid names: quasi-energy, uniform-integrability, conditional-energy, stabilization, "
        "epsilon-family, fluid-free-3d-proxy");
}

} // namespace taxisim
