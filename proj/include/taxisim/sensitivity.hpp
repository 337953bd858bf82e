#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "taxisim/grid.hpp"

namespace taxisim {

/// Oxygen consumption rate function f. The solver needs f itself, its
/// derivative, and the quotient f(s)/s extended continuously by f'(0) at s=0;
/// the small-s behaviour of that quotient is what separates superlinear decay
/// (f'(0)=0, e.g. f(s)=s^2) from the linear case f(s)=s.
class SensitivitySpec {
  public:
    enum class Kind { power, linear, table };

    static SensitivitySpec power(double exponent, double c_max = 1.0) {
        if (!(exponent >= 1.0))
            throw sim_error("sensitivity: power exponent must be >= 1, got " +
                            std::to_string(exponent));
        SensitivitySpec s;
        s.kind_ = Kind::power;
        s.exponent_ = exponent;
        s.c_max_ = c_max;
        return s;
    }

    static SensitivitySpec linear(double c_max = 1.0) {
        SensitivitySpec s;
        s.kind_ = Kind::linear;
        s.c_max_ = c_max;
        return s;
    }

    /// Piecewise-linear table (s_k, f_k); requires s_0 = 0, f_0 = 0, strictly
    /// increasing s_k and f_k > 0 for k > 0.
    static SensitivitySpec from_table(std::vector<std::pair<double, double>> nodes) {
        if (nodes.size() < 2) throw sim_error("sensitivity table: need at least two nodes");
        if (nodes.front().first != 0.0 || nodes.front().second != 0.0)
            throw sim_error("sensitivity table: first node must be (0, 0)");
        for (std::size_t k = 1; k < nodes.size(); ++k) {
            if (!(nodes[k].first > nodes[k - 1].first))
                throw sim_error("sensitivity table: abscissae must be strictly increasing");
            if (!(nodes[k].second > 0.0))
                throw sim_error("sensitivity table: f must be positive away from zero");
        }
        SensitivitySpec s;
        s.kind_ = Kind::table;
        s.nodes_ = std::move(nodes);
        s.c_max_ = s.nodes_.back().first;
        return s;
    }

    Kind kind() const { return kind_; }
    double exponent() const { return exponent_; }
    double c_max() const { return c_max_; }

    double f(double s) const {
        switch (kind_) {
            case Kind::power: return std::pow(s, exponent_);
            case Kind::linear: return s;
            case Kind::table: return table_eval(s).first;
        }
        return 0.0;
    }

    double fprime(double s) const {
        switch (kind_) {
            case Kind::power:
                if (s == 0.0) return exponent_ > 1.0 ? 0.0 : 1.0;
                return exponent_ * std::pow(s, exponent_ - 1.0);
            case Kind::linear: return 1.0;
            case Kind::table: return table_eval(s).second;
        }
        return 0.0;
    }

    /// f(s)/s with the removable singularity at s=0 filled by f'(0).
    double ratio(double s) const {
        if (s == 0.0) return fprime(0.0);
        switch (kind_) {
            case Kind::power: return std::pow(s, exponent_ - 1.0);
            case Kind::linear: return 1.0;
            case Kind::table: return table_eval(s).first / s;
        }
        return 0.0;
    }

    /// Whether f decays superlinearly near zero (f'(0) = 0), the hypothesis
    /// behind the conditional energy machinery.
    bool superlinear_at_zero() const { return fprime(0.0) == 0.0; }

    std::string describe() const {
        switch (kind_) {
            case Kind::power: return "power:" + std::to_string(exponent_);
            case Kind::linear: return "linear";
            case Kind::table: return "table(" + std::to_string(nodes_.size()) + " nodes)";
        }
        return "?";
    }

  private:
    // (f, f') of the interpolant; derivative is the segment slope, with the
    // right-hand slope used at interior nodes and clamping beyond the range.
    std::pair<double, double> table_eval(double s) const {
        if (s <= 0.0) return {0.0, slope(0)};
        if (s >= nodes_.back().first) return {nodes_.back().second, slope(nodes_.size() - 2)};
        std::size_t hi = 1;
        while (nodes_[hi].first < s) ++hi;
        const std::size_t lo = hi - 1;
        const double t = (s - nodes_[lo].first) / (nodes_[hi].first - nodes_[lo].first);
        return {nodes_[lo].second + t * (nodes_[hi].second - nodes_[lo].second), slope(lo)};
    }

    double slope(std::size_t seg) const {
        return (nodes_[seg + 1].second - nodes_[seg].second) /
               (nodes_[seg + 1].first - nodes_[seg].first);
    }

    Kind kind_ = Kind::linear;
    double exponent_ = 1.0;
    double c_max_ = 1.0;
    std::vector<std::pair<double, double>> nodes_;
};

/// Evaluate (f, f') with the stated-range check.
inline std::pair<double, double> sensitivity_eval(const SensitivitySpec& spec, double s) {
    if (!(s >= 0.0) || s > spec.c_max() * (1.0 + 1e-12))
        throw sim_error("sensitivity_eval: argument " + std::to_string(s) +
                        " outside [0, " + std::to_string(spec.c_max()) + "]");
    return {spec.f(s), spec.fprime(s)};
}

} // namespace taxisim
