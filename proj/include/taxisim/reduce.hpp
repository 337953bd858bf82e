#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace taxisim {

/// Deterministic pairwise summation. The recursion tree depends only on the
/// length of the input, so reruns over identical data are bit-identical and
/// round-off grows like O(log n) instead of O(n) over long accumulations.
inline double pairwise_sum(std::span<const double> v) {
    constexpr std::size_t kBlock = 32;
    const std::size_t n = v.size();
    if (n <= kBlock) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

inline double pairwise_sum(const std::vector<double>& v) {
    return pairwise_sum(std::span<const double>(v.data(), v.size()));
}

} // namespace taxisim
