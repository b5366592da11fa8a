#pragma once

#include <algorithm>
#include <vector>

#include "qcomb/core.hpp"

namespace qcomb {

/// Sorts one time step's quantile values into non-decreasing order
/// (stable, so tied values keep their relative position).
inline std::vector<double> rearrange_row(std::vector<double> row) {
    std::stable_sort(row.begin(), row.end());
    return row;
}

/// Applies the naive rearrangement to every time step.
inline CombinedForecast rearrange(const CombinedForecast& f) {
    const std::size_t T = f.steps();
    const std::size_t Q = f.levels();
    std::vector<double> vals(f.values());
    for (std::size_t t = 0; t < T; ++t)
        std::stable_sort(vals.begin() + static_cast<std::ptrdiff_t>(t * Q),
                         vals.begin() + static_cast<std::ptrdiff_t>((t + 1) * Q));
    return CombinedForecast(f.time(), f.grid(), std::move(vals), true);
}

/// Number of time steps containing at least one adjacent quantile
/// crossing (a strictly decreasing neighbor pair).
inline std::size_t crossing_count(const CombinedForecast& f) {
    const std::size_t T = f.steps();
    const std::size_t Q = f.levels();
    std::size_t crossed = 0;
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t k = 1; k < Q; ++k) {
            if (f.value(t, k) < f.value(t, k - 1)) {
                ++crossed;
                break;
            }
        }
    }
    return crossed;
}

} // namespace qcomb
