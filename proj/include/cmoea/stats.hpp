#ifndef CMOEA_STATS_HPP
#define CMOEA_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "core.hpp"
#include "rng.hpp"

namespace cmoea::stats {

namespace detail {

// Average ranks of the pooled sample (ties share the mean rank).
inline std::vector<double> pooled_ranks(std::vector<double> pooled) {
    std::vector<std::size_t> order(pooled.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
    std::vector<double> ranks(pooled.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() &&
               pooled[order[j + 1]] == pooled[order[i]])
            ++j;
        double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

} // namespace detail

// Two-sided Mann-Whitney U test. Exact enumeration (conditional on the
// observed ties) when both samples have at most 8 values, otherwise the
// tie-corrected normal approximation with continuity correction.
inline double mann_whitney_u(const std::vector<double>& a,
                             const std::vector<double>& b) {
    cmoea::detail::require(!a.empty() && !b.empty(),
                           "mann_whitney_u: empty sample");
    std::size_t n1 = a.size(), n2 = b.size(), n = n1 + n2;
    std::vector<double> pooled;
    pooled.reserve(n);
    pooled.insert(pooled.end(), a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    std::vector<double> ranks = detail::pooled_ranks(pooled);
    double ra = 0.0;
    for (std::size_t i = 0; i < n1; ++i) ra += ranks[i];
    double u_obs = ra - static_cast<double>(n1) * (n1 + 1) / 2.0;
    double mu = static_cast<double>(n1) * static_cast<double>(n2) / 2.0;

    if (n1 <= 8 && n2 <= 8) {
        // Enumerate every assignment of n1 pooled positions to group a.
        std::vector<double> sorted_ranks = ranks;
        double dev = std::abs(u_obs - mu);
        std::uint64_t total = 0, extreme = 0;
        std::uint32_t full = std::uint32_t{1} << n;
        for (std::uint32_t mask = 0; mask < full; ++mask) {
            if (static_cast<std::size_t>(__builtin_popcount(mask)) != n1)
                continue;
            double r = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                if (mask & (std::uint32_t{1} << i)) r += sorted_ranks[i];
            double u = r - static_cast<double>(n1) * (n1 + 1) / 2.0;
            ++total;
            if (std::abs(u - mu) >= dev - 1e-12) ++extreme;
        }
        return static_cast<double>(extreme) / static_cast<double>(total);
    }

    // Tie-corrected variance.
    std::vector<double> sorted = pooled;
    std::sort(sorted.begin(), sorted.end());
    double tie_term = 0.0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
        double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    double nn = static_cast<double>(n);
    double var = static_cast<double>(n1) * static_cast<double>(n2) / 12.0 *
                 ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
    if (var <= 0.0) return 1.0;
    double z = (std::abs(u_obs - mu) - 0.5) / std::sqrt(var);
    if (z < 0.0) z = 0.0;
    double p = std::erfc(z / std::sqrt(2.0));
    return std::min(1.0, p);
}

namespace detail {

inline double median_of(std::vector<double>& v) {
    std::size_t n = v.size();
    auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (n % 2 == 1) return *mid;
    double hi = *mid;
    double lo = *std::max_element(v.begin(), mid);
    return (lo + hi) / 2.0;
}

} // namespace detail

inline double median(std::vector<double> values) {
    cmoea::detail::require(!values.empty(), "median: empty input");
    return detail::median_of(values);
}

// Percentile bootstrap confidence interval for the median.
inline std::pair<double, double> bootstrap_median_ci(
    const std::vector<double>& samples, std::size_t resamples, double level,
    Rng& rng) {
    cmoea::detail::require(!samples.empty(), "bootstrap_median_ci: empty input");
    cmoea::detail::require(level > 0.0 && level < 1.0 && resamples >= 1,
                           "bootstrap_median_ci: bad parameters");
    std::vector<double> medians(resamples);
    std::vector<double> buf(samples.size());
    for (std::size_t r = 0; r < resamples; ++r) {
        for (double& x : buf) x = samples[rng.uniform_index(samples.size())];
        medians[r] = detail::median_of(buf);
    }
    std::sort(medians.begin(), medians.end());
    double alpha2 = (1.0 - level) / 2.0;
    auto lo_idx = static_cast<std::size_t>(
        std::floor(alpha2 * static_cast<double>(resamples - 1)));
    auto hi_idx = static_cast<std::size_t>(
        std::ceil((1.0 - alpha2) * static_cast<double>(resamples - 1)));
    return {medians[lo_idx], medians[hi_idx]};
}

// Centered median filter; windows are truncated at the series edges.
inline std::vector<double> median_filter(const std::vector<double>& series,
                                         std::size_t window) {
    cmoea::detail::require(window % 2 == 1 && window >= 1,
                           "median_filter: window must be odd");
    std::vector<double> out(series.size());
    std::size_t half = window / 2;
    std::vector<double> buf;
    for (std::size_t i = 0; i < series.size(); ++i) {
        std::size_t lo = i >= half ? i - half : 0;
        std::size_t hi = std::min(series.size() - 1, i + half);
        buf.assign(series.begin() + static_cast<std::ptrdiff_t>(lo),
                   series.begin() + static_cast<std::ptrdiff_t>(hi + 1));
        out[i] = detail::median_of(buf);
    }
    return out;
}

struct SignificanceBands {
    std::vector<bool> positive;    // p < alpha / treatment_count
    std::vector<bool> valid;       // member of a long-enough run
    std::size_t required_run_length = 0;
};

// Smallest run length L such that, with k tests at the corrected alpha, a
// full run of false positives stays below alpha. The bound
// (1 + alpha/2) / alpha^(L-1) reproduces the published brackets: 2
// consecutive suffice for up to 20 tests, 3 for up to 410 (alpha = 0.05).
inline std::size_t required_run_length(std::size_t test_count, double alpha) {
    if (alpha >= 1.0) return std::numeric_limits<std::size_t>::max();
    if (test_count <= 1) return 2;
    double bound = 1.0 + alpha / 2.0;
    for (std::size_t len = 2; len <= 64; ++len) {
        bound /= alpha;
        // tolerance: 1.025/0.0025 lands a hair under the exact 410
        if (static_cast<double>(test_count) <= bound * (1.0 + 1e-12) + 1e-9)
            return len;
    }
    return std::numeric_limits<std::size_t>::max();
}

inline SignificanceBands significance_bands(const std::vector<double>& p_values,
                                            double alpha,
                                            std::size_t treatment_count) {
    double corrected =
        alpha / static_cast<double>(std::max<std::size_t>(1, treatment_count));
    SignificanceBands out;
    out.positive.resize(p_values.size());
    out.valid.assign(p_values.size(), false);
    for (std::size_t i = 0; i < p_values.size(); ++i)
        out.positive[i] = p_values[i] < corrected;
    out.required_run_length = required_run_length(p_values.size(), corrected);
    std::size_t i = 0;
    while (i < p_values.size()) {
        if (!out.positive[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < p_values.size() && out.positive[j + 1]) ++j;
        if (j - i + 1 >= out.required_run_length)
            for (std::size_t k = i; k <= j; ++k) out.valid[k] = true;
        i = j + 1;
    }
    return out;
}

} // namespace cmoea::stats

#endif
