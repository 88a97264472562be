#ifndef CMOEA_CORE_HPP
#define CMOEA_CORE_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cmoea {

using ObjectiveVector = std::vector<double>;
using BehaviorDescriptor = std::vector<double>;

namespace detail {

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

} // namespace detail

enum class Aggregation { mean, product };

// Pareto dominance, higher is better: a dominates b when a is at least as
// good everywhere and strictly better somewhere.
inline bool dominates(const ObjectiveVector& a, const ObjectiveVector& b) {
    detail::require(a.size() == b.size(), "dominates: length mismatch");
    bool strictly_better = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] < b[i]) return false;
        if (a[i] > b[i]) strictly_better = true;
    }
    return strictly_better;
}

// Arithmetic mean of all objectives.
inline double combined_target(const ObjectiveVector& v) {
    detail::require(!v.empty(), "combined_target: empty vector");
    double sum = 0.0;
    for (double x : v) sum += x;
    return sum / static_cast<double>(v.size());
}

inline ObjectiveVector augment_with_ct(const ObjectiveVector& v) {
    ObjectiveVector out = v;
    out.push_back(combined_target(v));
    return out;
}

// Aggregate score over a subset of objectives; scores must lie in [0, 1].
inline double aggregate(const ObjectiveVector& v,
                        const std::vector<std::size_t>& subset,
                        Aggregation mode) {
    detail::require(!subset.empty(), "aggregate: empty subset");
    double acc = (mode == Aggregation::product) ? 1.0 : 0.0;
    for (std::size_t idx : subset) {
        detail::require(idx < v.size(), "aggregate: index out of range");
        double s = v[idx];
        detail::require(s >= 0.0 && s <= 1.0,
                        "aggregate: score outside [0, 1]");
        if (mode == Aggregation::product)
            acc *= s;
        else
            acc += s;
    }
    return (mode == Aggregation::product)
               ? acc
               : acc / static_cast<double>(subset.size());
}

inline double manhattan_distance(const BehaviorDescriptor& a,
                                 const BehaviorDescriptor& b) {
    detail::require(a.size() == b.size(), "manhattan_distance: length mismatch");
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
    return d;
}

template <typename Genome>
struct Individual {
    std::uint64_t id = 0;
    std::uint32_t birth_generation = 0;
    Genome genome;
    ObjectiveVector objectives;
    BehaviorDescriptor descriptor;
};

} // namespace cmoea

#endif
