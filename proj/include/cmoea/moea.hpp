#ifndef CMOEA_MOEA_HPP
#define CMOEA_MOEA_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "core.hpp"
#include "rng.hpp"

namespace cmoea::moea {

// Deb's fast non-dominated sort; front 0 is the non-dominated set, front k
// the non-dominated set once fronts < k are removed.
inline std::vector<std::vector<std::size_t>> fast_nondominated_sort(
    const std::vector<ObjectiveVector>& pop) {
    detail::require(!pop.empty(), "fast_nondominated_sort: empty population");
    std::size_t n = pop.size();
    std::vector<std::vector<std::size_t>> dominated(n);
    std::vector<std::size_t> dom_count(n, 0);
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t q = p + 1; q < n; ++q) {
            if (dominates(pop[p], pop[q])) {
                dominated[p].push_back(q);
                ++dom_count[q];
            } else if (dominates(pop[q], pop[p])) {
                dominated[q].push_back(p);
                ++dom_count[p];
            }
        }
    std::vector<std::vector<std::size_t>> fronts;
    std::vector<std::size_t> current;
    for (std::size_t i = 0; i < n; ++i)
        if (dom_count[i] == 0) current.push_back(i);
    while (!current.empty()) {
        fronts.push_back(current);
        std::vector<std::size_t> next;
        for (std::size_t p : current)
            for (std::size_t q : dominated[p])
                if (--dom_count[q] == 0) next.push_back(q);
        current = std::move(next);
    }
    return fronts;
}

// Standard crowding distance within one front: boundary members get +inf,
// interior members accumulate (next - prev)/(max - min) per objective.
inline std::vector<double> crowding_distance(
    const std::vector<ObjectiveVector>& front) {
    detail::require(!front.empty(), "crowding_distance: empty front");
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::size_t n = front.size();
    std::size_t m = front[0].size();
    std::vector<double> dist(n, 0.0);
    std::vector<std::size_t> order(n);
    for (std::size_t j = 0; j < m; ++j) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (front[a][j] != front[b][j]) return front[a][j] < front[b][j];
            return a < b;
        });
        dist[order.front()] = inf;
        dist[order.back()] = inf;
        double lo = front[order.front()][j];
        double hi = front[order.back()][j];
        if (hi == lo) continue;
        for (std::size_t k = 1; k + 1 < n; ++k) {
            std::size_t i = order[k];
            if (dist[i] == inf) continue;
            dist[i] += (front[order[k + 1]][j] - front[order[k - 1]][j]) / (hi - lo);
        }
    }
    return dist;
}

struct RankInfo {
    std::vector<std::size_t> rank;
    std::vector<double> crowding;
};

inline RankInfo rank_and_crowding(const std::vector<ObjectiveVector>& pop) {
    RankInfo info;
    info.rank.assign(pop.size(), 0);
    info.crowding.assign(pop.size(), 0.0);
    auto fronts = fast_nondominated_sort(pop);
    for (std::size_t f = 0; f < fronts.size(); ++f) {
        std::vector<ObjectiveVector> members;
        members.reserve(fronts[f].size());
        for (std::size_t i : fronts[f]) members.push_back(pop[i]);
        std::vector<double> cd = crowding_distance(members);
        for (std::size_t k = 0; k < fronts[f].size(); ++k) {
            info.rank[fronts[f][k]] = f;
            info.crowding[fronts[f][k]] = cd[k];
        }
    }
    return info;
}

// Admit whole fronts in rank order; truncate the straddling front by
// descending crowding distance with random tie order.
inline std::vector<std::size_t> nsga2_survivor_select(
    const std::vector<ObjectiveVector>& pool, std::size_t n, Rng& rng) {
    detail::require(pool.size() >= n, "nsga2_survivor_select: pool too small");
    std::vector<std::size_t> selected;
    if (n == 0) return selected;
    auto fronts = fast_nondominated_sort(pool);
    for (const auto& front : fronts) {
        if (selected.size() + front.size() <= n) {
            selected.insert(selected.end(), front.begin(), front.end());
            if (selected.size() == n) break;
            continue;
        }
        std::vector<ObjectiveVector> members;
        members.reserve(front.size());
        for (std::size_t i : front) members.push_back(pool[i]);
        std::vector<double> cd = crowding_distance(members);
        std::vector<double> tie(front.size());
        for (double& t : tie) t = rng.uniform();
        std::vector<std::size_t> order(front.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (cd[a] != cd[b]) return cd[a] > cd[b];
            return tie[a] < tie[b];
        });
        for (std::size_t k = 0; selected.size() < n; ++k)
            selected.push_back(front[order[k]]);
        break;
    }
    return selected;
}

// Binary tournament on precomputed rank and crowding: lower rank wins, then
// larger crowding, then a coin flip.
inline std::size_t nsga2_parent_tournament(const RankInfo& info, Rng& rng) {
    std::size_t a = rng.uniform_index(info.rank.size());
    std::size_t b = rng.uniform_index(info.rank.size());
    if (info.rank[a] != info.rank[b]) return info.rank[a] < info.rank[b] ? a : b;
    if (info.crowding[a] != info.crowding[b])
        return info.crowding[a] > info.crowding[b] ? a : b;
    return rng.bernoulli(0.5) ? a : b;
}

enum class NormalizationMode { max, intercept };

namespace detail {

// Achievement scalarizing function with per-axis weights; zero weights are
// replaced by 1e-6.
inline double asf(const ObjectiveVector& x, const ObjectiveVector& w) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < x.size(); ++i) {
        double wi = w[i] == 0.0 ? 1e-6 : w[i];
        best = std::max(best, x[i] / wi);
    }
    return best;
}

// Solve E b = 1 by Gaussian elimination; false when near-singular.
inline bool solve_unit_rhs(std::vector<std::vector<double>> e,
                           std::vector<double>& b) {
    std::size_t m = e.size();
    std::vector<double> rhs(m, 1.0);
    for (std::size_t col = 0; col < m; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < m; ++r)
            if (std::abs(e[r][col]) > std::abs(e[piv][col])) piv = r;
        if (std::abs(e[piv][col]) < 1e-12) return false;
        std::swap(e[piv], e[col]);
        std::swap(rhs[piv], rhs[col]);
        for (std::size_t r = 0; r < m; ++r) {
            if (r == col) continue;
            double f = e[r][col] / e[col][col];
            for (std::size_t c = col; c < m; ++c) e[r][c] -= f * e[col][c];
            rhs[r] -= f * rhs[col];
        }
    }
    b.resize(m);
    for (std::size_t i = 0; i < m; ++i) b[i] = rhs[i] / e[i][i];
    return true;
}

} // namespace detail

// Max mode (default): per objective, subtract the population minimum and
// divide by the maximum of the shifted values (all-zeros if that maximum is
// 0). Intercept mode: extreme points minimize the ASF per axis; shifted
// scores are divided by the hyperplane intercepts, falling back to max mode
// when the hyperplane is undefined or an intercept is not positive.
inline std::vector<ObjectiveVector> nsga3_normalize(
    const std::vector<ObjectiveVector>& pool, NormalizationMode mode) {
    cmoea::detail::require(!pool.empty(), "nsga3_normalize: empty pool");
    std::size_t m = pool[0].size();
    ObjectiveVector mins(m, std::numeric_limits<double>::infinity());
    for (const auto& v : pool)
        for (std::size_t j = 0; j < m; ++j) mins[j] = std::min(mins[j], v[j]);
    std::vector<ObjectiveVector> shifted(pool.size(), ObjectiveVector(m));
    for (std::size_t i = 0; i < pool.size(); ++i)
        for (std::size_t j = 0; j < m; ++j) shifted[i][j] = pool[i][j] - mins[j];

    if (mode == NormalizationMode::intercept) {
        std::vector<std::vector<double>> extremes;
        for (std::size_t axis = 0; axis < m; ++axis) {
            ObjectiveVector w(m, 0.0);
            w[axis] = 1.0;
            std::size_t best = 0;
            double best_asf = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < shifted.size(); ++i) {
                double a = detail::asf(shifted[i], w);
                if (a < best_asf) {
                    best_asf = a;
                    best = i;
                }
            }
            extremes.push_back(shifted[best]);
        }
        std::vector<double> b;
        if (detail::solve_unit_rhs(extremes, b)) {
            bool ok = true;
            ObjectiveVector intercepts(m);
            for (std::size_t j = 0; j < m; ++j) {
                intercepts[j] = 1.0 / b[j];
                if (!(intercepts[j] > 0.0) || !std::isfinite(intercepts[j]))
                    ok = false;
            }
            if (ok) {
                for (auto& v : shifted)
                    for (std::size_t j = 0; j < m; ++j) v[j] /= intercepts[j];
                return shifted;
            }
        }
    }

    ObjectiveVector maxs(m, 0.0);
    for (const auto& v : shifted)
        for (std::size_t j = 0; j < m; ++j) maxs[j] = std::max(maxs[j], v[j]);
    for (auto& v : shifted)
        for (std::size_t j = 0; j < m; ++j)
            v[j] = maxs[j] == 0.0 ? 0.0 : v[j] / maxs[j];
    return shifted;
}

namespace detail {

inline double lattice_count(std::size_t m, std::size_t h) {
    double c = 1.0;   // C(h + m - 1, m - 1)
    for (std::size_t i = 1; i < m; ++i)
        c = c * static_cast<double>(h + i) / static_cast<double>(i);
    return c;
}

inline void enumerate_lattice(std::size_t m, std::size_t h, std::size_t left,
                              std::size_t dim, std::vector<double>& current,
                              std::vector<ObjectiveVector>& out) {
    if (dim + 1 == m) {
        current[dim] = static_cast<double>(left) / static_cast<double>(h);
        out.push_back(current);
        return;
    }
    for (std::size_t take = left + 1; take-- > 0;) {
        current[dim] = static_cast<double>(take) / static_cast<double>(h);
        enumerate_lattice(m, h, left - take, dim + 1, current, out);
    }
}

} // namespace detail

// Systematic simplex-lattice directions with H divisions, H chosen so the
// lattice size is as close as possible to target_count (ties prefer the
// smaller H); the equal-weights line is appended when the lattice misses it.
inline std::vector<ObjectiveVector> reference_lines(std::size_t m,
                                                    std::size_t target_count) {
    cmoea::detail::require(m >= 2 && target_count >= 1,
                           "reference_lines: need m >= 2 and target >= 1");
    std::size_t best_h = 1;
    double best_diff = std::numeric_limits<double>::infinity();
    for (std::size_t h = 1;; ++h) {
        double c = detail::lattice_count(m, h);
        double diff = std::abs(c - static_cast<double>(target_count));
        if (diff < best_diff) {
            best_diff = diff;
            best_h = h;
        }
        if (c >= static_cast<double>(target_count) || c > 1e15) break;
    }
    std::vector<ObjectiveVector> lines;
    std::vector<double> current(m, 0.0);
    detail::enumerate_lattice(m, best_h, best_h, 0, current, lines);
    bool has_equal = false;
    for (const auto& l : lines) {
        bool eq = true;
        for (double x : l)
            if (std::abs(x - 1.0 / static_cast<double>(m)) > 1e-12) eq = false;
        if (eq) has_equal = true;
    }
    if (!has_equal)
        lines.push_back(ObjectiveVector(m, 1.0 / static_cast<double>(m)));
    return lines;
}

namespace detail {

inline double perpendicular_distance(const ObjectiveVector& p,
                                     const ObjectiveVector& line) {
    double ll = 0.0, pl = 0.0, pp = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
        ll += line[j] * line[j];
        pl += p[j] * line[j];
        pp += p[j] * p[j];
    }
    double along = pl * pl / ll;
    return std::sqrt(std::max(0.0, pp - along));
}

} // namespace detail

// NSGA-II style front admission; the straddling front is filled by
// reference-line niching: each member associates with its nearest line, the
// first pass takes every line's closest member, and later passes cycle over
// lines in ascending niche-count order taking one random member per visit.
inline std::vector<std::size_t> nsga3_survivor_select(
    const std::vector<ObjectiveVector>& pool, std::size_t n,
    const std::vector<ObjectiveVector>& lines, Rng& rng,
    NormalizationMode mode = NormalizationMode::max) {
    cmoea::detail::require(pool.size() >= n,
                           "nsga3_survivor_select: pool too small");
    std::vector<std::size_t> selected;
    if (n == 0) return selected;
    auto fronts = fast_nondominated_sort(pool);
    std::size_t f = 0;
    for (; f < fronts.size(); ++f) {
        if (selected.size() + fronts[f].size() > n) break;
        selected.insert(selected.end(), fronts[f].begin(), fronts[f].end());
        if (selected.size() == n) return selected;
    }
    const std::vector<std::size_t>& straddle = fronts[f];

    auto normalized = nsga3_normalize(pool, mode);
    std::vector<std::vector<std::size_t>> per_line(lines.size());
    std::vector<std::vector<double>> per_line_dist(lines.size());
    for (std::size_t i : straddle) {
        std::size_t best_line = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t l = 0; l < lines.size(); ++l) {
            double d = detail::perpendicular_distance(normalized[i], lines[l]);
            if (d < best_d) {
                best_d = d;
                best_line = l;
            }
        }
        per_line[best_line].push_back(i);
        per_line_dist[best_line].push_back(best_d);
    }
    std::vector<std::size_t> niche_count(lines.size(), 0);
    auto take = [&](std::size_t line, std::size_t pos) {
        selected.push_back(per_line[line][pos]);
        per_line[line].erase(per_line[line].begin() + static_cast<std::ptrdiff_t>(pos));
        per_line_dist[line].erase(per_line_dist[line].begin() +
                                  static_cast<std::ptrdiff_t>(pos));
        ++niche_count[line];
    };
    for (std::size_t l = 0; l < lines.size() && selected.size() < n; ++l) {
        if (per_line[l].empty()) continue;
        std::size_t best = 0;
        for (std::size_t k = 1; k < per_line_dist[l].size(); ++k)
            if (per_line_dist[l][k] < per_line_dist[l][best]) best = k;
        take(l, best);
    }
    while (selected.size() < n) {
        std::vector<std::size_t> order;
        for (std::size_t l = 0; l < lines.size(); ++l)
            if (!per_line[l].empty()) order.push_back(l);
        std::vector<double> tie(order.size());
        for (double& t : tie) t = rng.uniform();
        std::vector<std::size_t> idx(order.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            if (niche_count[order[a]] != niche_count[order[b]])
                return niche_count[order[a]] < niche_count[order[b]];
            return tie[a] < tie[b];
        });
        for (std::size_t k : idx) {
            if (selected.size() == n) break;
            std::size_t l = order[k];
            if (per_line[l].empty()) continue;
            take(l, rng.uniform_index(per_line[l].size()));
        }
    }
    return selected;
}

// ---- lexicase family ----

enum class LexicaseVariant { plain, static_eps, semi_dynamic, dynamic };
enum class EpsilonMode { fixed, mad };

struct LexicaseConfig {
    LexicaseVariant variant = LexicaseVariant::plain;
    EpsilonMode epsilon_mode = EpsilonMode::fixed;
    double fixed_epsilon = 0.0;
};

// Median absolute deviation with the lower median on even counts.
inline double mad(std::vector<double> values) {
    cmoea::detail::require(!values.empty(), "mad: empty input");
    auto lower_median = [](std::vector<double>& v) {
        std::size_t k = (v.size() - 1) / 2;
        std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k),
                         v.end());
        return v[k];
    };
    double med = lower_median(values);
    for (double& x : values) x = std::abs(x - med);
    return lower_median(values);
}

namespace detail {

// One lexicase selection over the alive subset of pool, objectives visited
// in the given order; returns a position within alive.
inline std::size_t lexicase_pick(const std::vector<ObjectiveVector>& pool,
                                 const std::vector<std::size_t>& alive,
                                 const std::vector<std::size_t>& order,
                                 Rng& rng, const LexicaseConfig& cfg) {
    std::vector<std::size_t> cand(alive.size());
    std::iota(cand.begin(), cand.end(), std::size_t{0});
    std::vector<double> col;
    for (std::size_t j : order) {
        if (cand.size() == 1) break;
        double thr, eps;
        auto max_over = [&](bool whole) {
            double m = -std::numeric_limits<double>::infinity();
            if (whole)
                for (std::size_t a : alive) m = std::max(m, pool[a][j]);
            else
                for (std::size_t c : cand) m = std::max(m, pool[alive[c]][j]);
            return m;
        };
        auto mad_over = [&](bool whole) {
            col.clear();
            if (whole)
                for (std::size_t a : alive) col.push_back(pool[a][j]);
            else
                for (std::size_t c : cand) col.push_back(pool[alive[c]][j]);
            return mad(col);
        };
        switch (cfg.variant) {
            case LexicaseVariant::plain:
                thr = max_over(false);
                eps = 0.0;
                break;
            case LexicaseVariant::static_eps:
                thr = max_over(true);
                eps = cfg.epsilon_mode == EpsilonMode::fixed ? cfg.fixed_epsilon
                                                             : mad_over(true);
                break;
            case LexicaseVariant::semi_dynamic:
                thr = max_over(false);
                eps = cfg.epsilon_mode == EpsilonMode::fixed ? cfg.fixed_epsilon
                                                             : mad_over(true);
                break;
            default:   // dynamic
                thr = max_over(false);
                eps = mad_over(false);
                break;
        }
        std::vector<std::size_t> next;
        for (std::size_t c : cand)
            if (pool[alive[c]][j] >= thr - eps) next.push_back(c);
        // the static threshold can exclude every candidate; skip such
        // objectives rather than emptying the set
        if (!next.empty()) cand = std::move(next);
    }
    return cand[rng.uniform_index(cand.size())];
}

inline std::vector<std::size_t> shuffled_objectives(std::size_t m, Rng& rng) {
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    return order;
}

} // namespace detail

// Deterministic-order variant used by tests; the public entry point
// shuffles the objective order uniformly first.
inline std::size_t lexicase_select_ordered(
    const std::vector<ObjectiveVector>& pop,
    const std::vector<std::size_t>& order, Rng& rng,
    const LexicaseConfig& cfg) {
    cmoea::detail::require(!pop.empty(), "lexicase_select: empty population");
    std::vector<std::size_t> alive(pop.size());
    std::iota(alive.begin(), alive.end(), std::size_t{0});
    return alive[detail::lexicase_pick(pop, alive, order, rng, cfg)];
}

inline std::size_t lexicase_select(const std::vector<ObjectiveVector>& pop,
                                   Rng& rng, const LexicaseConfig& cfg) {
    cmoea::detail::require(!pop.empty(), "lexicase_select: empty population");
    auto order = detail::shuffled_objectives(pop[0].size(), rng);
    return lexicase_select_ordered(pop, order, rng, cfg);
}

// Repeated selection with removal until n survivors are chosen.
inline std::vector<std::size_t> lexicase_survivor_select(
    const std::vector<ObjectiveVector>& pool, std::size_t n, Rng& rng,
    const LexicaseConfig& cfg) {
    cmoea::detail::require(pool.size() >= n, "lexicase_survivor_select: pool too small");
    std::vector<std::size_t> alive(pool.size());
    std::iota(alive.begin(), alive.end(), std::size_t{0});
    std::vector<std::size_t> selected;
    selected.reserve(n);
    while (selected.size() < n) {
        auto order = detail::shuffled_objectives(pool[0].size(), rng);
        std::size_t pos = detail::lexicase_pick(pool, alive, order, rng, cfg);
        selected.push_back(alive[pos]);
        alive[pos] = alive.back();
        alive.pop_back();
    }
    return selected;
}

} // namespace cmoea::moea

#endif
