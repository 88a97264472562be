#ifndef CMOEA_BINS_HPP
#define CMOEA_BINS_HPP

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "core.hpp"
#include "moea.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace cmoea::bins {

template <typename G>
struct BinMember {
    Individual<G> ind;
    double aggregate = 0.0;   // over the bin's subtask set
    double diversity = 0.0;   // mean descriptor distance to the other members
};

template <typename G>
struct Bin {
    std::vector<std::size_t> subtask_set;
    std::vector<BinMember<G>> members;
    bool is_dynamic = false;
    Aggregation aggregation = Aggregation::mean;
};

template <typename G>
struct BinArchive {
    std::vector<Bin<G>> bins;
    std::size_t subtask_count = 0;
    std::size_t bin_size = 0;
    std::uint64_t next_individual_id = 0;
    std::uint64_t reassign_count = 0;
};

namespace detail {

inline std::vector<std::size_t> random_subtask_set(std::size_t m, Rng& rng) {
    std::vector<std::size_t> set;
    while (set.empty())
        for (std::size_t i = 0; i < m; ++i)
            if (rng.bernoulli(0.5)) set.push_back(i);
    return set;
}

} // namespace detail

// Exhaustive mode (no cap): one bin per non-empty subtask subset. Sampled
// mode: the all-tasks bin, one singleton per subtask, and dynamic bins with
// random half-density subtask sets up to the cap.
template <typename G>
BinArchive<G> init_bins(std::size_t m, std::optional<std::size_t> cap,
                        Rng& rng, std::size_t bin_size,
                        Aggregation aggregation = Aggregation::mean) {
    cmoea::detail::require(m >= 1, "init_bins: need at least one subtask");
    cmoea::detail::require(bin_size >= 1, "init_bins: bin_size must be >= 1");
    BinArchive<G> ar;
    ar.subtask_count = m;
    ar.bin_size = bin_size;
    auto make_bin = [&](std::vector<std::size_t> set, bool dynamic) {
        Bin<G> b;
        b.subtask_set = std::move(set);
        b.is_dynamic = dynamic;
        b.aggregation = aggregation;
        ar.bins.push_back(std::move(b));
    };
    if (!cap) {
        cmoea::detail::require(
            m <= 20, "init_bins: exhaustive bins infeasible for m > 20, set a cap");
        for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << m); ++mask) {
            std::vector<std::size_t> set;
            for (std::size_t i = 0; i < m; ++i)
                if (mask & (std::uint64_t{1} << i)) set.push_back(i);
            make_bin(std::move(set), false);
        }
        return ar;
    }
    cmoea::detail::require(*cap >= m + 1, "init_bins: cap must be >= m + 1");
    std::vector<std::size_t> all(m);
    for (std::size_t i = 0; i < m; ++i) all[i] = i;
    make_bin(std::move(all), false);
    for (std::size_t i = 0; i < m; ++i)
        make_bin(std::vector<std::size_t>{i}, false);
    for (std::size_t i = m + 1; i < *cap; ++i)
        make_bin(detail::random_subtask_set(m, rng), true);
    return ar;
}

namespace detail {

template <typename G>
void refresh_member_diversity(Bin<G>& bin) {
    for (auto& m : bin.members) m.diversity = 0.0;
    if (bin.members.size() < 2) return;
    for (std::size_t i = 0; i < bin.members.size(); ++i)
        for (std::size_t j = i + 1; j < bin.members.size(); ++j) {
            double d = manhattan_distance(bin.members[i].ind.descriptor,
                                          bin.members[j].ind.descriptor);
            bin.members[i].diversity += d;
            bin.members[j].diversity += d;
        }
    for (auto& m : bin.members)
        m.diversity /= static_cast<double>(bin.members.size() - 1);
}

} // namespace detail

// Two-objective NSGA-II survivor selection over residents plus children:
// objective 1 is the aggregate over the bin's subtask set, objective 2 the
// mean descriptor distance to all other candidates in this bin's pool.
template <typename G>
void within_bin_select(Bin<G>& bin,
                       const std::vector<const Individual<G>*>& children,
                       std::size_t bin_size, Rng& rng) {
    std::vector<const Individual<G>*> pool;
    pool.reserve(bin.members.size() + children.size());
    for (const auto& m : bin.members) pool.push_back(&m.ind);
    for (const Individual<G>* c : children) pool.push_back(c);

    std::size_t n = pool.size();
    std::vector<ObjectiveVector> bin_obj(n, ObjectiveVector(2, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        bin_obj[i][0] =
            aggregate(pool[i]->objectives, bin.subtask_set, bin.aggregation);
    if (n >= 2) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                double d = manhattan_distance(pool[i]->descriptor,
                                              pool[j]->descriptor);
                bin_obj[i][1] += d;
                bin_obj[j][1] += d;
            }
        for (std::size_t i = 0; i < n; ++i)
            bin_obj[i][1] /= static_cast<double>(n - 1);
    }

    std::vector<std::size_t> keep;
    if (n <= bin_size) {
        keep.resize(n);
        for (std::size_t i = 0; i < n; ++i) keep[i] = i;
    } else {
        keep = moea::nsga2_survivor_select(bin_obj, bin_size, rng);
    }
    std::vector<BinMember<G>> next;
    next.reserve(keep.size());
    for (std::size_t i : keep)
        next.push_back({*pool[i], bin_obj[i][0], 0.0});
    bin.members = std::move(next);
    detail::refresh_member_diversity(bin);
}

// Every initial individual becomes a candidate in every bin, then each bin
// truncates to bin_size.
template <typename G>
void seed_archive(BinArchive<G>& ar,
                  const std::vector<Individual<G>>& initial,
                  std::uint64_t stream_seed) {
    cmoea::detail::require(!initial.empty(), "seed_archive: no individuals");
    std::vector<const Individual<G>*> candidates;
    candidates.reserve(initial.size());
    for (const auto& ind : initial) {
        cmoea::detail::require(ind.objectives.size() == ar.subtask_count,
                               "seed_archive: individual not evaluated on all subtasks");
        cmoea::detail::require(!ind.descriptor.empty(),
                               "seed_archive: missing behavior descriptor");
        candidates.push_back(&ind);
        ar.next_individual_id = std::max(ar.next_individual_id, ind.id + 1);
    }
    for (std::size_t b = 0; b < ar.bins.size(); ++b) {
        Rng rng = stream(stream_seed, "seed-bin", b);
        within_bin_select(ar.bins[b], candidates, ar.bin_size, rng);
    }
}

template <typename G>
std::size_t archive_population(const BinArchive<G>& ar) {
    std::size_t total = 0;
    for (const auto& b : ar.bins) total += b.members.size();
    return total;
}

// k uniform draws over all (bin, slot) pairs, repeats allowed.
template <typename G>
std::vector<const Individual<G>*> sample_parents(const BinArchive<G>& ar,
                                                 std::size_t k, Rng& rng) {
    std::vector<std::size_t> cumulative;
    cumulative.reserve(ar.bins.size());
    std::size_t total = 0;
    for (const auto& b : ar.bins) {
        total += b.members.size();
        cumulative.push_back(total);
    }
    cmoea::detail::require(total > 0 || k == 0, "sample_parents: empty archive");
    std::vector<const Individual<G>*> parents;
    parents.reserve(k);
    for (std::size_t d = 0; d < k; ++d) {
        std::size_t u = rng.uniform_index(total);
        std::size_t b = static_cast<std::size_t>(
            std::lower_bound(cumulative.begin(), cumulative.end(), u + 1) -
            cumulative.begin());
        std::size_t slot = u - (b == 0 ? 0 : cumulative[b - 1]);
        parents.push_back(&ar.bins[b].members[slot].ind);
    }
    return parents;
}

// One uniformly chosen dynamic bin gets a fresh random subtask set; its
// members stay but their cached aggregates are recomputed.
template <typename G>
void reassign_dynamic_bin(BinArchive<G>& ar, Rng& rng) {
    std::vector<std::size_t> dynamic;
    for (std::size_t i = 0; i < ar.bins.size(); ++i)
        if (ar.bins[i].is_dynamic) dynamic.push_back(i);
    if (dynamic.empty()) return;
    Bin<G>& bin = ar.bins[dynamic[rng.uniform_index(dynamic.size())]];
    bin.subtask_set = detail::random_subtask_set(ar.subtask_count, rng);
    for (auto& m : bin.members)
        m.aggregate = aggregate(m.ind.objectives, bin.subtask_set, bin.aggregation);
    ++ar.reassign_count;
}

struct GenerationOptions {
    std::uint64_t stream_seed = 0;
    std::uint64_t generation = 0;
    int workers = 1;
};

// One CMOEA generation: reassign a dynamic bin, sample k parents, mutate one
// child each, evaluate all children, then offer every child to every bin.
// If evaluation fails the archive is left untouched.
template <typename G, typename Evaluator, typename Mutator>
void cmoea_generation(BinArchive<G>& ar, std::size_t k, Evaluator&& evaluate,
                      Mutator&& mutate, const GenerationOptions& opt) {
    Rng rng = stream(opt.stream_seed, "cmoea-gen", opt.generation);

    std::vector<std::size_t> dynamic;
    for (std::size_t i = 0; i < ar.bins.size(); ++i)
        if (ar.bins[i].is_dynamic) dynamic.push_back(i);
    std::size_t reassigned = ar.bins.size();
    std::vector<std::size_t> old_set;
    if (!dynamic.empty()) {
        reassigned = dynamic[rng.uniform_index(dynamic.size())];
        old_set = ar.bins[reassigned].subtask_set;
        ar.bins[reassigned].subtask_set =
            detail::random_subtask_set(ar.subtask_count, rng);
        ++ar.reassign_count;
    }

    auto parents = sample_parents(ar, k, rng);
    std::vector<Individual<G>> children(parents.size());
    for (std::size_t i = 0; i < parents.size(); ++i) {
        Rng mrng = stream(opt.stream_seed, "mutate", opt.generation, i);
        children[i].id = ar.next_individual_id + i;
        children[i].birth_generation = static_cast<std::uint32_t>(opt.generation);
        children[i].genome = mutate(parents[i]->genome, mrng);
    }

    try {
        parallel_for(children.size(), opt.workers, [&](std::size_t i) {
            auto [obj, desc] = evaluate(children[i].genome);
            children[i].objectives = std::move(obj);
            children[i].descriptor = std::move(desc);
        });
    } catch (...) {
        if (!dynamic.empty()) {
            ar.bins[reassigned].subtask_set = std::move(old_set);
            --ar.reassign_count;
        }
        throw;
    }
    for (const auto& c : children)
        cmoea::detail::require(c.objectives.size() == ar.subtask_count,
                               "cmoea_generation: evaluator returned wrong objective count");
    ar.next_individual_id += children.size();

    if (!dynamic.empty()) {
        Bin<G>& bin = ar.bins[reassigned];
        for (auto& m : bin.members)
            m.aggregate =
                aggregate(m.ind.objectives, bin.subtask_set, bin.aggregation);
    }

    std::vector<const Individual<G>*> candidates;
    candidates.reserve(children.size());
    for (const auto& c : children) candidates.push_back(&c);
    parallel_for(ar.bins.size(), opt.workers, [&](std::size_t b) {
        Rng brng = stream(opt.stream_seed, "bin-select", opt.generation, b);
        within_bin_select(ar.bins[b], candidates, ar.bin_size, brng);
    });
}

// Novelty-with-local-competition alternative: repeatedly find the closest
// pair by descriptor distance and drop the member with the lower aggregate
// (ties by rng) until bin_size remain.
template <typename G>
void nslc_within_bin_select(Bin<G>& bin,
                            const std::vector<const Individual<G>*>& children,
                            std::size_t bin_size, Rng& rng) {
    std::vector<const Individual<G>*> pool;
    for (const auto& m : bin.members) pool.push_back(&m.ind);
    for (const Individual<G>* c : children) pool.push_back(c);
    std::size_t n = pool.size();
    std::vector<double> agg(n);
    for (std::size_t i = 0; i < n; ++i)
        agg[i] = aggregate(pool[i]->objectives, bin.subtask_set, bin.aggregation);
    std::vector<bool> dead(n, false);
    std::vector<double> dist(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            dist[i * n + j] =
                manhattan_distance(pool[i]->descriptor, pool[j]->descriptor);
    std::size_t alive = n;
    while (alive > bin_size) {
        std::size_t bi = 0, bj = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            if (dead[i]) continue;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (dead[j]) continue;
                if (dist[i * n + j] < best) {
                    best = dist[i * n + j];
                    bi = i;
                    bj = j;
                }
            }
        }
        std::size_t victim;
        if (agg[bi] != agg[bj])
            victim = agg[bi] < agg[bj] ? bi : bj;
        else
            victim = rng.bernoulli(0.5) ? bi : bj;
        dead[victim] = true;
        --alive;
    }
    std::vector<BinMember<G>> next;
    for (std::size_t i = 0; i < n; ++i)
        if (!dead[i]) next.push_back({*pool[i], agg[i], 0.0});
    bin.members = std::move(next);
    detail::refresh_member_diversity(bin);
}

// Rank info over a bin's cached (aggregate, diversity) pairs, for the
// Single Bin treatment's parent tournaments.
template <typename G>
moea::RankInfo bin_rank_info(const Bin<G>& bin) {
    std::vector<ObjectiveVector> obj;
    obj.reserve(bin.members.size());
    for (const auto& m : bin.members) obj.push_back({m.aggregate, m.diversity});
    return moea::rank_and_crowding(obj);
}

} // namespace cmoea::bins

#endif
