#include <catch2/catch_amalgamated.hpp>

#include <cmoea/bins.hpp>
#include <cmoea/core.hpp>
#include <cmoea/rng.hpp>

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <tuple>
#include <vector>

using namespace cmoea;
using namespace cmoea::bins;

namespace {

using G = std::uint64_t;
using Ind = Individual<G>;

std::pair<ObjectiveVector, BehaviorDescriptor> fake_eval(G genome,
                                                         std::size_t m) {
    Rng r(genome * 0x9e3779b97f4a7c15ULL + 1);
    ObjectiveVector obj(m);
    for (double& x : obj) x = r.uniform();
    BehaviorDescriptor desc(4);
    for (double& x : desc) x = r.uniform();
    return {obj, desc};
}

std::vector<Ind> fake_initial(std::size_t count, std::size_t m) {
    std::vector<Ind> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        out[i].id = i;
        out[i].genome = 1000 + i;
        auto [obj, desc] = fake_eval(out[i].genome, m);
        out[i].objectives = obj;
        out[i].descriptor = desc;
    }
    return out;
}

// Everything that identifies archive state, for before/after comparisons.
using ArchiveSnapshot =
    std::vector<std::tuple<std::vector<std::size_t>, bool,
                           std::vector<std::uint64_t>, std::vector<double>>>;

ArchiveSnapshot snapshot(const BinArchive<G>& ar) {
    ArchiveSnapshot snap;
    for (const auto& b : ar.bins) {
        std::vector<std::uint64_t> ids;
        std::vector<double> aggs;
        for (const auto& m : b.members) {
            ids.push_back(m.ind.id);
            aggs.push_back(m.aggregate);
        }
        snap.emplace_back(b.subtask_set, b.is_dynamic, ids, aggs);
    }
    return snap;
}

BinArchive<G> smoke_run(std::size_t generations, int workers) {
    constexpr std::size_t m = 8;
    Rng init_rng(404);
    auto ar = init_bins<G>(m, 12, init_rng, 4);
    seed_archive(ar, fake_initial(10, m), 900);
    auto evaluate = [](const G& genome) { return fake_eval(genome, m); };
    auto mutate = [](const G& parent, Rng& rng) {
        return parent ^ rng.next_u64();
    };
    for (std::size_t g = 1; g <= generations; ++g)
        cmoea_generation(ar, 8, evaluate, mutate,
                         GenerationOptions{77, g, workers});
    return ar;
}

} // namespace

TEST_CASE("init_bins exhaustive mode enumerates every non-empty subset") {
    Rng rng(1);
    auto ar = init_bins<G>(6, std::nullopt, rng, 10);
    CHECK(ar.bins.size() == 63);
    CHECK(ar.subtask_count == 6);
    std::set<std::vector<std::size_t>> sets;
    for (const auto& b : ar.bins) {
        CHECK_FALSE(b.is_dynamic);
        CHECK_FALSE(b.subtask_set.empty());
        sets.insert(b.subtask_set);
    }
    CHECK(sets.size() == 63);

    auto tiny = init_bins<G>(2, std::nullopt, rng, 3);
    REQUIRE(tiny.bins.size() == 3);
    std::set<std::vector<std::size_t>> want{{0}, {1}, {0, 1}};
    std::set<std::vector<std::size_t>> got;
    for (const auto& b : tiny.bins) got.insert(b.subtask_set);
    CHECK(got == want);

    CHECK_THROWS_AS(init_bins<G>(21, std::nullopt, rng, 10),
                    std::invalid_argument);
    CHECK_THROWS_AS(init_bins<G>(0, std::nullopt, rng, 10),
                    std::invalid_argument);
    CHECK_THROWS_AS(init_bins<G>(4, std::nullopt, rng, 0),
                    std::invalid_argument);
}

TEST_CASE("init_bins sampled mode keeps the fixed bins and fills with dynamic") {
    Rng rng(2);
    auto ar = init_bins<G>(100, 1000, rng, 10);
    REQUIRE(ar.bins.size() == 1000);
    std::vector<std::size_t> all(100);
    std::iota(all.begin(), all.end(), std::size_t{0});
    CHECK(ar.bins[0].subtask_set == all);
    CHECK_FALSE(ar.bins[0].is_dynamic);
    std::size_t dynamic = 0;
    for (std::size_t i = 1; i <= 100; ++i) {
        CHECK(ar.bins[i].subtask_set == std::vector<std::size_t>{i - 1});
        CHECK_FALSE(ar.bins[i].is_dynamic);
    }
    for (std::size_t i = 101; i < 1000; ++i) {
        REQUIRE(ar.bins[i].is_dynamic);
        REQUIRE_FALSE(ar.bins[i].subtask_set.empty());
        for (std::size_t s : ar.bins[i].subtask_set) CHECK(s < 100);
        ++dynamic;
    }
    CHECK(dynamic == 899);

    CHECK_THROWS_AS(init_bins<G>(100, 100, rng, 10), std::invalid_argument);
}

TEST_CASE("reassigned subtask sets are half-density on average") {
    Rng rng(3);
    double total = 0.0;
    for (int i = 0; i < 10000; ++i)
        total += static_cast<double>(bins::detail::random_subtask_set(100, rng).size());
    double mean = total / 10000.0;
    CHECK(mean > 49.0);
    CHECK(mean < 51.0);
}

TEST_CASE("seed_archive offers everyone to every bin then truncates") {
    constexpr std::size_t m = 6;
    Rng rng(4);
    SECTION("truncation to bin_size") {
        auto ar = init_bins<G>(m, std::nullopt, rng, 5);
        seed_archive(ar, fake_initial(20, m), 1234);
        CHECK(archive_population(ar) == 63 * 5);
        for (const auto& b : ar.bins) CHECK(b.members.size() == 5);
        CHECK(ar.next_individual_id == 20);
    }
    SECTION("small seed set is kept whole, copies across bins") {
        auto ar = init_bins<G>(m, std::nullopt, rng, 5);
        seed_archive(ar, fake_initial(3, m), 1234);
        for (const auto& b : ar.bins) {
            REQUIRE(b.members.size() == 3);
            std::set<std::uint64_t> ids;
            for (const auto& mem : b.members) ids.insert(mem.ind.id);
            CHECK(ids == std::set<std::uint64_t>{0, 1, 2});
        }
    }
    SECTION("unevaluated individuals are a usage error") {
        auto ar = init_bins<G>(m, std::nullopt, rng, 5);
        auto initial = fake_initial(3, m);
        initial[1].objectives.pop_back();
        CHECK_THROWS_AS(seed_archive(ar, initial, 1), std::invalid_argument);
        initial = fake_initial(3, m);
        initial[2].descriptor.clear();
        CHECK_THROWS_AS(seed_archive(ar, initial, 1), std::invalid_argument);
        CHECK_THROWS_AS(seed_archive(ar, {}, 1), std::invalid_argument);
    }
}

TEST_CASE("within_bin_select scores the pool on aggregate and diversity") {
    Bin<G> bin;
    bin.subtask_set = {0, 2};
    auto make = [](std::uint64_t id, ObjectiveVector obj,
                   BehaviorDescriptor desc) {
        Ind ind;
        ind.id = id;
        ind.objectives = std::move(obj);
        ind.descriptor = std::move(desc);
        return ind;
    };
    SECTION("pool at or below bin_size is kept whole") {
        Ind a = make(1, {0.5, 0.0, 0.5}, {0, 0});
        Ind b = make(2, {0.1, 0.9, 0.1}, {1, 1});
        Rng rng(5);
        within_bin_select(bin, {&a, &b}, 4, rng);
        REQUIRE(bin.members.size() == 2);
        CHECK(bin.members[0].aggregate == 0.5);
        CHECK(bin.members[1].aggregate == Catch::Approx(0.1));
        CHECK(bin.members[0].diversity == 2.0);
        CHECK(bin.members[1].diversity == 2.0);
    }
    SECTION("a dominator on both bin objectives always survives") {
        Rng rng(6);
        for (int trial = 0; trial < 30; ++trial) {
            Bin<G> b;
            b.subtask_set = {0, 1, 2};
            std::vector<Ind> owned;
            for (int i = 0; i < 12; ++i) {
                double base = 0.1 + 0.05 * i;
                owned.push_back(make(static_cast<std::uint64_t>(i),
                                     {base, base, base},
                                     {rng.uniform() * 0.2, rng.uniform() * 0.2}));
            }
            owned.push_back(make(99, {0.9, 0.9, 0.9}, {10.0, 10.0}));
            std::vector<const Ind*> cands;
            for (const auto& ind : owned) cands.push_back(&ind);
            within_bin_select(b, cands, 3, rng);
            REQUIRE(b.members.size() == 3);
            bool kept = false;
            for (const auto& mem : b.members)
                if (mem.ind.id == 99) kept = true;
            CHECK(kept);
        }
    }
    SECTION("clone pair with bin_size 1 keeps exactly one") {
        Ind a = make(7, {0.4, 0.4, 0.4}, {0.5, 0.5});
        Ind b = a;
        b.id = 8;
        Rng rng(7);
        within_bin_select(bin, {&a, &b}, 1, rng);
        REQUIRE(bin.members.size() == 1);
        CHECK((bin.members[0].ind.id == 7 || bin.members[0].ind.id == 8));
    }
}

TEST_CASE("sample_parents draws uniformly over archive slots") {
    constexpr std::size_t m = 4;
    Rng rng(8);
    auto ar = init_bins<G>(m, 6, rng, 4);
    seed_archive(ar, fake_initial(9, m), 55);
    REQUIRE(archive_population(ar) == 24);

    std::map<std::pair<std::size_t, std::size_t>, int> counts;
    Rng draw(9);
    auto parents = sample_parents(ar, 120000, draw);
    REQUIRE(parents.size() == 120000);
    for (const Ind* p : parents) {
        bool found = false;
        for (std::size_t b = 0; b < ar.bins.size() && !found; ++b)
            for (std::size_t s = 0; s < ar.bins[b].members.size(); ++s)
                if (&ar.bins[b].members[s].ind == p) {
                    ++counts[{b, s}];
                    found = true;
                    break;
                }
        REQUIRE(found);
    }
    REQUIRE(counts.size() == 24);
    for (const auto& [slot, c] : counts) {
        CHECK(c > 4400);
        CHECK(c < 5600);
    }

    Rng empty_draw(10);
    auto none = sample_parents(ar, 0, empty_draw);
    CHECK(none.empty());
    BinArchive<G> unseeded = init_bins<G>(m, 6, rng, 4);
    CHECK_THROWS_AS(sample_parents(unseeded, 1, empty_draw),
                    std::invalid_argument);
}

TEST_CASE("reassign_dynamic_bin touches one dynamic bin and rescored members") {
    constexpr std::size_t m = 16;
    Rng rng(11);
    auto ar = init_bins<G>(m, 20, rng, 3);
    seed_archive(ar, fake_initial(8, m), 77);
    auto before = snapshot(ar);

    Rng reassign_rng(12);
    reassign_dynamic_bin(ar, reassign_rng);
    CHECK(ar.reassign_count == 1);

    std::size_t changed = 0;
    for (std::size_t b = 0; b < ar.bins.size(); ++b) {
        const auto& [set, dyn, ids, aggs] = before[b];
        if (ar.bins[b].subtask_set != set) {
            ++changed;
            CHECK(ar.bins[b].is_dynamic);
        }
        // membership never changes, only cached aggregates may
        std::vector<std::uint64_t> now_ids;
        for (const auto& mem : ar.bins[b].members) now_ids.push_back(mem.ind.id);
        CHECK(now_ids == ids);
        for (const auto& mem : ar.bins[b].members)
            CHECK(mem.aggregate == aggregate(mem.ind.objectives,
                                             ar.bins[b].subtask_set,
                                             ar.bins[b].aggregation));
    }
    CHECK(changed == 1);

    auto exhaustive = init_bins<G>(4, std::nullopt, rng, 3);
    seed_archive(exhaustive, fake_initial(5, 4), 78);
    Rng noop_rng(13);
    reassign_dynamic_bin(exhaustive, noop_rng);
    CHECK(exhaustive.reassign_count == 0);
}

TEST_CASE("fifty smoke generations keep the archive bookkeeping exact") {
    auto ar = smoke_run(50, 1);
    CHECK(ar.reassign_count == 50);
    CHECK(ar.next_individual_id == 10 + 50 * 8);
    CHECK(archive_population(ar) == 12 * 4);
    for (const auto& b : ar.bins) CHECK(b.members.size() == 4);
    std::vector<std::size_t> all(8);
    std::iota(all.begin(), all.end(), std::size_t{0});
    CHECK(ar.bins[0].subtask_set == all);
    for (std::size_t i = 1; i <= 8; ++i)
        CHECK(ar.bins[i].subtask_set == std::vector<std::size_t>{i - 1});
}

TEST_CASE("generation results are independent of the worker count") {
    auto a = smoke_run(12, 1);
    auto b = smoke_run(12, 4);
    CHECK(snapshot(a) == snapshot(b));
}

TEST_CASE("the all-tasks bin never loses ground under mean aggregation") {
    constexpr std::size_t m = 8;
    Rng init_rng(404);
    auto ar = init_bins<G>(m, 12, init_rng, 4);
    seed_archive(ar, fake_initial(10, m), 900);
    auto evaluate = [](const G& genome) { return fake_eval(genome, m); };
    auto mutate = [](const G& parent, Rng& rng) {
        return parent ^ rng.next_u64();
    };
    auto best_ct = [&] {
        double best = 0.0;
        for (const auto& mem : ar.bins[0].members)
            best = std::max(best, mem.aggregate);
        return best;
    };
    double prev = best_ct();
    for (std::size_t g = 1; g <= 40; ++g) {
        cmoea_generation(ar, 8, evaluate, mutate, GenerationOptions{77, g, 1});
        double now = best_ct();
        CHECK(now >= prev);
        prev = now;
    }
}

TEST_CASE("a failing evaluator leaves the archive untouched") {
    constexpr std::size_t m = 8;
    Rng init_rng(21);
    auto ar = init_bins<G>(m, 12, init_rng, 3);
    seed_archive(ar, fake_initial(9, m), 33);
    auto before = snapshot(ar);
    std::uint64_t count_before = ar.reassign_count;
    std::uint64_t next_before = ar.next_individual_id;

    auto broken = [](const G&) -> std::pair<ObjectiveVector, BehaviorDescriptor> {
        throw std::runtime_error("evaluation backend down");
    };
    auto mutate = [](const G& parent, Rng& rng) {
        return parent ^ rng.next_u64();
    };
    for (int workers : {1, 2}) {
        CHECK_THROWS_AS(cmoea_generation(ar, 6, broken, mutate,
                                         GenerationOptions{5, 3, workers}),
                        std::runtime_error);
        CHECK(snapshot(ar) == before);
        CHECK(ar.reassign_count == count_before);
        CHECK(ar.next_individual_id == next_before);
    }
}

TEST_CASE("nslc removes the weaker member of the closest pair") {
    Bin<G> bin;
    bin.subtask_set = {0};
    auto make = [](std::uint64_t id, double score, BehaviorDescriptor desc) {
        Ind ind;
        ind.id = id;
        ind.objectives = {score};
        ind.descriptor = std::move(desc);
        return ind;
    };
    SECTION("clone pair goes first") {
        Ind a = make(1, 0.3, {0.0, 0.0});
        Ind b = make(2, 0.6, {0.0, 0.0});
        Ind c = make(3, 0.1, {5.0, 5.0});
        Rng rng(14);
        nslc_within_bin_select(bin, {&a, &b, &c}, 2, rng);
        REQUIRE(bin.members.size() == 2);
        std::set<std::uint64_t> ids;
        for (const auto& mem : bin.members) ids.insert(mem.ind.id);
        CHECK(ids == std::set<std::uint64_t>{2, 3});
    }
    SECTION("pool at or below bin_size is kept whole") {
        Ind a = make(1, 0.3, {0.0, 0.0});
        Ind b = make(2, 0.6, {1.0, 1.0});
        Rng rng(15);
        nslc_within_bin_select(bin, {&a, &b}, 2, rng);
        CHECK(bin.members.size() == 2);
    }
    SECTION("chain of removals follows the rule step by step") {
        Ind a = make(1, 0.9, {0.0, 0.0});
        Ind b = make(2, 0.2, {0.1, 0.0});
        Ind c = make(3, 0.5, {0.3, 0.0});
        Ind d = make(4, 0.4, {9.0, 9.0});
        Rng rng(16);
        // closest pair (a,b): drop b; then (a,c): drop c
        nslc_within_bin_select(bin, {&a, &b, &c, &d}, 2, rng);
        std::set<std::uint64_t> ids;
        for (const auto& mem : bin.members) ids.insert(mem.ind.id);
        CHECK(ids == std::set<std::uint64_t>{1, 4});
    }
}

TEST_CASE("bin_rank_info ranks members on cached aggregate and diversity") {
    Bin<G> bin;
    bin.subtask_set = {0};
    BinMember<G> a, b, c;
    a.aggregate = 0.9;
    a.diversity = 0.1;
    b.aggregate = 0.5;
    b.diversity = 0.5;
    c.aggregate = 0.4;
    c.diversity = 0.2;
    bin.members = {a, b, c};
    auto info = bin_rank_info(bin);
    CHECK(info.rank[0] == 0);
    CHECK(info.rank[1] == 0);
    CHECK(info.rank[2] == 1);
}
