#include <catch2/catch_amalgamated.hpp>

#include <cmoea/harness.hpp>

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using namespace cmoea;
using harness::RunConfig;
using harness::Treatment;

namespace {

RunConfig tiny_config(Treatment t) {
    RunConfig cfg;
    cfg.treatment = t;
    cfg.master_seed = 41;
    cfg.generations = 3;
    cfg.offspring_per_generation = 4;
    cfg.training_mazes = {2, 11};
    cfg.test_mazes = {2, 12};
    cfg.test_every = 2;
    cfg.checkpoint_every = 2;
    cfg.bin_cap = std::nullopt;   // 2 training mazes -> 3 exhaustive bins
    cfg.bin_size = 2;
    cfg.population_size = 6;
    cfg.initial_population = 6;
    cfg.genome_init.hidden_min = 2;
    cfg.genome_init.hidden_max = 4;
    cfg.genome_init.connections_min = 8;
    cfg.genome_init.connections_max = 16;
    return cfg;
}

harness::Genome stationary_genome() {
    harness::Genome g;
    for (std::uint32_t i = 0; i < 10; ++i)
        g.nodes.push_back({i, neuro::NodeRole::input, 0.0});
    g.nodes.push_back({10, neuro::NodeRole::output, 0.0});
    g.nodes.push_back({11, neuro::NodeRole::output, 0.0});
    g.next_node_id = 12;
    return g;
}

} // namespace

TEST_CASE("config json round trips through defaults and overrides") {
    RunConfig def;
    auto j = harness::to_json(def);
    RunConfig back = harness::config_from_json(j);
    CHECK(harness::to_json(back).dump(2) == j.dump(2));

    RunConfig custom = tiny_config(Treatment::lexicase);
    custom.lexicase.variant = moea::LexicaseVariant::static_eps;
    custom.lexicase.epsilon_mode = moea::EpsilonMode::fixed;
    custom.lexicase.fixed_epsilon = 0.125;
    custom.aggregation = Aggregation::product;
    custom.nsga3_normalization = moea::NormalizationMode::intercept;
    custom.ct_augmented = true;
    custom.diversity_objective = true;
    custom.log_wall_time = true;
    custom.mutation.eta = 7.5;
    auto cj = harness::to_json(custom);
    RunConfig cback = harness::config_from_json(cj);
    CHECK(harness::to_json(cback).dump(2) == cj.dump(2));
    CHECK_FALSE(cback.bin_cap.has_value());
    CHECK(cback.lexicase.fixed_epsilon == 0.125);
}

TEST_CASE("config parsing rejects unknown keys and bad values") {
    auto base = harness::to_json(RunConfig{});
    SECTION("unknown top-level key") {
        auto j = base;
        j["bin_sizes"] = 10;
        CHECK_THROWS_AS(harness::config_from_json(j), harness::ConfigError);
    }
    SECTION("unknown nested keys") {
        for (const char* section : {"training_mazes", "lexicase", "genome_init",
                                    "mutation"}) {
            auto j = base;
            j[section]["typo"] = 1;
            CHECK_THROWS_AS(harness::config_from_json(j), harness::ConfigError);
        }
    }
    SECTION("bad enum strings") {
        for (auto [key, value] :
             std::map<std::string, std::string>{{"treatment", "nsga4"},
                                                {"aggregation", "sum"},
                                                {"nsga3_normalization", "none"}}) {
            auto j = base;
            j[key] = value;
            CHECK_THROWS_AS(harness::config_from_json(j), harness::ConfigError);
        }
        auto j = base;
        j["lexicase"]["variant"] = "super_dynamic";
        CHECK_THROWS_AS(harness::config_from_json(j), harness::ConfigError);
    }
    SECTION("type errors surface as config errors") {
        auto j = base;
        j["generations"] = "many";
        CHECK_THROWS_AS(harness::config_from_json(j), harness::ConfigError);
    }
}

TEST_CASE("config validation catches inconsistent settings") {
    auto expect_invalid = [](RunConfig cfg) {
        CHECK_THROWS_AS(harness::validate(cfg), harness::ConfigError);
    };
    RunConfig ok;
    CHECK_NOTHROW(harness::validate(ok));

    RunConfig c = ok;
    c.training_mazes.count = 0;
    expect_invalid(c);
    c = ok;
    c.offspring_per_generation = 0;
    expect_invalid(c);
    c = ok;
    c.worker_count = 0;
    expect_invalid(c);
    c = ok;
    c.bin_size = 0;
    expect_invalid(c);
    c = ok;
    c.test_every = 0;
    expect_invalid(c);
    c = ok;
    c.bin_cap = 50;   // below 100 training mazes + 1
    expect_invalid(c);
    c = ok;
    c.bin_cap = std::nullopt;   // 2^100 bins
    expect_invalid(c);
    c = ok;
    c.treatment = Treatment::nsga2;
    c.population_size = 1;
    expect_invalid(c);
    c = ok;
    c.lexicase.fixed_epsilon = -0.5;
    expect_invalid(c);
    c = ok;
    c.mutation.eta = 0.0;
    expect_invalid(c);
    c = ok;
    c.mutation.p_weight = 1.5;
    expect_invalid(c);
    c = ok;
    c.genome_init.hidden_max = c.genome_init.hidden_min - 1;
    expect_invalid(c);
    c = ok;
    c.genome_init.connections_min = -1;
    expect_invalid(c);
}

TEST_CASE("runs are deterministic and independent of the worker count") {
    for (Treatment t : {Treatment::cmoea, Treatment::cmoea_single_bin,
                        Treatment::nsga2, Treatment::nsga3,
                        Treatment::lexicase}) {
        RunConfig one = tiny_config(t);
        RunConfig eight = tiny_config(t);
        eight.worker_count = 8;
        harness::RunLog a = harness::run_experiment(one);
        harness::RunLog b = harness::run_experiment(eight);
        INFO("treatment " << harness::treatment_name(t));
        CHECK(harness::run_log_csv(a) == harness::run_log_csv(b));
        CHECK(a.population_id_hash == b.population_id_hash);
        CHECK(a.champion.id == b.champion.id);
        CHECK(a.population == 6);
    }
}

TEST_CASE("test-set evaluation never feeds back into selection") {
    RunConfig with = tiny_config(Treatment::nsga2);
    RunConfig without = tiny_config(Treatment::nsga2);
    without.evaluate_test_sets = false;
    harness::RunLog a = harness::run_experiment(with);
    harness::RunLog b = harness::run_experiment(without);
    CHECK(a.population_id_hash == b.population_id_hash);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].best_train_perf == b.records[i].best_train_perf);
        CHECK_FALSE(b.records[i].has_test);
    }
    // disabled test sets leave the test columns empty on every row
    std::istringstream csv(harness::run_log_csv(b));
    std::string line;
    std::getline(csv, line);
    CHECK(line == harness::run_log_header);
    int rows = 0;
    while (std::getline(csv, line)) {
        CHECK(line.ends_with(",,,,"));
        ++rows;
    }
    CHECK(rows == 4);

    RunConfig reseeded = with;
    reseeded.master_seed = 4242;
    harness::RunLog c = harness::run_experiment(reseeded);
    CHECK(a.population_id_hash != c.population_id_hash);
}

TEST_CASE("generation zero runs log exactly the initialization record") {
    RunConfig cfg = tiny_config(Treatment::nsga2);
    cfg.generations = 0;
    harness::RunLog log = harness::run_experiment(cfg);
    REQUIRE(log.records.size() == 1);
    CHECK(log.records[0].generation == 0);
    CHECK(log.population_id_hash.size() == 1);
    CHECK(log.champion.id < 6);
    CHECK(combined_target(log.champion.objectives) ==
          log.records[0].best_train_perf);
}

TEST_CASE("logged population equals the archive capacity") {
    RunConfig cfg;
    cfg.treatment = Treatment::cmoea;
    cfg.master_seed = 5;
    cfg.generations = 0;
    cfg.training_mazes = {10, 5};
    cfg.evaluate_test_sets = false;
    cfg.bin_cap = 50;
    cfg.bin_size = 5;
    cfg.initial_population = 20;
    cfg.offspring_per_generation = 20;
    cfg.genome_init.hidden_min = 2;
    cfg.genome_init.hidden_max = 4;
    cfg.genome_init.connections_min = 8;
    cfg.genome_init.connections_max = 16;
    harness::RunLog log = harness::run_experiment(cfg);
    CHECK(log.population == 250);
}

TEST_CASE("elitist treatments never lose their best training performance") {
    auto non_decreasing = [](const harness::RunLog& log) {
        for (std::size_t i = 1; i < log.records.size(); ++i) {
            INFO("generation " << log.records[i].generation);
            CHECK(log.records[i].best_train_perf >=
                  log.records[i - 1].best_train_perf);
        }
    };
    SECTION("nsga2 with the combined-target objective") {
        RunConfig cfg = tiny_config(Treatment::nsga2);
        cfg.ct_augmented = true;
        cfg.population_size = 8;
        cfg.initial_population = 8;
        cfg.offspring_per_generation = 6;
        cfg.generations = 8;
        cfg.evaluate_test_sets = false;
        non_decreasing(harness::run_experiment(cfg));
    }
    SECTION("single-bin archive") {
        RunConfig cfg = tiny_config(Treatment::cmoea_single_bin);
        cfg.population_size = 8;
        cfg.initial_population = 8;
        cfg.offspring_per_generation = 6;
        cfg.generations = 8;
        cfg.evaluate_test_sets = false;
        non_decreasing(harness::run_experiment(cfg));
    }
    SECTION("cmoea via the all-tasks bin") {
        RunConfig cfg = tiny_config(Treatment::cmoea);
        cfg.bin_size = 4;
        cfg.initial_population = 8;
        cfg.offspring_per_generation = 5;
        cfg.generations = 8;
        cfg.evaluate_test_sets = false;
        non_decreasing(harness::run_experiment(cfg));
    }
}

TEST_CASE("champion matches the final best-by-mean individual") {
    RunConfig cfg = tiny_config(Treatment::lexicase);
    harness::RunLog log = harness::run_experiment(cfg);
    REQUIRE(log.records.size() == 4);
    CHECK(combined_target(log.champion.objectives) ==
          log.records.back().best_train_perf);
    CHECK(log.champion.objectives.size() == 2);
}

TEST_CASE("checkpoint hooks fire on the configured schedule") {
    SECTION("flat population checkpoints") {
        RunConfig cfg = tiny_config(Treatment::nsga2);
        cfg.generations = 4;
        std::vector<std::uint64_t> gens;
        harness::RunHooks hooks;
        hooks.on_checkpoint = [&](std::uint64_t g, const nlohmann::json& j) {
            gens.push_back(g);
            CHECK(j.at("kind") == "population");
            CHECK(j.at("generation") == g);
            CHECK(j.at("individuals").size() == 6);
        };
        harness::run_experiment(cfg, hooks);
        CHECK(gens == std::vector<std::uint64_t>{0, 2, 4});
    }
    SECTION("archive checkpoints") {
        RunConfig cfg = tiny_config(Treatment::cmoea);
        cfg.generations = 2;
        std::vector<std::uint64_t> gens;
        harness::RunHooks hooks;
        hooks.on_checkpoint = [&](std::uint64_t g, const nlohmann::json& j) {
            gens.push_back(g);
            CHECK(j.at("kind") == "archive");
            CHECK(j.at("bins").size() == 3);
        };
        harness::run_experiment(cfg, hooks);
        CHECK(gens == std::vector<std::uint64_t>{0, 2});
    }
    SECTION("checkpoint_every zero disables checkpoints") {
        RunConfig cfg = tiny_config(Treatment::nsga2);
        cfg.checkpoint_every = 0;
        int calls = 0;
        harness::RunHooks hooks;
        hooks.on_checkpoint = [&](std::uint64_t, const nlohmann::json&) {
            ++calls;
        };
        harness::run_experiment(cfg, hooks);
        CHECK(calls == 0);
    }
}

TEST_CASE("evaluate_individual scores each maze in set order") {
    auto mazes = maze::build_mazes(maze::generate_maze_set(7, 2));
    harness::Genome g = stationary_genome();
    harness::EvaluationResult r = harness::evaluate_individual(g, mazes);
    REQUIRE(r.objectives.size() == 2);
    REQUIRE(r.descriptor.size() == 4);
    CHECK(r.solved_count == 0);
    for (std::size_t i = 0; i < mazes.size(); ++i) {
        double d0 = maze::distance(mazes[i].start, mazes[i].goal);
        CHECK(r.objectives[i] ==
              Catch::Approx(1.0 - d0 / mazes[i].max_dist).margin(1e-12));
        CHECK(r.descriptor[2 * i] == 200.0);
        CHECK(r.descriptor[2 * i + 1] == 200.0);
    }
}
