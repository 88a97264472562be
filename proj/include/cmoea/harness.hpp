#ifndef CMOEA_HARNESS_HPP
#define CMOEA_HARNESS_HPP

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bins.hpp"
#include "core.hpp"
#include "io.hpp"
#include "maze.hpp"
#include "moea.hpp"
#include "neuro.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace cmoea::harness {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Treatment { cmoea, cmoea_single_bin, nsga2, nsga3, lexicase };

inline const char* treatment_name(Treatment t) {
    switch (t) {
        case Treatment::cmoea: return "cmoea";
        case Treatment::cmoea_single_bin: return "cmoea_single_bin";
        case Treatment::nsga2: return "nsga2";
        case Treatment::nsga3: return "nsga3";
        default: return "lexicase";
    }
}

inline Treatment treatment_from_name(const std::string& s) {
    if (s == "cmoea") return Treatment::cmoea;
    if (s == "cmoea_single_bin") return Treatment::cmoea_single_bin;
    if (s == "nsga2") return Treatment::nsga2;
    if (s == "nsga3") return Treatment::nsga3;
    if (s == "lexicase") return Treatment::lexicase;
    throw ConfigError("unknown treatment '" + s +
                      "' (expected cmoea, cmoea_single_bin, nsga2, nsga3 or "
                      "lexicase)");
}

struct MazeSetConfig {
    int count = 0;
    std::uint64_t seed = 0;
};

struct RunConfig {
    Treatment treatment = Treatment::cmoea;
    std::uint64_t master_seed = 0;
    int worker_count = 1;
    std::uint64_t generations = 1000;
    std::size_t offspring_per_generation = 1000;
    std::size_t population_size = 0;      // 0 = total CMOEA archive size
    std::size_t initial_population = 0;   // 0 = offspring_per_generation
    MazeSetConfig training_mazes{100, 1};
    MazeSetConfig test_mazes{1000, 2};
    std::size_t bin_size = 10;
    std::optional<std::size_t> bin_cap = 1000;   // nullopt = exhaustive bins
    Aggregation aggregation = Aggregation::mean;
    bool ct_augmented = false;
    bool diversity_objective = false;
    moea::NormalizationMode nsga3_normalization = moea::NormalizationMode::max;
    moea::LexicaseConfig lexicase{moea::LexicaseVariant::semi_dynamic,
                                  moea::EpsilonMode::mad, 0.0};
    std::uint64_t test_every = 100;
    std::uint64_t checkpoint_every = 100;
    bool evaluate_test_sets = true;
    bool log_wall_time = false;
    neuro::GenomeInitConfig genome_init;
    neuro::MutationConfig mutation;
};

inline bool uses_bins(Treatment t) {
    return t == Treatment::cmoea || t == Treatment::cmoea_single_bin;
}

// Number of bins the configured CMOEA archive would hold.
inline std::size_t bin_count(const RunConfig& cfg) {
    std::size_t m = static_cast<std::size_t>(cfg.training_mazes.count);
    if (cfg.bin_cap) return *cfg.bin_cap;
    return (std::size_t{1} << m) - 1;
}

// Population shared by all treatments: the sum of CMOEA bin sizes, unless
// population_size overrides it.
inline std::size_t effective_population(const RunConfig& cfg) {
    if (cfg.population_size != 0 && cfg.treatment != Treatment::cmoea)
        return cfg.population_size;
    return bin_count(cfg) * cfg.bin_size;
}

inline std::size_t effective_initial(const RunConfig& cfg) {
    if (uses_bins(cfg.treatment))
        return cfg.initial_population != 0 ? cfg.initial_population
                                           : cfg.offspring_per_generation;
    return effective_population(cfg);
}

inline void validate(const RunConfig& cfg) {
    auto fail = [](const std::string& m) { throw ConfigError(m); };
    if (cfg.training_mazes.count < 1) fail("training_mazes.count must be >= 1");
    if (cfg.test_mazes.count < 0) fail("test_mazes.count must be >= 0");
    if (cfg.offspring_per_generation < 1)
        fail("offspring_per_generation must be >= 1");
    if (cfg.worker_count < 1) fail("worker_count must be >= 1");
    if (cfg.bin_size < 1) fail("bin_size must be >= 1");
    if (cfg.test_every < 1) fail("test_every must be >= 1");
    std::size_t m = static_cast<std::size_t>(cfg.training_mazes.count);
    bool derives_from_bins =
        uses_bins(cfg.treatment) || cfg.population_size == 0;
    if (derives_from_bins) {
        if (cfg.bin_cap && *cfg.bin_cap < m + 1)
            fail("bin_cap must be >= training maze count + 1");
        if (!cfg.bin_cap && m > 20)
            fail("exhaustive bins are infeasible for more than 20 training "
                 "mazes, set bin_cap");
    }
    if (cfg.treatment != Treatment::cmoea && effective_population(cfg) < 2)
        fail("population_size must be >= 2");
    if (cfg.lexicase.fixed_epsilon < 0.0) fail("fixed_epsilon must be >= 0");
    if (cfg.mutation.eta <= 0.0) fail("mutation eta must be > 0");
    for (double p :
         {cfg.mutation.p_add_connection, cfg.mutation.p_delete_connection,
          cfg.mutation.p_rewire_connection, cfg.mutation.p_add_node,
          cfg.mutation.p_delete_node, cfg.mutation.p_weight, cfg.mutation.p_bias})
        if (p < 0.0 || p > 1.0) fail("mutation probabilities must be in [0, 1]");
    if (cfg.genome_init.hidden_min < 0 ||
        cfg.genome_init.hidden_max < cfg.genome_init.hidden_min)
        fail("bad hidden node range");
    if (cfg.genome_init.connections_min < 0 ||
        cfg.genome_init.connections_max < cfg.genome_init.connections_min)
        fail("bad connection count range");
}

// ---- config file format ----

namespace detail {

inline void check_keys(const nlohmann::json& j,
                       std::initializer_list<const char*> allowed,
                       const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) ok = true;
        if (!ok) throw ConfigError("config: unknown key '" + key + "' in " + where);
    }
}

template <typename T>
void get_if_present(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

} // namespace detail

inline nlohmann::json to_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["treatment"] = treatment_name(cfg.treatment);
    j["master_seed"] = cfg.master_seed;
    j["worker_count"] = cfg.worker_count;
    j["generations"] = cfg.generations;
    j["offspring_per_generation"] = cfg.offspring_per_generation;
    j["population_size"] = cfg.population_size;
    j["initial_population"] = cfg.initial_population;
    j["training_mazes"] = {{"count", cfg.training_mazes.count},
                           {"seed", cfg.training_mazes.seed}};
    j["test_mazes"] = {{"count", cfg.test_mazes.count},
                       {"seed", cfg.test_mazes.seed}};
    j["bin_size"] = cfg.bin_size;
    j["bin_cap"] = cfg.bin_cap ? nlohmann::json(*cfg.bin_cap)
                               : nlohmann::json(nullptr);
    j["aggregation"] = cfg.aggregation == Aggregation::mean ? "mean" : "product";
    j["ct_augmented"] = cfg.ct_augmented;
    j["diversity_objective"] = cfg.diversity_objective;
    j["nsga3_normalization"] =
        cfg.nsga3_normalization == moea::NormalizationMode::max ? "max"
                                                                : "intercept";
    const char* variant = "plain";
    switch (cfg.lexicase.variant) {
        case moea::LexicaseVariant::plain: variant = "plain"; break;
        case moea::LexicaseVariant::static_eps: variant = "static"; break;
        case moea::LexicaseVariant::semi_dynamic: variant = "semi_dynamic"; break;
        case moea::LexicaseVariant::dynamic: variant = "dynamic"; break;
    }
    j["lexicase"] = {
        {"variant", variant},
        {"epsilon_mode",
         cfg.lexicase.epsilon_mode == moea::EpsilonMode::fixed ? "fixed" : "mad"},
        {"fixed_epsilon", cfg.lexicase.fixed_epsilon}};
    j["test_every"] = cfg.test_every;
    j["checkpoint_every"] = cfg.checkpoint_every;
    j["evaluate_test_sets"] = cfg.evaluate_test_sets;
    j["log_wall_time"] = cfg.log_wall_time;
    j["genome_init"] = {{"hidden_min", cfg.genome_init.hidden_min},
                        {"hidden_max", cfg.genome_init.hidden_max},
                        {"connections_min", cfg.genome_init.connections_min},
                        {"connections_max", cfg.genome_init.connections_max}};
    j["mutation"] = {{"p_add_connection", cfg.mutation.p_add_connection},
                     {"p_delete_connection", cfg.mutation.p_delete_connection},
                     {"p_rewire_connection", cfg.mutation.p_rewire_connection},
                     {"p_add_node", cfg.mutation.p_add_node},
                     {"p_delete_node", cfg.mutation.p_delete_node},
                     {"p_weight", cfg.mutation.p_weight},
                     {"p_bias", cfg.mutation.p_bias},
                     {"eta", cfg.mutation.eta}};
    return j;
}

inline RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig cfg;
    try {
        detail::check_keys(
            j,
            {"treatment", "master_seed", "worker_count", "generations",
             "offspring_per_generation", "population_size", "initial_population",
             "training_mazes", "test_mazes", "bin_size", "bin_cap",
             "aggregation", "ct_augmented", "diversity_objective",
             "nsga3_normalization", "lexicase", "test_every",
             "checkpoint_every", "evaluate_test_sets", "log_wall_time",
             "genome_init", "mutation"},
            "top level");
        if (j.contains("treatment"))
            cfg.treatment = treatment_from_name(j.at("treatment").get<std::string>());
        detail::get_if_present(j, "master_seed", cfg.master_seed);
        detail::get_if_present(j, "worker_count", cfg.worker_count);
        detail::get_if_present(j, "generations", cfg.generations);
        detail::get_if_present(j, "offspring_per_generation",
                               cfg.offspring_per_generation);
        detail::get_if_present(j, "population_size", cfg.population_size);
        detail::get_if_present(j, "initial_population", cfg.initial_population);
        for (auto [key, out] : {std::pair{"training_mazes", &cfg.training_mazes},
                                std::pair{"test_mazes", &cfg.test_mazes}}) {
            if (!j.contains(key)) continue;
            const auto& mj = j.at(key);
            detail::check_keys(mj, {"count", "seed"}, key);
            detail::get_if_present(mj, "count", out->count);
            detail::get_if_present(mj, "seed", out->seed);
        }
        detail::get_if_present(j, "bin_size", cfg.bin_size);
        if (j.contains("bin_cap")) {
            if (j.at("bin_cap").is_null())
                cfg.bin_cap = std::nullopt;
            else
                cfg.bin_cap = j.at("bin_cap").get<std::size_t>();
        }
        if (j.contains("aggregation")) {
            std::string a = j.at("aggregation").get<std::string>();
            if (a == "mean")
                cfg.aggregation = Aggregation::mean;
            else if (a == "product")
                cfg.aggregation = Aggregation::product;
            else
                throw ConfigError("config: aggregation must be mean or product");
        }
        detail::get_if_present(j, "ct_augmented", cfg.ct_augmented);
        detail::get_if_present(j, "diversity_objective", cfg.diversity_objective);
        if (j.contains("nsga3_normalization")) {
            std::string v = j.at("nsga3_normalization").get<std::string>();
            if (v == "max")
                cfg.nsga3_normalization = moea::NormalizationMode::max;
            else if (v == "intercept")
                cfg.nsga3_normalization = moea::NormalizationMode::intercept;
            else
                throw ConfigError(
                    "config: nsga3_normalization must be max or intercept");
        }
        if (j.contains("lexicase")) {
            const auto& lj = j.at("lexicase");
            detail::check_keys(lj, {"variant", "epsilon_mode", "fixed_epsilon"},
                               "lexicase");
            if (lj.contains("variant")) {
                std::string v = lj.at("variant").get<std::string>();
                if (v == "plain")
                    cfg.lexicase.variant = moea::LexicaseVariant::plain;
                else if (v == "static")
                    cfg.lexicase.variant = moea::LexicaseVariant::static_eps;
                else if (v == "semi_dynamic")
                    cfg.lexicase.variant = moea::LexicaseVariant::semi_dynamic;
                else if (v == "dynamic")
                    cfg.lexicase.variant = moea::LexicaseVariant::dynamic;
                else
                    throw ConfigError("config: unknown lexicase variant '" + v + "'");
            }
            if (lj.contains("epsilon_mode")) {
                std::string v = lj.at("epsilon_mode").get<std::string>();
                if (v == "fixed")
                    cfg.lexicase.epsilon_mode = moea::EpsilonMode::fixed;
                else if (v == "mad")
                    cfg.lexicase.epsilon_mode = moea::EpsilonMode::mad;
                else
                    throw ConfigError("config: epsilon_mode must be fixed or mad");
            }
            detail::get_if_present(lj, "fixed_epsilon", cfg.lexicase.fixed_epsilon);
        }
        detail::get_if_present(j, "test_every", cfg.test_every);
        detail::get_if_present(j, "checkpoint_every", cfg.checkpoint_every);
        detail::get_if_present(j, "evaluate_test_sets", cfg.evaluate_test_sets);
        detail::get_if_present(j, "log_wall_time", cfg.log_wall_time);
        if (j.contains("genome_init")) {
            const auto& gj = j.at("genome_init");
            detail::check_keys(gj,
                               {"hidden_min", "hidden_max", "connections_min",
                                "connections_max"},
                               "genome_init");
            detail::get_if_present(gj, "hidden_min", cfg.genome_init.hidden_min);
            detail::get_if_present(gj, "hidden_max", cfg.genome_init.hidden_max);
            detail::get_if_present(gj, "connections_min",
                                   cfg.genome_init.connections_min);
            detail::get_if_present(gj, "connections_max",
                                   cfg.genome_init.connections_max);
        }
        if (j.contains("mutation")) {
            const auto& mj = j.at("mutation");
            detail::check_keys(mj,
                               {"p_add_connection", "p_delete_connection",
                                "p_rewire_connection", "p_add_node",
                                "p_delete_node", "p_weight", "p_bias", "eta"},
                               "mutation");
            detail::get_if_present(mj, "p_add_connection",
                                   cfg.mutation.p_add_connection);
            detail::get_if_present(mj, "p_delete_connection",
                                   cfg.mutation.p_delete_connection);
            detail::get_if_present(mj, "p_rewire_connection",
                                   cfg.mutation.p_rewire_connection);
            detail::get_if_present(mj, "p_add_node", cfg.mutation.p_add_node);
            detail::get_if_present(mj, "p_delete_node", cfg.mutation.p_delete_node);
            detail::get_if_present(mj, "p_weight", cfg.mutation.p_weight);
            detail::get_if_present(mj, "p_bias", cfg.mutation.p_bias);
            detail::get_if_present(mj, "eta", cfg.mutation.eta);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    validate(cfg);
    return cfg;
}

// ---- evaluation ----

using Genome = neuro::NetworkGenome;
using Ind = Individual<Genome>;

struct EvaluationResult {
    ObjectiveVector objectives;      // per-maze performance
    BehaviorDescriptor descriptor;   // final (x, y) per maze
    int solved_count = 0;
};

inline EvaluationResult evaluate_individual(const Genome& g,
                                            const std::vector<maze::Maze>& mazes,
                                            int workers = 1) {
    neuro::CompiledNetwork net(g);
    std::vector<maze::SimulationOutcome> outcomes(mazes.size());
    parallel_for(mazes.size(), workers, [&](std::size_t i) {
        outcomes[i] = maze::simulate(mazes[i], net);
    });
    EvaluationResult r;
    r.objectives.reserve(mazes.size());
    for (std::size_t i = 0; i < mazes.size(); ++i) {
        r.objectives.push_back(maze::performance(mazes[i], outcomes[i]));
        if (outcomes[i].solved) ++r.solved_count;
    }
    r.descriptor = maze::behavior_descriptor(outcomes, mazes.size());
    return r;
}

// ---- run log ----

struct GenerationRecord {
    std::uint64_t generation = 0;
    double best_train_perf = 0.0;
    bool has_test = false;
    double test_perf = 0.0;
    int train_solved = 0;
    int test_solved = 0;
    bool has_wall = false;
    std::int64_t wall_ms = 0;
};

struct RunLog {
    std::vector<GenerationRecord> records;
    std::vector<std::uint64_t> population_id_hash;   // one per record
    std::uint64_t master_seed = 0;
    std::string rng_scheme;
    std::size_t population = 0;
    Ind champion;
};

inline std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline constexpr const char* run_log_header =
    "generation,best_train_perf,test_perf,train_solved,test_solved,wall_ms";

inline std::string run_log_row(const GenerationRecord& r) {
    std::string out = std::to_string(r.generation);
    out += ',';
    out += format_real(r.best_train_perf);
    out += ',';
    if (r.has_test) out += format_real(r.test_perf);
    out += ',';
    if (r.has_test) out += std::to_string(r.train_solved);
    out += ',';
    if (r.has_test) out += std::to_string(r.test_solved);
    out += ',';
    if (r.has_wall) out += std::to_string(r.wall_ms);
    out += '\n';
    return out;
}

inline std::string run_log_csv(const RunLog& log) {
    std::string out = run_log_header;
    out += '\n';
    for (const GenerationRecord& r : log.records) out += run_log_row(r);
    return out;
}

// ---- checkpoints ----

inline constexpr int checkpoint_format_version = 1;

inline nlohmann::json individual_to_json(const Ind& ind) {
    return {{"id", ind.id},
            {"birth_generation", ind.birth_generation},
            {"objectives", ind.objectives},
            {"descriptor", ind.descriptor},
            {"genome", neuro::to_json(ind.genome)}};
}

inline Ind individual_from_json(const nlohmann::json& j) {
    Ind ind;
    ind.id = j.at("id").get<std::uint64_t>();
    ind.birth_generation = j.at("birth_generation").get<std::uint32_t>();
    ind.objectives = j.at("objectives").get<ObjectiveVector>();
    ind.descriptor = j.at("descriptor").get<BehaviorDescriptor>();
    ind.genome = neuro::genome_from_json(j.at("genome"));
    return ind;
}

inline nlohmann::json archive_checkpoint_json(const bins::BinArchive<Genome>& ar,
                                              Treatment treatment,
                                              std::uint64_t generation,
                                              std::uint64_t master_seed) {
    nlohmann::json bj = nlohmann::json::array();
    for (const auto& bin : ar.bins) {
        nlohmann::json members = nlohmann::json::array();
        for (const auto& m : bin.members) {
            nlohmann::json mj = individual_to_json(m.ind);
            mj["aggregate"] = m.aggregate;
            mj["diversity"] = m.diversity;
            members.push_back(std::move(mj));
        }
        bj.push_back({{"subtask_set", bin.subtask_set},
                      {"is_dynamic", bin.is_dynamic},
                      {"members", std::move(members)}});
    }
    return {{"format_version", checkpoint_format_version},
            {"kind", "archive"},
            {"treatment", treatment_name(treatment)},
            {"generation", generation},
            {"master_seed", master_seed},
            {"next_individual_id", ar.next_individual_id},
            {"reassign_count", ar.reassign_count},
            {"subtask_count", ar.subtask_count},
            {"bin_size", ar.bin_size},
            {"aggregation",
             ar.bins.empty() || ar.bins[0].aggregation == Aggregation::mean
                 ? "mean"
                 : "product"},
            {"bins", std::move(bj)}};
}

inline bins::BinArchive<Genome> archive_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format_version").get<int>() != checkpoint_format_version)
            throw std::runtime_error("checkpoint: unsupported format_version");
        if (j.at("kind").get<std::string>() != "archive")
            throw std::runtime_error("checkpoint: not an archive checkpoint");
        bins::BinArchive<Genome> ar;
        ar.subtask_count = j.at("subtask_count").get<std::size_t>();
        ar.bin_size = j.at("bin_size").get<std::size_t>();
        ar.next_individual_id = j.at("next_individual_id").get<std::uint64_t>();
        ar.reassign_count = j.at("reassign_count").get<std::uint64_t>();
        Aggregation agg = j.at("aggregation").get<std::string>() == "product"
                              ? Aggregation::product
                              : Aggregation::mean;
        for (const auto& bj : j.at("bins")) {
            bins::Bin<Genome> bin;
            bin.subtask_set = bj.at("subtask_set").get<std::vector<std::size_t>>();
            bin.is_dynamic = bj.at("is_dynamic").get<bool>();
            bin.aggregation = agg;
            for (const auto& mj : bj.at("members")) {
                bins::BinMember<Genome> m;
                m.ind = individual_from_json(mj);
                m.aggregate = mj.at("aggregate").get<double>();
                m.diversity = mj.at("diversity").get<double>();
                bin.members.push_back(std::move(m));
            }
            ar.bins.push_back(std::move(bin));
        }
        return ar;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("checkpoint: ") + e.what());
    }
}

inline nlohmann::json population_checkpoint_json(const std::vector<Ind>& pop,
                                                 Treatment treatment,
                                                 std::uint64_t generation,
                                                 std::uint64_t master_seed,
                                                 std::uint64_t next_id) {
    nlohmann::json inds = nlohmann::json::array();
    for (const Ind& i : pop) inds.push_back(individual_to_json(i));
    return {{"format_version", checkpoint_format_version},
            {"kind", "population"},
            {"treatment", treatment_name(treatment)},
            {"generation", generation},
            {"master_seed", master_seed},
            {"next_individual_id", next_id},
            {"individuals", std::move(inds)}};
}

// ---- experiment loop ----

struct RunHooks {
    std::function<void(const GenerationRecord&)> on_record;
    std::function<void(std::uint64_t, const nlohmann::json&)> on_checkpoint;
};

namespace detail {

struct PopulationView {
    // Iterates every individual currently alive in the treatment.
    std::function<void(const std::function<void(const Ind&)>&)> for_each;
};

inline const Ind* best_by_mean(const PopulationView& view) {
    const Ind* best = nullptr;
    double best_mean = -1.0;
    view.for_each([&](const Ind& ind) {
        double m = combined_target(ind.objectives);
        if (!best || m > best_mean || (m == best_mean && ind.id < best->id)) {
            best = &ind;
            best_mean = m;
        }
    });
    return best;
}

inline std::uint64_t population_hash(const PopulationView& view) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    view.for_each([&](const Ind& ind) {
        h = cmoea::detail::mix64(h ^ ind.id);
    });
    return h;
}

// Objective vectors used by the non-CMOEA selection operators: per-maze
// scores, optionally the combined-target mean, optionally whole-population
// behavioral diversity.
inline std::vector<ObjectiveVector> selection_matrix(
    const std::vector<Ind>& pop, const RunConfig& cfg) {
    std::vector<ObjectiveVector> mat;
    mat.reserve(pop.size());
    for (const Ind& ind : pop)
        mat.push_back(cfg.ct_augmented ? augment_with_ct(ind.objectives)
                                       : ind.objectives);
    if (cfg.diversity_objective && pop.size() >= 2) {
        std::vector<double> div(pop.size(), 0.0);
        for (std::size_t i = 0; i < pop.size(); ++i)
            for (std::size_t j = i + 1; j < pop.size(); ++j) {
                double d =
                    manhattan_distance(pop[i].descriptor, pop[j].descriptor);
                div[i] += d;
                div[j] += d;
            }
        for (std::size_t i = 0; i < pop.size(); ++i)
            mat[i].push_back(div[i] / static_cast<double>(pop.size() - 1));
    } else if (cfg.diversity_objective) {
        for (auto& v : mat) v.push_back(0.0);
    }
    return mat;
}

} // namespace detail

inline RunLog run_experiment(const RunConfig& cfg, const RunHooks& hooks = {}) {
    validate(cfg);
    std::size_t m = static_cast<std::size_t>(cfg.training_mazes.count);

    maze::MazeSet train_set =
        maze::generate_maze_set(cfg.training_mazes.seed, cfg.training_mazes.count);
    std::vector<maze::Maze> train = maze::build_mazes(train_set);
    std::vector<maze::Maze> test;
    if (cfg.evaluate_test_sets && cfg.test_mazes.count > 0)
        test = maze::build_mazes(
            maze::generate_maze_set(cfg.test_mazes.seed, cfg.test_mazes.count));

    auto evaluate = [&](const Genome& g) {
        EvaluationResult r = evaluate_individual(g, train);
        return std::pair<ObjectiveVector, BehaviorDescriptor>(
            std::move(r.objectives), std::move(r.descriptor));
    };
    auto mutate = [&](const Genome& parent, Rng& rng) {
        return neuro::mutate(parent, rng, cfg.mutation);
    };

    RunLog log;
    log.master_seed = cfg.master_seed;
    log.rng_scheme =
        "splitmix64 streams: (master_seed, label, generation, index)";

    // Treatment state: either a bin archive or a flat population.
    bins::BinArchive<Genome> archive;
    std::vector<Ind> pop;
    std::uint64_t next_id = 0;

    std::size_t initial_count = effective_initial(cfg);
    std::vector<Ind> initial(initial_count);
    for (std::size_t i = 0; i < initial_count; ++i) {
        Rng rng = stream(cfg.master_seed, "init", i);
        neuro::GenomeInitConfig gi = cfg.genome_init;
        gi.inputs = 10;
        gi.outputs = 2;
        initial[i].id = i;
        initial[i].birth_generation = 0;
        initial[i].genome = neuro::random_genome(rng, gi);
    }
    parallel_for(initial.size(), cfg.worker_count, [&](std::size_t i) {
        auto [obj, desc] = evaluate(initial[i].genome);
        initial[i].objectives = std::move(obj);
        initial[i].descriptor = std::move(desc);
    });
    next_id = initial.size();

    if (cfg.treatment == Treatment::cmoea) {
        Rng rng = stream(cfg.master_seed, "init-bins");
        archive = bins::init_bins<Genome>(m, cfg.bin_cap, rng, cfg.bin_size,
                                          cfg.aggregation);
        bins::seed_archive(archive, initial, cfg.master_seed);
        archive.next_individual_id = next_id;
    } else if (cfg.treatment == Treatment::cmoea_single_bin) {
        archive.subtask_count = m;
        archive.bin_size = effective_population(cfg);
        bins::Bin<Genome> bin;
        bin.aggregation = cfg.aggregation;
        bin.subtask_set.resize(m);
        for (std::size_t i = 0; i < m; ++i) bin.subtask_set[i] = i;
        archive.bins.push_back(std::move(bin));
        bins::seed_archive(archive, initial, cfg.master_seed);
        archive.next_individual_id = next_id;
    } else {
        pop = std::move(initial);
    }

    detail::PopulationView view;
    if (uses_bins(cfg.treatment))
        view.for_each = [&](const std::function<void(const Ind&)>& f) {
            for (const auto& bin : archive.bins)
                for (const auto& mem : bin.members) f(mem.ind);
        };
    else
        view.for_each = [&](const std::function<void(const Ind&)>& f) {
            for (const Ind& ind : pop) f(ind);
        };

    log.population = 0;
    view.for_each([&](const Ind&) { ++log.population; });

    std::size_t pop_size = effective_population(cfg);
    std::vector<ObjectiveVector> lines;
    if (cfg.treatment == Treatment::nsga3) {
        std::size_t dim = m + (cfg.ct_augmented ? 1 : 0) +
                          (cfg.diversity_objective ? 1 : 0);
        lines = moea::reference_lines(dim, pop_size);
    }

    auto log_generation = [&](std::uint64_t g, std::int64_t wall_ms) {
        GenerationRecord rec;
        rec.generation = g;
        const Ind* best = detail::best_by_mean(view);
        rec.best_train_perf = combined_target(best->objectives);
        bool on_schedule = (g % cfg.test_every == 0) || g == cfg.generations;
        if (on_schedule && !test.empty()) {
            rec.has_test = true;
            for (double s : best->objectives)
                if (s == 1.0) ++rec.train_solved;
            EvaluationResult tr =
                evaluate_individual(best->genome, test, cfg.worker_count);
            rec.test_perf = combined_target(tr.objectives);
            rec.test_solved = tr.solved_count;
        }
        if (cfg.log_wall_time) {
            rec.has_wall = true;
            rec.wall_ms = wall_ms;
        }
        log.records.push_back(rec);
        log.population_id_hash.push_back(detail::population_hash(view));
        if (hooks.on_record) hooks.on_record(rec);
        if (g == cfg.generations) log.champion = *best;
    };

    auto checkpoint = [&](std::uint64_t g) {
        if (!hooks.on_checkpoint) return;
        if (cfg.checkpoint_every == 0) return;
        if (g % cfg.checkpoint_every != 0 && g != cfg.generations) return;
        if (uses_bins(cfg.treatment))
            hooks.on_checkpoint(
                g, archive_checkpoint_json(archive, cfg.treatment, g,
                                           cfg.master_seed));
        else
            hooks.on_checkpoint(
                g, population_checkpoint_json(pop, cfg.treatment, g,
                                              cfg.master_seed, next_id));
    };

    log_generation(0, 0);
    checkpoint(0);

    for (std::uint64_t g = 1; g <= cfg.generations; ++g) {
        auto t0 = std::chrono::steady_clock::now();
        std::size_t k = cfg.offspring_per_generation;
        if (cfg.treatment == Treatment::cmoea) {
            bins::GenerationOptions opt;
            opt.stream_seed = cfg.master_seed;
            opt.generation = g;
            opt.workers = cfg.worker_count;
            bins::cmoea_generation(archive, k, evaluate, mutate, opt);
        } else if (cfg.treatment == Treatment::cmoea_single_bin) {
            bins::Bin<Genome>& bin = archive.bins[0];
            moea::RankInfo info = bins::bin_rank_info(bin);
            Rng prng = stream(cfg.master_seed, "parents", g);
            std::vector<Ind> children(k);
            for (std::size_t i = 0; i < k; ++i) {
                const Ind& parent =
                    bin.members[moea::nsga2_parent_tournament(info, prng)].ind;
                Rng mrng = stream(cfg.master_seed, "mutate", g, i);
                children[i].id = archive.next_individual_id + i;
                children[i].birth_generation = static_cast<std::uint32_t>(g);
                children[i].genome = mutate(parent.genome, mrng);
            }
            parallel_for(children.size(), cfg.worker_count, [&](std::size_t i) {
                auto [obj, desc] = evaluate(children[i].genome);
                children[i].objectives = std::move(obj);
                children[i].descriptor = std::move(desc);
            });
            archive.next_individual_id += children.size();
            std::vector<const Ind*> candidates;
            candidates.reserve(children.size());
            for (const Ind& c : children) candidates.push_back(&c);
            Rng brng = stream(cfg.master_seed, "bin-select", g, 0);
            bins::within_bin_select(bin, candidates, archive.bin_size, brng);
        } else {
            auto pmat = detail::selection_matrix(pop, cfg);
            Rng prng = stream(cfg.master_seed, "parents", g);
            std::vector<std::size_t> parent_idx(k);
            if (cfg.treatment == Treatment::nsga2) {
                moea::RankInfo info = moea::rank_and_crowding(pmat);
                for (auto& pi : parent_idx)
                    pi = moea::nsga2_parent_tournament(info, prng);
            } else if (cfg.treatment == Treatment::nsga3) {
                for (auto& pi : parent_idx) pi = prng.uniform_index(pop.size());
            } else {
                for (auto& pi : parent_idx)
                    pi = moea::lexicase_select(pmat, prng, cfg.lexicase);
            }
            std::vector<Ind> merged = pop;
            merged.resize(pop.size() + k);
            for (std::size_t i = 0; i < k; ++i) {
                Ind& child = merged[pop.size() + i];
                Rng mrng = stream(cfg.master_seed, "mutate", g, i);
                child.id = next_id + i;
                child.birth_generation = static_cast<std::uint32_t>(g);
                child.genome = mutate(pop[parent_idx[i]].genome, mrng);
            }
            parallel_for(k, cfg.worker_count, [&](std::size_t i) {
                Ind& child = merged[pop.size() + i];
                auto [obj, desc] = evaluate(child.genome);
                child.objectives = std::move(obj);
                child.descriptor = std::move(desc);
            });
            next_id += k;
            auto mmat = detail::selection_matrix(merged, cfg);
            Rng srng = stream(cfg.master_seed, "survive", g);
            std::vector<std::size_t> keep;
            if (cfg.treatment == Treatment::nsga2)
                keep = moea::nsga2_survivor_select(mmat, pop_size, srng);
            else if (cfg.treatment == Treatment::nsga3)
                keep = moea::nsga3_survivor_select(mmat, pop_size, lines, srng,
                                                   cfg.nsga3_normalization);
            else
                keep = moea::lexicase_survivor_select(mmat, pop_size, srng,
                                                      cfg.lexicase);
            std::vector<Ind> survivors;
            survivors.reserve(keep.size());
            for (std::size_t i : keep) survivors.push_back(std::move(merged[i]));
            pop = std::move(survivors);
        }
        auto t1 = std::chrono::steady_clock::now();
        log_generation(
            g, std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0)
                   .count());
        checkpoint(g);
    }
    return log;
}

} // namespace cmoea::harness

#endif
