// cmoea command line tool: maze generation, evolution runs, evaluation,
// run statistics and trajectory export.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <cmoea/cmoea.hpp>

namespace fs = std::filesystem;
using cmoea::harness::ConfigError;
using cmoea::harness::format_real;

namespace {

void print_effective_config(const nlohmann::json& j) {
    std::cerr << j.dump(2) << "\n";
}

// File parse/validation problems count as usage errors (exit 2).
template <typename F>
auto load_or_usage(F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
}

int env_workers(int fallback) {
    const char* v = std::getenv("CMOEA_WORKERS");
    if (!v) return fallback;
    int n = 0;
    try {
        n = std::stoi(v);
    } catch (const std::exception&) {
        throw ConfigError("CMOEA_WORKERS must be an integer");
    }
    if (n < 1) throw ConfigError("CMOEA_WORKERS must be >= 1");
    return n;
}

// ---- generate-mazes ----

int cmd_generate_mazes(int count, std::uint64_t seed, const std::string& out) {
    print_effective_config({{"command", "generate-mazes"},
                            {"count", count},
                            {"seed", seed},
                            {"out", out}});
    cmoea::maze::MazeSet set = cmoea::maze::generate_maze_set(seed, count);
    try {
        cmoea::write_json_file(out, cmoea::maze::maze_set_to_json(set));
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    for (std::size_t i = 0; i < set.grids.size(); ++i) {
        const auto& g = set.grids[i];
        std::cout << "maze " << i << ": goal=(" << g.goal_col << ","
                  << g.goal_row << ") walls=";
        for (std::size_t w = 0; w < g.walls.size(); ++w) {
            const auto& dw = g.walls[w];
            std::cout << (w ? " " : "") << (dw.vertical ? 'v' : 'h')
                      << dw.line_index << '[' << dw.span_lo << ".."
                      << dw.span_hi << ")gap" << dw.gap_index;
        }
        std::cout << "\n";
    }
    return 0;
}

// ---- evolve ----

struct EvolveFlags {
    std::string config_path;
    std::string out_dir;
    std::string treatment;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> generations;
    std::optional<std::size_t> offspring;
    std::optional<std::size_t> population;
    std::optional<std::size_t> bin_size;
    std::optional<long long> bin_cap;   // -1 = exhaustive
    std::optional<int> workers;
    std::optional<int> training_count;
    std::optional<std::uint64_t> training_seed;
    std::optional<int> test_count;
    std::optional<std::uint64_t> test_seed;
};

int cmd_evolve(const EvolveFlags& fl) {
    cmoea::harness::RunConfig cfg;
    if (!fl.config_path.empty())
        cfg = load_or_usage([&] {
            return cmoea::harness::config_from_json(
                cmoea::read_json_file(fl.config_path));
        });
    if (!fl.treatment.empty())
        cfg.treatment = cmoea::harness::treatment_from_name(fl.treatment);
    if (fl.seed) cfg.master_seed = *fl.seed;
    if (fl.generations) cfg.generations = *fl.generations;
    if (fl.offspring) cfg.offspring_per_generation = *fl.offspring;
    if (fl.population) cfg.population_size = *fl.population;
    if (fl.bin_size) cfg.bin_size = *fl.bin_size;
    if (fl.bin_cap) {
        if (*fl.bin_cap < 0)
            cfg.bin_cap = std::nullopt;
        else
            cfg.bin_cap = static_cast<std::size_t>(*fl.bin_cap);
    }
    if (fl.training_count) cfg.training_mazes.count = *fl.training_count;
    if (fl.training_seed) cfg.training_mazes.seed = *fl.training_seed;
    if (fl.test_count) cfg.test_mazes.count = *fl.test_count;
    if (fl.test_seed) cfg.test_mazes.seed = *fl.test_seed;
    cfg.worker_count = fl.workers ? *fl.workers : env_workers(cfg.worker_count);
    cmoea::harness::validate(cfg);

    std::string out_dir = fl.out_dir;
    if (out_dir.empty()) {
        const char* env = std::getenv("CMOEA_OUT_DIR");
        if (env) out_dir = env;
    }
    if (out_dir.empty())
        throw ConfigError("evolve: output directory required (--out or "
                          "CMOEA_OUT_DIR)");

    nlohmann::json cfg_json = cmoea::harness::to_json(cfg);
    print_effective_config(cfg_json);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec)
        throw ConfigError("evolve: cannot create output directory " + out_dir);
    cmoea::write_json_file(out_dir + "/config.json", cfg_json);

    std::ofstream csv(out_dir + "/run.csv", std::ios::binary | std::ios::trunc);
    if (!csv)
        throw ConfigError("evolve: cannot write " + out_dir + "/run.csv");
    csv << cmoea::harness::run_log_header << "\n";
    csv.flush();

    cmoea::harness::RunHooks hooks;
    hooks.on_record = [&](const cmoea::harness::GenerationRecord& rec) {
        csv << cmoea::harness::run_log_row(rec);
        csv.flush();
    };
    hooks.on_checkpoint = [&](std::uint64_t gen, const nlohmann::json& j) {
        cmoea::write_json_file(
            out_dir + "/checkpoint_" + std::to_string(gen) + ".json", j);
    };

    cmoea::harness::RunLog log = cmoea::harness::run_experiment(cfg, hooks);

    nlohmann::json champ = cmoea::neuro::to_json(log.champion.genome);
    champ["id"] = log.champion.id;
    champ["birth_generation"] = log.champion.birth_generation;
    champ["objectives"] = log.champion.objectives;
    cmoea::write_json_file(out_dir + "/champion.json", champ);

    const auto& last = log.records.back();
    std::cout << "done generations=" << cfg.generations
              << " population=" << log.population
              << " best_train_perf=" << format_real(last.best_train_perf);
    if (last.has_test)
        std::cout << " test_perf=" << format_real(last.test_perf)
                  << " train_solved=" << last.train_solved
                  << " test_solved=" << last.test_solved;
    std::cout << "\n";
    return 0;
}

// ---- evaluate ----

int cmd_evaluate(const std::string& genome_path, const std::string& mazes_path,
                 bool check_mazes, int workers) {
    print_effective_config({{"command", "evaluate"},
                            {"genome", genome_path},
                            {"mazes", mazes_path},
                            {"check_mazes", check_mazes},
                            {"workers", workers}});
    cmoea::maze::MazeSet set = load_or_usage([&] {
        return cmoea::maze::maze_set_from_json(
            cmoea::read_json_file(mazes_path));
    });
    if (check_mazes)
        std::cout << "ok " << set.grids.size() << " mazes\n";
    if (genome_path.empty()) {
        if (!check_mazes)
            throw ConfigError("evaluate: --genome required unless "
                              "--check-mazes is given");
        return 0;
    }
    cmoea::neuro::NetworkGenome genome = load_or_usage([&] {
        return cmoea::neuro::genome_from_json(
            cmoea::read_json_file(genome_path));
    });
    std::vector<cmoea::maze::Maze> mazes = cmoea::maze::build_mazes(set);
    std::vector<cmoea::maze::SimulationOutcome> outcomes(mazes.size());
    cmoea::neuro::CompiledNetwork net(genome);
    cmoea::parallel_for(mazes.size(), workers, [&](std::size_t i) {
        outcomes[i] = cmoea::maze::simulate(mazes[i], net);
    });
    std::cout << "maze_index,performance,solved,final_x,final_y\n";
    for (std::size_t i = 0; i < mazes.size(); ++i) {
        std::cout << i << ','
                  << format_real(cmoea::maze::performance(mazes[i], outcomes[i]))
                  << ',' << (outcomes[i].solved ? 1 : 0) << ','
                  << format_real(outcomes[i].final_position.x) << ','
                  << format_real(outcomes[i].final_position.y) << "\n";
    }
    return 0;
}

// ---- stats ----

struct RunSeries {
    std::string treatment;
    std::vector<std::uint64_t> generations;
    std::vector<double> values;
};

RunSeries load_run(const fs::path& dir, const std::string& metric,
                   std::uint64_t every) {
    RunSeries rs;
    nlohmann::json cj = cmoea::read_json_file((dir / "config.json").string());
    rs.treatment = cj.at("treatment").get<std::string>();
    std::ifstream in(dir / "run.csv");
    if (!in) throw std::runtime_error("stats: cannot read " +
                                      (dir / "run.csv").string());
    std::string line;
    if (!std::getline(in, line) || line != cmoea::harness::run_log_header)
        throw std::runtime_error("stats: bad run log header in " +
                                 (dir / "run.csv").string());
    std::vector<std::pair<std::uint64_t, std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        cells.resize(6);
        std::uint64_t gen = std::stoull(cells[0]);
        rows.emplace_back(gen, metric == "test" ? cells[2] : cells[1]);
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto [gen, cell] = rows[i];
        if (gen % every != 0 && i + 1 != rows.size()) continue;
        if (cell.empty())
            throw std::runtime_error("stats: missing " + metric +
                                     " value at generation " +
                                     std::to_string(gen) + " in " +
                                     (dir / "run.csv").string());
        rs.generations.push_back(gen);
        rs.values.push_back(std::stod(cell));
    }
    return rs;
}

int cmd_stats(const std::vector<std::string>& run_dirs, std::uint64_t every,
              double alpha, int resamples, std::uint64_t seed,
              const std::string& metric) {
    print_effective_config({{"command", "stats"},
                            {"runs", run_dirs},
                            {"checkpoint_every", every},
                            {"alpha", alpha},
                            {"resamples", resamples},
                            {"seed", seed},
                            {"metric", metric}});
    std::vector<RunSeries> runs;
    for (const auto& d : run_dirs)
        runs.push_back(load_or_usage([&] { return load_run(d, metric, every); }));
    for (const auto& r : runs)
        if (r.generations != runs[0].generations)
            throw ConfigError("stats: runs disagree on checkpoint generations");
    const auto& gens = runs[0].generations;

    std::map<std::string, std::vector<const RunSeries*>> by_treatment;
    for (const auto& r : runs) by_treatment[r.treatment].push_back(&r);
    std::size_t treatment_count = by_treatment.size();

    std::cout << "# runs=" << runs.size() << " treatments=" << treatment_count
              << " checkpoints=" << gens.size() << " metric=" << metric << "\n";
    std::size_t tidx = 0;
    for (const auto& [name, series] : by_treatment) {
        if (series.size() == 1)
            std::cerr << "warning: treatment " << name
                      << " has a single run, CIs degenerate to the point "
                         "value\n";
        for (std::size_t c = 0; c < gens.size(); ++c) {
            std::vector<double> vals;
            for (const RunSeries* r : series) vals.push_back(r->values[c]);
            cmoea::Rng rng = cmoea::stream(seed, "bootstrap", tidx, c);
            auto [lo, hi] = cmoea::stats::bootstrap_median_ci(
                vals, static_cast<std::size_t>(resamples), 0.95, rng);
            std::cout << "[median] generation=" << gens[c] << " treatment="
                      << name << " n=" << series.size() << " median="
                      << format_real(cmoea::stats::median(vals)) << " ci_lo="
                      << format_real(lo) << " ci_hi=" << format_real(hi)
                      << "\n";
        }
        ++tidx;
    }
    std::vector<std::string> names;
    for (const auto& [name, series] : by_treatment) names.push_back(name);
    for (std::size_t a = 0; a < names.size(); ++a) {
        for (std::size_t b = a + 1; b < names.size(); ++b) {
            std::vector<double> pvals(gens.size());
            for (std::size_t c = 0; c < gens.size(); ++c) {
                std::vector<double> va, vb;
                for (const RunSeries* r : by_treatment[names[a]])
                    va.push_back(r->values[c]);
                for (const RunSeries* r : by_treatment[names[b]])
                    vb.push_back(r->values[c]);
                pvals[c] = cmoea::stats::mann_whitney_u(va, vb);
                std::cout << "[pvalue] generation=" << gens[c] << " a="
                          << names[a] << " b=" << names[b] << " p="
                          << format_real(pvals[c]) << "\n";
            }
            cmoea::stats::SignificanceBands bands =
                cmoea::stats::significance_bands(pvals, alpha, treatment_count);
            std::cout << "[bands] a=" << names[a] << " b=" << names[b]
                      << " alpha=" << format_real(alpha)
                      << " required_run=" << bands.required_run_length
                      << " positive=";
            for (bool p : bands.positive) std::cout << (p ? '1' : '0');
            std::cout << "\n";
        }
    }
    return 0;
}

// ---- export-trajectory ----

struct TrajectoryObserver {
    std::ostream& out;
    std::size_t maze_index;
    void operator()(int step, const cmoea::maze::RobotState& r) const {
        out << maze_index << ',' << step << ',' << format_real(r.position.x)
            << ',' << format_real(r.position.y) << ','
            << format_real(r.heading) << "\n";
    }
};

int cmd_export_trajectory(const std::string& genome_path,
                          const std::string& mazes_path, long long maze_index,
                          const std::string& out_path) {
    print_effective_config({{"command", "export-trajectory"},
                            {"genome", genome_path},
                            {"mazes", mazes_path},
                            {"maze_index", maze_index},
                            {"out", out_path}});
    cmoea::maze::MazeSet set = load_or_usage([&] {
        return cmoea::maze::maze_set_from_json(
            cmoea::read_json_file(mazes_path));
    });
    cmoea::neuro::NetworkGenome genome = load_or_usage([&] {
        return cmoea::neuro::genome_from_json(
            cmoea::read_json_file(genome_path));
    });
    if (maze_index >= static_cast<long long>(set.grids.size()))
        throw ConfigError("export-trajectory: maze index out of range");
    std::vector<cmoea::maze::Maze> mazes = cmoea::maze::build_mazes(set);
    cmoea::neuro::CompiledNetwork net(genome);

    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!out_path.empty()) {
        file.open(out_path, std::ios::binary | std::ios::trunc);
        if (!file)
            throw ConfigError("export-trajectory: cannot write " + out_path);
        out = &file;
    }
    *out << "maze_index,step,x,y,heading\n";
    for (std::size_t i = 0; i < mazes.size(); ++i) {
        if (maze_index >= 0 && static_cast<std::size_t>(maze_index) != i)
            continue;
        TrajectoryObserver obs{*out, i};
        cmoea::maze::simulate(mazes[i], net, obs);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"combinatorial multi-objective evolution of maze-navigating "
                 "robots"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("generate-mazes", "write a maze set file");
    int gm_count = 1;
    std::uint64_t gm_seed = 0;
    std::string gm_out = "mazes.json";
    gen->add_option("--count", gm_count, "number of mazes")
        ->check(CLI::PositiveNumber);
    gen->add_option("--seed", gm_seed, "generator seed");
    gen->add_option("--out", gm_out, "output path");

    auto* ev = app.add_subcommand("evolve", "run an evolution experiment");
    EvolveFlags fl;
    std::uint64_t ev_seed = 0, ev_gens = 0;
    std::size_t ev_off = 0, ev_pop = 0, ev_bs = 0;
    long long ev_cap = 0;
    int ev_workers = 0, ev_tc = 0, ev_xc = 0;
    std::uint64_t ev_ts = 0, ev_xs = 0;
    ev->add_option("--config", fl.config_path, "config file (json)");
    ev->add_option("--out", fl.out_dir, "output directory");
    ev->add_option("--treatment", fl.treatment,
                   "cmoea, cmoea_single_bin, nsga2, nsga3 or lexicase");
    auto opt = [](auto* o) { o->expected(1); return o; };
    opt(ev->add_option("--seed", ev_seed, "master seed"));
    opt(ev->add_option("--generations", ev_gens, "generations to run"));
    opt(ev->add_option("--offspring", ev_off, "children per generation"));
    opt(ev->add_option("--population", ev_pop, "population size override"));
    opt(ev->add_option("--bin-size", ev_bs, "individuals per bin"));
    opt(ev->add_option("--bin-cap", ev_cap, "bin count cap, -1 for exhaustive"));
    opt(ev->add_option("--workers", ev_workers, "evaluation worker threads"));
    opt(ev->add_option("--training-count", ev_tc, "training maze count"));
    opt(ev->add_option("--training-seed", ev_ts, "training maze seed"));
    opt(ev->add_option("--test-count", ev_xc, "test maze count"));
    opt(ev->add_option("--test-seed", ev_xs, "test maze seed"));

    auto* evl = app.add_subcommand("evaluate", "score a genome on a maze set");
    std::string evl_genome, evl_mazes;
    bool evl_check = false;
    int evl_workers = 1;
    std::uint64_t evl_seed = 0;
    evl->add_option("--genome", evl_genome, "genome file (json)");
    evl->add_option("--mazes", evl_mazes, "maze set file (json)")->required();
    evl->add_flag("--check-mazes", evl_check, "validate the maze file only");
    evl->add_option("--workers", evl_workers, "evaluation worker threads");
    evl->add_option("--seed", evl_seed, "unused, evaluation is deterministic");

    auto* st = app.add_subcommand("stats", "summarize runs with medians, CIs, "
                                           "p-values and significance bands");
    std::vector<std::string> st_runs;
    std::uint64_t st_every = 100;
    double st_alpha = 0.05;
    int st_resamples = 1000;
    std::uint64_t st_seed = 0;
    std::string st_metric = "train";
    st->add_option("--runs", st_runs, "run output directories")->required();
    st->add_option("--checkpoint-every", st_every, "checkpoint spacing")
        ->check(CLI::PositiveNumber);
    st->add_option("--alpha", st_alpha, "significance level");
    st->add_option("--resamples", st_resamples, "bootstrap resamples")
        ->check(CLI::PositiveNumber);
    st->add_option("--seed", st_seed, "bootstrap seed");
    st->add_option("--metric", st_metric, "train or test")
        ->check(CLI::IsMember({"train", "test"}));

    auto* tr = app.add_subcommand("export-trajectory",
                                  "dump per-step robot poses as csv");
    std::string tr_genome, tr_mazes, tr_out;
    long long tr_index = -1;
    std::uint64_t tr_seed = 0;
    tr->add_option("--genome", tr_genome, "genome file (json)")->required();
    tr->add_option("--mazes", tr_mazes, "maze set file (json)")->required();
    tr->add_option("--maze-index", tr_index, "restrict to one maze");
    tr->add_option("--out", tr_out, "output path, stdout if omitted");
    tr->add_option("--seed", tr_seed, "unused, simulation is deterministic");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed()) return cmd_generate_mazes(gm_count, gm_seed, gm_out);
        if (ev->parsed()) {
            if (ev->count("--seed")) fl.seed = ev_seed;
            if (ev->count("--generations")) fl.generations = ev_gens;
            if (ev->count("--offspring")) fl.offspring = ev_off;
            if (ev->count("--population")) fl.population = ev_pop;
            if (ev->count("--bin-size")) fl.bin_size = ev_bs;
            if (ev->count("--bin-cap")) fl.bin_cap = ev_cap;
            if (ev->count("--workers")) fl.workers = ev_workers;
            if (ev->count("--training-count")) fl.training_count = ev_tc;
            if (ev->count("--training-seed")) fl.training_seed = ev_ts;
            if (ev->count("--test-count")) fl.test_count = ev_xc;
            if (ev->count("--test-seed")) fl.test_seed = ev_xs;
            return cmd_evolve(fl);
        }
        if (evl->parsed())
            return cmd_evaluate(evl_genome, evl_mazes, evl_check, evl_workers);
        if (st->parsed())
            return cmd_stats(st_runs, st_every, st_alpha, st_resamples,
                             st_seed, st_metric);
        if (tr->parsed())
            return cmd_export_trajectory(tr_genome, tr_mazes, tr_index, tr_out);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
