#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mdam/config.hpp"
#include "mdam/pipeline.hpp"
#include "mdam/simgen.hpp"
#include "mdam/study.hpp"
#include "mdam/version.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace mdam;

namespace {

constexpr std::uint64_t kPopulationSalt = 0x706f70;
constexpr std::uint64_t kSampleSalt = 0x736d70;

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

// Completed datasets of an imputation set directory, in name order.
std::vector<fs::path> dataset_files(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".csv" &&
            e.path().filename().string().rfind("imputed_", 0) == 0)
            files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw Error("no imputed_*.csv files in " + dir.string());
    return files;
}

std::vector<CompletedDataset> load_completed(const ProjectConfig& config, const std::vector<fs::path>& files) {
    std::vector<CompletedDataset> out;
    for (const auto& f : files) {
        const SurveyTable t = load_survey(config, f);
        for (std::size_t j = 0; j < t.cols(); ++j)
            for (std::size_t i = 0; i < t.rows(); ++i)
                if (t.missing(j, i)) throw Error(f.string() + " has missing cells");
        out.push_back(CompletedDataset::from_table(t));
    }
    return out;
}

std::vector<PooledRow> pooled_rows(const ProjectConfig& config, const std::vector<CompletedDataset>& datasets) {
    if (config.estimands.empty()) throw Error("config lists no estimands");
    return pool_estimands(datasets, config.estimands, config.design);
}

void emit(const std::string& text, const std::string& out) {
    if (out.empty() || out == "-")
        std::cout << text;
    else
        write_file(out, text);
}

SimulationConfig simulation_preset(const std::string& preset, double theta1, bool full_scale,
                                   std::size_t population_size) {
    if (preset != "appendix-b") throw Error("unknown preset '" + preset + "'");
    SimulationConfig sim = SimulationConfig::appendix_b(theta1);
    if (full_scale) sim.full_scale();
    if (population_size > 0) {
        sim.expected_sample_size *= double(population_size) / double(sim.population_size);
        sim.population_size = population_size;
    }
    return sim;
}

ProjectConfig simulation_project(const Population& pop) {
    ProjectConfig c;
    c.schema = simulation_schema();
    c.population_size = double(pop.size());
    for (const auto& e : simulation_margins(pop).entries) {
        MarginSpec m;
        m.variable = e.variable;
        m.level = e.level;
        m.total = e.total;
        m.calibrate = true;
        c.margins.push_back(m);
    }
    DesignSpec x1{"X1", {}, true};
    DesignSpec x2{"X2", {Term::main("X1")}, true};
    c.margin_chain = {x1, x2};
    c.estimands = simulation_total_estimands();
    const auto probs = simulation_probability_estimands();
    c.estimands.insert(c.estimands.end(), probs.begin(), probs.end());
    return c;
}

// --- subcommands -------------------------------------------------------------

struct SimulateArgs {
    std::string preset = "appendix-b";
    double theta1 = -2.0;
    int replicates = 1;
    std::size_t population_size = 0;
    std::uint64_t seed = 20240101;
    std::string out;
    bool full_scale = false;
};

void run_simulate(const SimulateArgs& a) {
    const SimulationConfig sim = simulation_preset(a.preset, a.theta1, a.full_scale, a.population_size);
    fs::create_directories(a.out);
    Rng pop_rng = make_stream(a.seed, 0, kPopulationSalt);
    const Population pop = generate_population(sim, pop_rng);
    const auto cells = unit_nr_cell_probabilities(pop);
    const ProjectConfig project = simulation_project(pop);
    write_file(fs::path(a.out) / "config.json", format_config(project));

    std::ostringstream truth;
    truth << "estimand,truth\n";
    const CompletedDataset everyone = population_dataset(pop);
    for (const auto& e : project.estimands)
        truth << '"' << format_estimand(e) << "\"," << format_number(estimate(everyone, e, project.design).estimate)
              << '\n';
    write_file(fs::path(a.out) / "truth.csv", truth.str());

    for (int r = 1; r <= a.replicates; ++r) {
        Rng rng = make_stream(a.seed, std::uint64_t(r), kSampleSalt);
        const auto units = draw_poisson_sample(pop, rng);
        const SurveyTable full = sample_table(pop, units);
        const SurveyTable table =
            inject_item_nonresponse(inject_unit_nonresponse(full, cells, rng), sim.item_nonresponse, rng);
        write_table(table, fs::path(a.out) / ("sample_" + std::to_string(r) + ".csv"));
        std::cerr << "sample " << r << ": n=" << table.rows() << " unit nonrespondents "
                  << table.unit_nonrespondent_count() << '\n';
    }
}

struct ImputeArgs {
    std::string config;
    std::string data;
    std::string out;
    std::string method = "mmh";
    std::string engine;
    int datasets = 0;
    int cycles = 0;
    std::uint64_t seed = 1;
    int iterations = 0;
    int burn_in = -1;
    int thin = 0;
    unsigned threads = 1;
};

void run_impute(const ImputeArgs& a) {
    const ProjectConfig config = load_config(a.config);
    const SurveyTable table = load_survey(config, a.data);
    const ImputationProblem problem = make_problem(config, table);

    ArmConfig arm = ArmConfig::make(parse_arm(a.method), a.datasets > 0 ? a.datasets : config.mice.datasets);
    arm.mice = config.mice;
    if (a.cycles > 0) arm.mice.cycles = a.cycles;
    arm.gibbs = config.gibbs;
    if (a.iterations > 0) arm.gibbs.iterations = a.iterations;
    if (a.burn_in >= 0) arm.gibbs.burn_in = a.burn_in;
    if (a.thin > 0) arm.gibbs.thin = a.thin;
    if (!a.engine.empty()) arm.engine = parse_item_engine(a.engine);
    arm.threads = a.threads;
    if (arm.kind == ArmKind::mmh && arm.engine == ItemEngine::gibbs)
        throw Error("--method mmh uses the mice engine; use --method mh for gibbs");
    if (arm.kind == ArmKind::mh && !a.engine.empty() && arm.engine == ItemEngine::mice)
        throw Error("--method mh uses the gibbs engine");
    // With the gibbs engine and no explicit iteration count, run just long
    // enough to emit L states.
    if (a.datasets > 0 && a.iterations <= 0) arm.gibbs.iterations = arm.gibbs.burn_in + a.datasets * arm.gibbs.thin;

    Rng rng = make_stream(a.seed, 0);
    const ImputationSet set = run_arm(table, problem, arm, rng);

    fs::create_directories(a.out);
    const double N = *problem.population_size;
    for (std::size_t l = 0; l < set.datasets.size(); ++l)
        write_table(set.datasets[l].to_table(N), fs::path(a.out) / ("imputed_" + std::to_string(l + 1) + ".csv"),
                    config.missing_token);

    json p;
    p["tool"] = "mdam";
    p["version"] = std::string(version());
    p["config"] = fs::absolute(a.config).string();
    p["data"] = fs::absolute(a.data).string();
    p["method"] = std::string(to_string(arm.kind));
    const ItemEngine engine = arm.kind == ArmKind::mmh ? ItemEngine::mice
                              : arm.kind == ArmKind::mh ? ItemEngine::gibbs
                                                        : arm.engine;
    p["engine"] = std::string(to_string(engine));
    p["seed"] = a.seed;
    p["datasets"] = set.datasets.size();
    if (engine == ItemEngine::mice) {
        p["cycles"] = arm.mice.cycles;
    } else {
        p["iterations"] = arm.gibbs.iterations;
        p["burn_in"] = arm.gibbs.burn_in;
        p["thin"] = arm.gibbs.thin;
    }
    p["population_size"] = N;
    p["rows"] = table.rows();
    p["unit_nonrespondents"] = table.unit_nonrespondent_count();
    json margins = json::array();
    for (const auto& e : set.margins.entries)
        margins.push_back({{"variable", e.variable}, {"level", e.level}, {"total", e.total}, {"variance", e.variance}});
    p["margins"] = margins;
    json traces = json::array();
    for (const auto& steps : set.traces) {
        json d = json::array();
        for (const auto& s : steps) {
            json levels = json::array();
            for (const auto& t : s.targets.levels)
                levels.push_back({{"level", t.level},
                                  {"drawn_total", t.drawn_total},
                                  {"count", t.count},
                                  {"proportion", t.proportion}});
            d.push_back({{"variable", s.variable}, {"theta", s.theta}, {"targets", levels}});
        }
        traces.push_back(d);
    }
    p["margin_steps"] = traces;
    write_file(fs::path(a.out) / "provenance.json", p.dump(2) + "\n");
    std::cerr << "wrote " << set.datasets.size() << " completed datasets to " << a.out << '\n';
}

void run_estimate(const std::string& config_path, const std::vector<std::string>& data, const std::string& out) {
    const ProjectConfig config = load_config(config_path);
    if (config.estimands.empty()) throw Error("config lists no estimands");
    std::ostringstream s;
    s << "dataset,estimand,estimate,variance,se\n";
    for (const auto& f : data) {
        const auto d = load_completed(config, {f});
        for (const auto& e : config.estimands) {
            const auto h = estimate(d.front(), e, config.design);
            s << '"' << f << "\",\"" << format_estimand(e) << "\"," << format_number(h.estimate) << ','
              << format_number(h.variance) << ',' << format_number(std::sqrt(h.variance)) << '\n';
        }
    }
    emit(s.str(), out);
}

std::vector<fs::path> resolve_inputs(const std::string& set, const std::vector<std::string>& data) {
    if (!set.empty()) return dataset_files(set);
    if (data.size() < 2) throw Error("pooling needs --set or at least two --data files");
    return {data.begin(), data.end()};
}

void run_pool(const std::string& config_path, const std::string& set, const std::vector<std::string>& data,
              const std::string& out) {
    const ProjectConfig config = load_config(config_path);
    const auto datasets = load_completed(config, resolve_inputs(set, data));
    emit(format_pooled_csv(pooled_rows(config, datasets)), out);
}

void run_report(const std::string& config_path, const std::string& set, const std::string& out) {
    const ProjectConfig config = load_config(config_path);
    const auto datasets = load_completed(config, dataset_files(set));
    std::vector<PooledRow> rows;
    if (!config.estimands.empty()) rows = pooled_rows(config, datasets);
    for (const auto& g : config.subgroups) {
        const auto sub = subgroup_report(datasets, g.event, g.groups, config.design);
        rows.insert(rows.end(), sub.begin(), sub.end());
    }
    if (rows.empty()) throw Error("config lists no estimands or subgroups");
    emit(format_pooled_csv(rows), out);
}

struct StudyArgs {
    std::string preset = "appendix-b";
    double theta1 = -2.0;
    int replicates = 100;
    int datasets = 20;
    std::uint64_t seed = 20240101;
    std::string out;
    std::size_t population_size = 0;
    unsigned threads = 1;
    bool full_scale = false;
    std::vector<std::string> arms{"mmh", "ih"};
    int cycles = 5;
    int burn_in = 1000;
    int thin = 50;
    bool quiet = false;
};

void run_simulate_study(const StudyArgs& a) {
    StudyConfig c;
    c.simulation = simulation_preset(a.preset, a.theta1, a.full_scale, a.population_size);
    c.replicates = a.replicates;
    c.datasets = a.datasets;
    c.seed = a.seed;
    c.threads = a.threads;
    c.arms.clear();
    for (const auto& s : a.arms) c.arms.push_back(parse_arm(s));
    c.mice.cycles = a.cycles;
    c.gibbs.burn_in = a.burn_in;
    c.gibbs.thin = a.thin;

    const auto start = std::chrono::steady_clock::now();
    const StudyReport report = run_study(c, [&](int done) {
        if (!a.quiet) std::cerr << "\rreplicates " << done << '/' << c.replicates << std::flush;
    });
    if (!a.quiet) std::cerr << '\n';
    write_study(report, a.out);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cerr << "wrote " << a.out << " (" << report.failures << " failed replicates, " << secs << " s)\n";
}

void run_synth_voter(std::size_t rows, std::size_t nonrespondents, std::uint64_t seed, const std::string& out) {
    VoterSynthConfig c;
    c.rows = rows;
    c.unit_nonrespondents = nonrespondents;
    Rng rng = make_stream(seed, 0);
    write_table(generate_voter_like(c, rng), out);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multiple imputation for survey unit and item nonresponse with known margins"};
    app.set_version_flag("--version", std::string(version()));
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "Draw a population and nonresponse samples from a preset");
    c_sim->add_option("--preset", sim.preset, "Simulation preset")->capture_default_str();
    c_sim->add_option("--theta1", sim.theta1, "Unit nonresponse shift of X1")->capture_default_str();
    c_sim->add_option("--replicates", sim.replicates, "Number of samples to write")->capture_default_str();
    c_sim->add_option("--population-size", sim.population_size, "Population size N (E[n] scales with it)");
    c_sim->add_option("--seed", sim.seed, "Master seed")->capture_default_str();
    c_sim->add_option("--out", sim.out, "Output directory")->required();
    c_sim->add_flag("--paper-scale", sim.full_scale, "N = 3,373,378 and E[n] = 6000");

    ImputeArgs imp;
    auto* c_imp = app.add_subcommand("impute", "Write L completed datasets for one survey file");
    c_imp->add_option("--config", imp.config, "Project config (JSON)")->required()->check(CLI::ExistingFile);
    c_imp->add_option("--data", imp.data, "Survey data file")->required()->check(CLI::ExistingFile);
    c_imp->add_option("--out", imp.out, "Output directory")->required();
    c_imp->add_option("--method", imp.method, "mmh, mh or ih")->capture_default_str();
    c_imp->add_option("--engine", imp.engine, "Item engine: mice or gibbs");
    c_imp->add_option("--datasets", imp.datasets, "Number of completed datasets L");
    c_imp->add_option("--cycles", imp.cycles, "Chained-equations cycles");
    c_imp->add_option("--seed", imp.seed, "Seed")->capture_default_str();
    c_imp->add_option("--iterations", imp.iterations, "Gibbs iterations");
    c_imp->add_option("--burn-in", imp.burn_in, "Gibbs burn-in");
    c_imp->add_option("--thin", imp.thin, "Gibbs thinning interval");
    c_imp->add_option("--threads", imp.threads, "Worker threads")->capture_default_str();

    std::string cfg, out, set;
    std::vector<std::string> data;
    auto* c_est = app.add_subcommand("estimate", "Design-based estimates per completed dataset");
    c_est->add_option("--config", cfg, "Project config")->required()->check(CLI::ExistingFile);
    c_est->add_option("--data", data, "Completed data files")->required()->check(CLI::ExistingFile);
    c_est->add_option("--out", out, "Output file (default stdout)");

    auto* c_pool = app.add_subcommand("pool", "Pool estimands across completed datasets");
    c_pool->add_option("--config", cfg, "Project config")->required()->check(CLI::ExistingFile);
    c_pool->add_option("--set", set, "Imputation set directory")->check(CLI::ExistingDirectory);
    c_pool->add_option("--data", data, "Completed data files")->check(CLI::ExistingFile);
    c_pool->add_option("--out", out, "Output file (default stdout)");

    auto* c_rep = app.add_subcommand("report", "Pooled estimands and subgroup proportions for an imputation set");
    c_rep->add_option("--config", cfg, "Project config")->required()->check(CLI::ExistingFile);
    c_rep->add_option("--set", set, "Imputation set directory")->required()->check(CLI::ExistingDirectory);
    c_rep->add_option("--out", out, "Output file (default stdout)");

    StudyArgs st;
    auto* c_st = app.add_subcommand("simulate-study", "Repeated-sampling study with pooled bias and coverage tables");
    c_st->add_option("--preset", st.preset, "Simulation preset")->capture_default_str();
    c_st->add_option("--theta1", st.theta1, "Unit nonresponse shift of X1")->capture_default_str();
    c_st->add_option("--replicates", st.replicates, "Replicates R")->capture_default_str();
    c_st->add_option("--datasets", st.datasets, "Completed datasets per arm L")->capture_default_str();
    c_st->add_option("--seed", st.seed, "Master seed")->capture_default_str();
    c_st->add_option("--out", st.out, "Output directory")->required();
    c_st->add_option("--population-size", st.population_size, "Population size N (E[n] scales with it)");
    c_st->add_option("--threads", st.threads, "Parallel replicates")->capture_default_str();
    c_st->add_option("--arms", st.arms, "Method arms")->capture_default_str();
    c_st->add_option("--cycles", st.cycles, "Chained-equations cycles")->capture_default_str();
    c_st->add_option("--burn-in", st.burn_in, "Gibbs burn-in (MH arm)")->capture_default_str();
    c_st->add_option("--thin", st.thin, "Gibbs thinning (MH arm)")->capture_default_str();
    c_st->add_flag("--paper-scale", st.full_scale, "N = 3,373,378 and E[n] = 6000");
    c_st->add_flag("--quiet", st.quiet, "No progress output");

    std::size_t v_rows = 2926, v_nr = 913;
    std::uint64_t v_seed = 1;
    auto* c_voter = app.add_subcommand("synth-voter", "Synthetic voter-supplement-like file for configs/cps_template.json");
    c_voter->add_option("--rows", v_rows, "Rows")->capture_default_str();
    c_voter->add_option("--unit-nonrespondents", v_nr, "Expected unit nonrespondent rows")->capture_default_str();
    c_voter->add_option("--seed", v_seed, "Seed")->capture_default_str();
    c_voter->add_option("--out", out, "Output file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*c_sim) run_simulate(sim);
        else if (*c_imp) run_impute(imp);
        else if (*c_est) run_estimate(cfg, data, out);
        else if (*c_pool) run_pool(cfg, set, data, out);
        else if (*c_rep) run_report(cfg, set, out);
        else if (*c_st) run_simulate_study(st);
        else if (*c_voter) run_synth_voter(v_rows, v_nr, v_seed, out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
