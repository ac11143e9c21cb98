#include "mdam/study.hpp"

#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>

#include <Eigen/Core>
#include <boost/version.hpp>
#include "json.hpp"

#include "mdam/parallel.hpp"
#include "mdam/version.hpp"

namespace mdam {

namespace {

// Stream salts keep population, replicate and arm streams apart.
constexpr std::uint64_t kPopulationSalt = 0x706f70;
constexpr std::uint64_t kReplicateSalt = 0x726570;
constexpr std::uint64_t kArmSalt = 0x61726d;

constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return nan_value;
    double s = 0.0;
    for (double x : v) s += x;
    return s / double(v.size());
}

double variance_of(const std::vector<double>& v) {
    if (v.size() < 2) return nan_value;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / double(v.size() - 1);
}

ImputationProblem simulation_problem(const Schema& schema, const AuxiliaryMargins& margins, double N) {
    ImputationProblem p;
    p.margins = margins;
    p.chain = simulation_chain(schema);
    p.factorization = simulation_factorization(schema);
    p.hotdeck_keys = {"X1", "X2"};
    p.weight_mode = WeightMode::design_known;
    p.design = SamplingDesign::poisson;
    p.population_size = N;
    return p;
}

std::string cell(double x) { return std::isnan(x) ? "NA" : format_number(x); }

}  // namespace

ReplicateResult run_replicate(const StudyConfig& config, const Population& pop,
                              const std::array<double, 4>& cell_probs, const AuxiliaryMargins& margins,
                              const std::vector<EstimandSpec>& estimands, int replicate) {
    ReplicateResult res;
    const auto id = static_cast<std::uint64_t>(replicate) + 1;
    try {
        Rng rng = make_stream(config.seed, id, kReplicateSalt);
        const auto units = draw_poisson_sample(pop, rng);
        const SurveyTable complete = sample_table(pop, units);
        res.sample_size = complete.rows();

        const CompletedDataset before = CompletedDataset::from_table(complete);
        for (const auto& e : estimands) res.pre.push_back(estimate(before, e, SamplingDesign::poisson));

        const SurveyTable table = inject_item_nonresponse(
            inject_unit_nonresponse(complete, cell_probs, rng), config.simulation.item_nonresponse, rng);
        res.unit_nonrespondents = table.unit_nonrespondent_count();
        const double n_resp = double(table.rows() - res.unit_nonrespondents);
        for (std::size_t j = 0; j < table.cols(); ++j)
            res.item_missing_rate.push_back(n_resp > 0 ? double(table.item_missing_count(j)) / n_resp : nan_value);

        ImputationProblem problem = simulation_problem(table.schema(), margins, double(pop.size()));
        MiceConfig mice = config.mice;
        mice.datasets = config.datasets;
        problem.margins = prepare_margins(table, problem, mice, rng);

        for (std::size_t a = 0; a < config.arms.size(); ++a) {
            Rng arm_rng = make_stream(config.seed, id, kArmSalt + a);
            ArmConfig arm = ArmConfig::make(config.arms[a], config.datasets);
            arm.mice = mice;
            arm.gibbs = config.gibbs;
            arm.gibbs.iterations = arm.gibbs.burn_in + config.datasets * arm.gibbs.thin;
            const ImputationSet set = run_arm(table, problem, arm, arm_rng);

            std::vector<PooledEstimate> pooled;
            for (const auto& e : estimands) {
                std::vector<double> q, u;
                for (const auto& d : set.datasets) {
                    const auto h = estimate(d, e, SamplingDesign::poisson);
                    q.push_back(h.estimate);
                    u.push_back(h.variance);
                }
                pooled.push_back(pool(q, u));
            }
            res.arms.push_back(std::move(pooled));

            std::size_t inside = 0;
            for (const auto& d : set.datasets) {
                bool all = true;
                for (const auto& m : set.margins.entries) {
                    const auto h = estimate(d, parse_estimand("T(" + m.variable + "=" + std::to_string(m.level) + ")"),
                                            SamplingDesign::poisson);
                    all = all && std::abs(h.estimate - m.total) <= config.plausibility_band * std::sqrt(m.variance);
                }
                inside += all ? 1 : 0;
            }
            res.plausible.push_back(inside);
            res.datasets.push_back(set.datasets.size());
        }
        res.ok = true;
    } catch (const std::exception& e) {
        res.ok = false;
        res.error = e.what();
        res.arms.clear();
        res.plausible.clear();
        res.datasets.clear();
    }
    return res;
}

StudyReport run_study(const StudyConfig& config, const std::function<void(int)>& progress) {
    if (config.replicates < 2) throw Error("study: at least 2 replicates are required");
    if (config.datasets < 2) throw Error("study: at least 2 completed datasets are required");
    if (config.arms.empty()) throw Error("study: no method arms");

    StudyReport report;
    report.config = config;
    for (ArmKind a : config.arms) report.arm_names.emplace_back(to_string(a));

    Rng pop_rng = make_stream(config.seed, 0, kPopulationSalt);
    const Population pop = generate_population(config.simulation, pop_rng);
    const auto cell_probs = unit_nr_cell_probabilities(pop);
    const auto margins = simulation_margins(pop);

    const auto total_specs = simulation_total_estimands();
    const auto prob_specs = simulation_probability_estimands();
    std::vector<EstimandSpec> estimands = total_specs;
    estimands.insert(estimands.end(), prob_specs.begin(), prob_specs.end());

    std::vector<double> truth;
    {
        const CompletedDataset everyone = population_dataset(pop);
        for (const auto& e : estimands) truth.push_back(estimate(everyone, e, SamplingDesign::poisson).estimate);
    }

    const auto R = static_cast<std::size_t>(config.replicates);
    report.replicates.resize(R);
    std::mutex progress_mutex;
    int finished = 0;
    StudyConfig inner = config;
    inner.mice.threads = 1;
    parallel_for(R, config.threads, [&](std::size_t r) {
        report.replicates[r] = run_replicate(inner, pop, cell_probs, margins, estimands, static_cast<int>(r));
        if (progress) {
            std::lock_guard lock(progress_mutex);
            progress(++finished);
        }
    });

    const std::size_t A = config.arms.size();
    const std::size_t K = simulation_schema()->size();
    std::vector<const ReplicateResult*> good;
    for (const auto& r : report.replicates) {
        if (r.ok)
            good.push_back(&r);
        else
            ++report.failures;
    }
    if (good.empty()) throw Error("study: every replicate failed; first error: " + report.replicates[0].error);

    std::vector<double> unit_rates;
    report.mean_item_nr_rate.assign(K, 0.0);
    for (const auto* r : good) {
        unit_rates.push_back(double(r->unit_nonrespondents) / double(r->sample_size));
        for (std::size_t j = 0; j < K; ++j) report.mean_item_nr_rate[j] += r->item_missing_rate[j] / double(good.size());
    }
    report.mean_unit_nr_rate = mean_of(unit_rates);
    for (std::size_t a = 0; a < A; ++a) {
        double inside = 0.0, total = 0.0;
        for (const auto* r : good) {
            inside += double(r->plausible[a]);
            total += double(r->datasets[a]);
        }
        report.plausible_fraction.push_back(total > 0 ? inside / total : nan_value);
    }

    for (std::size_t e = 0; e < estimands.size(); ++e) {
        StudyRow row;
        row.estimand = estimands[e].label;
        row.is_total = !estimands[e].is_ratio();
        row.truth = truth[e];
        std::vector<double> pre;
        for (const auto* r : good) pre.push_back(r->pre[e].estimate);
        row.pre_variance = variance_of(pre);
        for (std::size_t a = 0; a < A; ++a) {
            std::vector<double> q, tv;
            double covered = 0.0;
            for (const auto* r : good) {
                const auto& p = r->arms[a][e];
                q.push_back(p.qbar);
                tv.push_back(p.total_var);
                covered += (p.ci_low <= truth[e] && truth[e] <= p.ci_high) ? 1.0 : 0.0;
            }
            const double m = mean_of(q);
            row.mean_estimate.push_back(m);
            row.percent_bias.push_back(100.0 * std::abs(m - truth[e]) / std::abs(truth[e]));
            row.coverage.push_back(100.0 * covered / double(good.size()));
            row.variance.push_back(variance_of(q));
            row.avg_est_variance.push_back(mean_of(tv));
        }
        (row.is_total ? report.totals : report.probabilities).push_back(std::move(row));
    }
    return report;
}

std::string format_totals_csv(const StudyReport& report) {
    std::ostringstream out;
    out << "estimand";
    for (const auto& a : report.arm_names) out << ",bias_pct_" << a;
    for (const auto& a : report.arm_names) out << ",coverage_pct_" << a;
    out << ",var_Pre";
    for (const auto& a : report.arm_names) out << ",var_" << a;
    for (const auto& a : report.arm_names) out << ",avg_est_var_" << a;
    out << '\n';
    for (const auto& r : report.totals) {
        out << r.estimand;
        for (double v : r.percent_bias) out << ',' << cell(v);
        for (double v : r.coverage) out << ',' << cell(v);
        out << ',' << cell(r.pre_variance);
        for (double v : r.variance) out << ',' << cell(v);
        for (double v : r.avg_est_variance) out << ',' << cell(v);
        out << '\n';
    }
    return out.str();
}

std::string format_probs_csv(const StudyReport& report) {
    std::ostringstream out;
    out << "estimand,truth";
    for (const auto& a : report.arm_names) out << ",estimate_" << a;
    for (const auto& a : report.arm_names) out << ",coverage_pct_" << a;
    out << ",var_Pre";
    for (const auto& a : report.arm_names) out << ",var_" << a;
    for (const auto& a : report.arm_names) out << ",avg_est_var_" << a;
    out << '\n';
    for (const auto& r : report.probabilities) {
        out << '"' << r.estimand << '"' << ',' << cell(r.truth);
        for (double v : r.mean_estimate) out << ',' << cell(v);
        for (double v : r.coverage) out << ',' << cell(v);
        out << ',' << cell(r.pre_variance);
        for (double v : r.variance) out << ',' << cell(v);
        for (double v : r.avg_est_variance) out << ',' << cell(v);
        out << '\n';
    }
    return out.str();
}

std::string format_manifest(const StudyReport& report) {
    const auto& c = report.config;
    const auto& s = c.simulation;
    nlohmann::ordered_json j;
    j["tool"] = "mdam";
    j["version"] = std::string(version());
    j["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                         std::to_string(EIGEN_MINOR_VERSION);
    j["boost_version"] = BOOST_LIB_VERSION;
    j["seed"] = c.seed;
    j["replicates"] = c.replicates;
    j["datasets"] = c.datasets;
    j["threads"] = c.threads;
    j["arms"] = report.arm_names;
    j["plausibility_band_sd"] = c.plausibility_band;
    j["mice"] = {{"cycles", c.mice.cycles},
                 {"pmm_donors", c.mice.pmm_donors},
                 {"include_response_indicators", c.mice.include_response_indicators},
                 {"augment", c.mice.augment}};
    j["gibbs"] = {{"burn_in", c.gibbs.burn_in},
                  {"thin", c.gibbs.thin},
                  {"acceptance", c.gibbs.rule == AcceptanceRule::metropolis ? "metropolis" : "as-printed"}};
    nlohmann::ordered_json sim;
    sim["population_size"] = s.population_size;
    sim["expected_sample_size"] = s.expected_sample_size;
    sim["size_log_sd"] = s.size_log_sd;
    sim["nu0"] = s.nu0;
    sim["omega1"] = s.omega1;
    sim["theta1"] = s.theta1;
    sim["omega2"] = s.omega2;
    sim["theta2"] = s.theta2;
    sim["omega3"] = s.omega3;
    sim["omega4"] = s.omega4;
    sim["omega5"] = s.omega5;
    sim["sigma5"] = s.sigma5;
    sim["omega6"] = s.omega6;
    sim["sigma6"] = s.sigma6;
    auto& items = sim["item_nonresponse"] = nlohmann::ordered_json::array();
    for (const auto& m : s.item_nonresponse) {
        nlohmann::ordered_json phi = nlohmann::ordered_json::array();
        for (double v : m.phi) phi.push_back(std::isinf(v) ? nlohmann::ordered_json("-inf") : nlohmann::ordered_json(v));
        items.push_back({{"variable", "X" + std::to_string(m.var + 1)}, {"phi", phi}});
    }
    j["simulation"] = sim;
    j["failures"] = report.failures;
    return j.dump(2) + "\n";
}

std::string format_diagnostics_csv(const StudyReport& report) {
    std::ostringstream out;
    out << "replicate,ok,sample_size,unit_nonrespondents";
    for (int j = 1; j <= 6; ++j) out << ",item_missing_rate_X" << j;
    for (const auto& a : report.arm_names) out << ",plausible_" << a << ",datasets_" << a;
    out << ",error\n";
    for (std::size_t r = 0; r < report.replicates.size(); ++r) {
        const auto& rep = report.replicates[r];
        out << r + 1 << ',' << (rep.ok ? 1 : 0) << ',' << rep.sample_size << ',' << rep.unit_nonrespondents;
        for (std::size_t j = 0; j < 6; ++j)
            out << ',' << (j < rep.item_missing_rate.size() ? cell(rep.item_missing_rate[j]) : "NA");
        for (std::size_t a = 0; a < report.arm_names.size(); ++a) {
            if (rep.ok)
                out << ',' << rep.plausible[a] << ',' << rep.datasets[a];
            else
                out << ",NA,NA";
        }
        std::string err = rep.error;
        for (char& ch : err)
            if (ch == '"' || ch == '\n') ch = '\'';
        out << ",\"" << err << "\"\n";
    }
    return out.str();
}

void write_study(const StudyReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto put = [&](const char* name, const std::string& text) {
        std::ofstream f(dir / name, std::ios::binary);
        if (!f) throw Error("cannot write " + (dir / name).string());
        f << text;
    };
    put("totals.csv", format_totals_csv(report));
    put("probs.csv", format_probs_csv(report));
    put("run-manifest.json", format_manifest(report));
    put("diagnostics.csv", format_diagnostics_csv(report));
}

std::vector<PooledRow> pool_estimands(const std::vector<CompletedDataset>& datasets,
                                      const std::vector<EstimandSpec>& estimands, SamplingDesign design) {
    std::vector<PooledRow> rows;
    for (const auto& e : estimands) {
        PooledRow row;
        row.label = e.label;
        std::vector<double> q, u;
        for (const auto& d : datasets) {
            const auto h = estimate(d, e, design);
            if (std::isnan(h.estimate)) row.degenerate = true;
            q.push_back(h.estimate);
            u.push_back(h.variance);
        }
        if (row.degenerate) {
            row.pooled.qbar = row.pooled.ubar = row.pooled.b = row.pooled.total_var = nan_value;
            row.pooled.ci_low = row.pooled.ci_high = row.pooled.df = nan_value;
            row.pooled.datasets = datasets.size();
        } else {
            row.pooled = pool(q, u);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<PooledRow> subgroup_report(const std::vector<CompletedDataset>& datasets, const Condition& event,
                                       const std::vector<std::string>& groups, SamplingDesign design) {
    if (datasets.empty()) throw Error("subgroup report: no datasets");
    const Schema& schema = datasets.front().schema();
    std::vector<std::size_t> vars;
    std::size_t cells = 1;
    for (const auto& g : groups) {
        const std::size_t j = schema.index_of(g);
        if (!schema[j].is_categorical()) throw Error("subgroup report: '" + g + "' is continuous");
        vars.push_back(j);
        cells *= static_cast<std::size_t>(schema[j].level_count());
    }
    std::vector<EstimandSpec> specs;
    for (std::size_t c = 0; c < cells; ++c) {
        EstimandSpec s;
        s.kind = EstimandSpec::Kind::probability;
        s.event = {event};
        std::size_t rest = c;
        std::vector<Condition> given(vars.size());
        for (std::size_t k = vars.size(); k-- > 0;) {
            const auto m = static_cast<std::size_t>(schema[vars[k]].level_count());
            given[k] = {schema[vars[k]].name, static_cast<int>(schema[vars[k]].code_of(static_cast<int>(rest % m)))};
            rest /= m;
        }
        s.given = std::move(given);
        s.label = format_estimand(s);
        specs.push_back(std::move(s));
    }
    return pool_estimands(datasets, specs, design);
}

std::string format_pooled_csv(const std::vector<PooledRow>& rows) {
    std::ostringstream out;
    out << "estimand,qbar,se,ci_low,ci_high,df,ubar,b,datasets,flag\n";
    for (const auto& r : rows) {
        const auto& p = r.pooled;
        out << '"' << r.label << '"' << ',' << cell(p.qbar) << ',' << cell(std::sqrt(p.total_var)) << ','
            << cell(p.ci_low) << ',' << cell(p.ci_high) << ',' << (std::isinf(p.df) ? std::string("Inf") : cell(p.df))
            << ',' << cell(p.ubar) << ',' << cell(p.b) << ',' << p.datasets << ','
            << (r.degenerate ? "empty-subgroup" : "") << '\n';
    }
    return out.str();
}

}  // namespace mdam
