#include "mdam/pipeline.hpp"

#include "mdam/hotdeck.hpp"
#include "mdam/parallel.hpp"

namespace mdam {

std::string_view to_string(ArmKind kind) {
    switch (kind) {
        case ArmKind::mmh: return "MMH";
        case ArmKind::mh: return "MH";
        case ArmKind::ih: return "IH";
    }
    return "unknown";
}

ArmKind parse_arm(std::string_view text) {
    if (text == "mmh" || text == "MMH") return ArmKind::mmh;
    if (text == "mh" || text == "MH") return ArmKind::mh;
    if (text == "ih" || text == "IH") return ArmKind::ih;
    throw ParseError("unknown method '" + std::string(text) + "' (expected mmh, mh or ih)");
}

std::string_view to_string(ItemEngine engine) {
    return engine == ItemEngine::mice ? "mice" : "gibbs";
}

ItemEngine parse_item_engine(std::string_view text) {
    if (text == "mice") return ItemEngine::mice;
    if (text == "gibbs") return ItemEngine::gibbs;
    throw ParseError("unknown item engine '" + std::string(text) + "'");
}

ArmConfig ArmConfig::make(ArmKind kind, int datasets) {
    ArmConfig a;
    a.kind = kind;
    a.engine = kind == ArmKind::mh ? ItemEngine::gibbs : ItemEngine::mice;
    a.datasets = datasets;
    a.mice.datasets = datasets;
    return a;
}

double resolve_population_size(const SurveyTable& table, const ImputationProblem& problem) {
    if (problem.population_size) return *problem.population_size;
    if (table.population_size()) return *table.population_size();
    if (problem.weight_mode == WeightMode::adjusted) {
        double total = 0.0;
        for (std::size_t i : table.respondent_rows()) total += table.weight(i);
        return total;
    }
    throw Error("population size is required with design-known weights");
}

namespace {

std::vector<std::string> hotdeck_keys(const SurveyTable& table, const ImputationProblem& problem) {
    return problem.hotdeck_keys.empty() ? problem.chain.variables(table.schema()) : problem.hotdeck_keys;
}

CompletedDataset complete_one(const SurveyTable& table, const ImputationProblem& problem,
                              const AuxiliaryMargins& margins, const std::vector<double>& weights,
                              double population_size, const CompletedDataset& respondents,
                              UnitStrategy strategy, Rng& rng, std::vector<MarginStepTrace>* trace) {
    CompletedDataset full = CompletedDataset::from_table(table);
    full.assign_from(respondents);
    full.set_weights(weights);
    auto steps = impute_margin_vars(full, problem.chain, margins, population_size, strategy, rng);
    if (trace) *trace = std::move(steps);
    if (!full.nonrespondent_rows().empty()) {
        const auto pools = build_pools(full, hotdeck_keys(table, problem));
        hot_deck_fill(full, pools, rng);
    }
    if (!full.complete()) throw Error("completion left unfilled cells");
    return full;
}

}  // namespace

CompletedDataset preliminary_fill(const SurveyTable& table, const ImputationProblem& problem,
                                  const MiceConfig& mice, Rng& rng) {
    const double N = resolve_population_size(table, problem);
    const auto weights = build_weights(table, problem.weight_mode, N);
    const auto plan = plan_mice(table, mice);
    const CompletedDataset resp = run_mice_chain(table, plan, mice, 1, rng);
    return complete_one(table, problem, problem.margins, weights, N, resp, UnitStrategy::ignorable, rng,
                        nullptr);
}

AuxiliaryMargins prepare_margins(const SurveyTable& table, const ImputationProblem& problem,
                                 const MiceConfig& mice, Rng& rng) {
    bool needed = false;
    for (const auto& e : problem.margins.entries) needed = needed || e.calibrate;
    if (!needed) return problem.margins;
    const CompletedDataset filled = preliminary_fill(table, problem, mice, rng);
    return calibrate_v(filled, problem.margins, problem.design);
}

ImputationSet complete_unit_nonresponse(const SurveyTable& table, const ImputationProblem& problem,
                                        const AuxiliaryMargins& margins,
                                        const std::vector<CompletedDataset>& respondents,
                                        UnitStrategy strategy, unsigned threads, Rng& rng) {
    const double N = resolve_population_size(table, problem);
    ImputationSet set;
    set.weights = build_weights(table, problem.weight_mode, N);
    set.margins = margins;
    const std::size_t L = respondents.size();
    std::vector<Rng> streams;
    for (std::size_t l = 0; l < L; ++l) streams.push_back(split(rng));
    set.datasets.resize(L);
    set.traces.resize(L);
    parallel_for(L, threads, [&](std::size_t l) {
        set.datasets[l] = complete_one(table, problem, margins, set.weights, N, respondents[l], strategy,
                                       streams[l], &set.traces[l]);
    });
    return set;
}

ImputationSet run_arm(const SurveyTable& table, const ImputationProblem& problem, const ArmConfig& arm,
                      Rng& rng) {
    ItemEngine engine = arm.engine;
    if (arm.kind == ArmKind::mmh) engine = ItemEngine::mice;
    if (arm.kind == ArmKind::mh) engine = ItemEngine::gibbs;

    MiceConfig mice = arm.mice;
    mice.datasets = arm.datasets;
    mice.threads = arm.threads;
    const AuxiliaryMargins margins = prepare_margins(table, problem, mice, rng);

    std::vector<CompletedDataset> respondents;
    if (engine == ItemEngine::mice) {
        respondents = run_mice(table, mice, rng);
    } else {
        const auto plan = plan_mice(table, mice);
        const CompletedDataset start = run_mice_chain(table, plan, mice, 1, rng);
        respondents = run_gibbs_item(table, problem.factorization, arm.gibbs, rng, &start);
    }
    if (respondents.empty()) throw Error("item stage produced no completed datasets");
    const UnitStrategy strategy =
        arm.kind == ArmKind::ih ? UnitStrategy::ignorable : UnitStrategy::intercept_matching;
    return complete_unit_nonresponse(table, problem, margins, respondents, strategy, arm.threads, rng);
}

}  // namespace mdam
