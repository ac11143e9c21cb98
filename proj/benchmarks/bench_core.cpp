#include <benchmark/benchmark.h>

#include "mdam/estimation.hpp"
#include "mdam/gibbs_item.hpp"
#include "mdam/glm.hpp"
#include "mdam/hotdeck.hpp"
#include "mdam/mice.hpp"
#include "mdam/pipeline.hpp"
#include "mdam/simgen.hpp"

using namespace mdam;

namespace {

// One desk-scale sample with nonresponse, shared by the benchmarks.
struct Desk {
    Population pop;
    SurveyTable table;
    ImputationProblem problem;

    static const Desk& get() {
        static const Desk d = [] {
            auto cfg = SimulationConfig::appendix_b();
            Rng rng = make_stream(1, 0);
            auto pop = generate_population(cfg, rng);
            const auto cells = unit_nr_cell_probabilities(pop);
            auto s = sample_table(pop, draw_poisson_sample(pop, rng));
            auto t = inject_item_nonresponse(inject_unit_nonresponse(s, cells, rng), cfg.item_nonresponse, rng);
            ImputationProblem p;
            p.margins = simulation_margins(pop);
            p.chain = simulation_chain(t.schema());
            p.factorization = simulation_factorization(t.schema());
            p.population_size = double(pop.size());
            return Desk{std::move(pop), std::move(t), std::move(p)};
        }();
        return d;
    }
};

}  // namespace

static void BM_LogisticFit(benchmark::State& state) {
    const auto n = state.range(0);
    Rng rng = make_stream(2, 0);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd X(n, 6);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        for (int k = 1; k < 6; ++k) X(i, k) = nd(rng);
        y[i] = bernoulli(rng, inv_logit(0.3 * X(i, 1) - 0.4 * X(i, 2))) ? 1 : 0;
    }
    for (auto _ : state) benchmark::DoNotOptimize(fit_glm(X, y, Family::logistic));
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_LogisticFit)->Arg(500)->Arg(2000)->Arg(8000);

static void BM_MultinomialFit(benchmark::State& state) {
    const int n = 2000;
    Rng rng = make_stream(3, 0);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd X(n, 4);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        for (int k = 1; k < 4; ++k) X(i, k) = nd(rng);
        y[i] = double(uniform_index(rng, 4));
    }
    for (auto _ : state) benchmark::DoNotOptimize(fit_glm(X, y, Family::multinomial, 4));
}
BENCHMARK(BM_MultinomialFit);

static void BM_MiceCycle(benchmark::State& state) {
    const auto& d = Desk::get();
    MiceConfig cfg;
    const auto plan = plan_mice(d.table, cfg);
    Rng rng = make_stream(4, 0);
    for (auto _ : state) benchmark::DoNotOptimize(run_mice_chain(d.table, plan, cfg, 1, rng));
}
BENCHMARK(BM_MiceCycle)->Unit(benchmark::kMillisecond);

static void BM_GibbsIteration(benchmark::State& state) {
    const auto& d = Desk::get();
    const auto iters = static_cast<int>(state.range(0));
    Rng rng = make_stream(5, 0);
    MiceConfig cfg;
    const auto start = run_mice_chain(d.table, plan_mice(d.table, cfg), cfg, 1, rng);
    for (auto _ : state)
        benchmark::DoNotOptimize(
            run_gibbs_item(d.table, d.problem.factorization, {iters, iters - 1, 1, AcceptanceRule::metropolis}, rng, &start));
    state.SetItemsProcessed(state.iterations() * iters);
}
BENCHMARK(BM_GibbsIteration)->Arg(10)->Unit(benchmark::kMillisecond);

static void BM_ArmMMH(benchmark::State& state) {
    const auto& d = Desk::get();
    Rng rng = make_stream(6, 0);
    const auto arm = ArmConfig::make(ArmKind::mmh, static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(run_arm(d.table, d.problem, arm, rng));
}
BENCHMARK(BM_ArmMMH)->Arg(5)->Arg(20)->Unit(benchmark::kMillisecond);

static void BM_HotDeck(benchmark::State& state) {
    const auto& d = Desk::get();
    Rng rng = make_stream(7, 0);
    MiceConfig cfg;
    const auto filled = preliminary_fill(d.table, d.problem, cfg, rng);
    const auto pools = build_pools(filled, {"X1", "X2"});
    for (auto _ : state) {
        std::size_t sum = 0;
        for (std::size_t i = 0; i < filled.rows(); ++i) sum += donate(pools, pools.cell_of_row(filled, i), rng);
        benchmark::DoNotOptimize(sum);
    }
    state.SetItemsProcessed(state.iterations() * filled.rows());
}
BENCHMARK(BM_HotDeck);

static void BM_HtEstimands(benchmark::State& state) {
    const auto& d = Desk::get();
    Rng rng = make_stream(8, 0);
    MiceConfig cfg;
    const auto filled = preliminary_fill(d.table, d.problem, cfg, rng);
    auto specs = simulation_total_estimands();
    const auto probs = simulation_probability_estimands();
    specs.insert(specs.end(), probs.begin(), probs.end());
    for (auto _ : state)
        for (const auto& e : specs) benchmark::DoNotOptimize(estimate(filled, e, SamplingDesign::poisson));
    state.SetItemsProcessed(state.iterations() * specs.size());
}
BENCHMARK(BM_HtEstimands);

BENCHMARK_MAIN();
