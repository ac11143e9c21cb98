#include "doctest.h"

#include <cmath>

#include "mdam/pipeline.hpp"
#include "mdam/simgen.hpp"
#include "mdam/study.hpp"

using namespace mdam;

namespace {

struct Fixture {
    SimulationConfig cfg;
    Population pop;
    SurveyTable table;
    ImputationProblem problem;
};

Fixture fixture() {
    auto cfg = SimulationConfig::appendix_b();
    cfg.population_size = 30000;
    cfg.expected_sample_size = 600;
    Rng rng = make_stream(21, 0);
    auto pop = generate_population(cfg, rng);
    const auto cells = unit_nr_cell_probabilities(pop);
    auto s = sample_table(pop, draw_poisson_sample(pop, rng));
    auto t = inject_item_nonresponse(inject_unit_nonresponse(s, cells, rng), cfg.item_nonresponse, rng);
    ImputationProblem p;
    p.margins = simulation_margins(pop);
    p.chain = simulation_chain(t.schema());
    p.factorization = simulation_factorization(t.schema());
    p.population_size = double(pop.size());
    return {cfg, std::move(pop), std::move(t), std::move(p)};
}

}  // namespace

TEST_CASE("arm names") {
    CHECK(parse_arm("MMH") == ArmKind::mmh);
    CHECK(parse_arm("ih") == ArmKind::ih);
    CHECK_THROWS(parse_arm("mb"));
    CHECK(ArmConfig::make(ArmKind::mh, 4).engine == ItemEngine::gibbs);
    CHECK(ArmConfig::make(ArmKind::ih, 4).engine == ItemEngine::mice);
}

TEST_CASE("MMH completes every row and preserves observed data") {
    const auto f = fixture();
    Rng rng = make_stream(22, 0);
    const auto set = run_arm(f.table, f.problem, ArmConfig::make(ArmKind::mmh, 3), rng);
    REQUIRE(set.datasets.size() == 3);
    double wsum = 0;
    for (double w : set.weights) wsum += w;
    CHECK(wsum == doctest::Approx(30000.0));
    for (const auto& e : set.margins.entries) {
        CHECK_FALSE(e.calibrate);
        CHECK(e.variance > 0.0);
    }
    for (const auto& d : set.datasets) {
        CHECK(d.complete());
        CHECK(d.rows() == f.table.rows());
        for (std::size_t j = 0; j < 6; ++j)
            for (std::size_t i = 0; i < d.rows(); ++i)
                if (!f.table.missing(j, i)) CHECK(d.value(j, i) == f.table.value(j, i));
    }
    for (const auto& tr : set.traces) {
        REQUIRE(tr.size() == 2);
        CHECK(tr[0].targets.levels.size() == 2);
    }
}

TEST_CASE("IH leaves offsets at zero") {
    const auto f = fixture();
    Rng rng = make_stream(23, 0);
    const auto set = run_arm(f.table, f.problem, ArmConfig::make(ArmKind::ih, 2), rng);
    for (const auto& tr : set.traces)
        for (const auto& s : tr) {
            CHECK(s.targets.levels.empty());
            for (double th : s.theta) CHECK(th == 0.0);
        }
}

TEST_CASE("MH runs from the gibbs schedule") {
    const auto f = fixture();
    ArmConfig arm = ArmConfig::make(ArmKind::mh, 2);
    arm.gibbs = {30, 10, 10, AcceptanceRule::metropolis};
    Rng rng = make_stream(24, 0);
    const auto set = run_arm(f.table, f.problem, arm, rng);
    CHECK(set.datasets.size() == 2);
    for (const auto& d : set.datasets) CHECK(d.complete());
}

TEST_CASE("run_arm is reproducible for a seed") {
    const auto f = fixture();
    Rng a = make_stream(25, 0), b = make_stream(25, 0);
    const auto x = run_arm(f.table, f.problem, ArmConfig::make(ArmKind::mmh, 2), a);
    const auto y = run_arm(f.table, f.problem, ArmConfig::make(ArmKind::mmh, 2), b);
    for (std::size_t l = 0; l < 2; ++l)
        CHECK(format_table(x.datasets[l].to_table()) == format_table(y.datasets[l].to_table()));
}

TEST_CASE("a study without missingness reproduces the complete-data estimates") {
    StudyConfig c;
    c.simulation.population_size = 20000;
    c.simulation.expected_sample_size = 500;
    c.simulation.nu0 = -1e9;  // nobody is a unit nonrespondent
    for (auto& m : c.simulation.item_nonresponse) m.phi[0] = -std::numeric_limits<double>::infinity();
    c.replicates = 2;
    c.datasets = 2;
    const auto rep = run_study(c);
    CHECK(rep.failures == 0);
    CHECK(rep.mean_unit_nr_rate == 0.0);
    for (const auto& r : rep.replicates) {
        REQUIRE(r.ok);
        for (std::size_t a = 0; a < r.arms.size(); ++a)
            for (std::size_t e = 0; e < r.pre.size(); ++e) {
                CHECK(r.arms[a][e].qbar == doctest::Approx(r.pre[e].estimate).epsilon(1e-12));
                CHECK(r.arms[a][e].b == doctest::Approx(0.0));
            }
    }
    for (const auto& row : rep.totals)
        for (double v : row.coverage) CHECK((v >= 0.0 && v <= 100.0));
}

TEST_CASE("study report tables have the documented columns") {
    StudyConfig c;
    c.simulation.population_size = 20000;
    c.simulation.expected_sample_size = 400;
    c.replicates = 2;
    c.datasets = 2;
    const auto rep = run_study(c);
    const auto totals = format_totals_csv(rep);
    CHECK(totals.rfind("estimand,bias_pct_MMH,bias_pct_IH,coverage_pct_MMH,coverage_pct_IH,var_Pre,var_MMH,var_IH,"
                       "avg_est_var_MMH,avg_est_var_IH\n",
                       0) == 0);
    CHECK(rep.totals.size() == 6);
    CHECK(rep.probabilities.size() == 20);
    CHECK(format_totals_csv(rep) == format_totals_csv(run_study(c)));
}
