#include "doctest.h"

#include <cmath>

#include "mdam/simgen.hpp"

using namespace mdam;

namespace {

SimulationConfig small() {
    auto c = SimulationConfig::appendix_b();
    c.population_size = 20000;
    c.expected_sample_size = 1000;
    return c;
}

}  // namespace

TEST_CASE("population is reproducible and inclusion probabilities are calibrated") {
    const auto cfg = small();
    Rng r1 = make_stream(1, 0), r2 = make_stream(1, 0);
    const auto a = generate_population(cfg, r1);
    const auto b = generate_population(cfg, r2);
    REQUIRE(a.size() == 20000);
    CHECK(a.x[5] == b.x[5]);
    CHECK(a.u == b.u);
    double sum = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.pi[i] > 0.0);
        CHECK(a.pi[i] <= 1.0);
        CHECK(a.w[i] * a.pi[i] == doctest::Approx(1.0));
        sum += a.pi[i];
    }
    CHECK(sum == doctest::Approx(1000.0).epsilon(1e-6));
}

TEST_CASE("unit nonresponse rows are all-missing and item masks hit only modelled variables") {
    auto cfg = small();
    Rng rng = make_stream(2, 0);
    const auto pop = generate_population(cfg, rng);
    const auto cells = unit_nr_cell_probabilities(pop);
    for (double p : cells) {
        CHECK(p > 0.0);
        CHECK(p < 1.0);
    }
    const auto sample = sample_table(pop, draw_poisson_sample(pop, rng));
    const auto t = inject_item_nonresponse(inject_unit_nonresponse(sample, cells, rng), cfg.item_nonresponse, rng);
    CHECK(t.rows() == sample.rows());
    CHECK(t.population_size() == doctest::Approx(20000.0));
    for (std::size_t i = 0; i < t.rows(); ++i)
        if (t.unit_nonrespondent(i))
            for (std::size_t j = 0; j < 6; ++j) CHECK(t.missing(j, i));
    CHECK(t.item_missing_count(0) == 0);  // X1
    CHECK(t.item_missing_count(4) == 0);  // X5
    CHECK(t.item_missing_count(1) > 0);
    CHECK(t.item_missing_count(5) > 0);
}

TEST_CASE("sample injection is seeded") {
    const auto cfg = small();
    Rng p = make_stream(3, 0);
    const auto pop = generate_population(cfg, p);
    const auto cells = unit_nr_cell_probabilities(pop);
    auto draw = [&] {
        Rng rng = make_stream(3, 1);
        const auto s = sample_table(pop, draw_poisson_sample(pop, rng));
        return format_table(inject_item_nonresponse(inject_unit_nonresponse(s, cells, rng), cfg.item_nonresponse, rng));
    };
    CHECK(draw() == draw());
}

TEST_CASE("theta1 shifts X1 among unit nonrespondents") {
    auto cfg = small();
    Rng rng = make_stream(4, 0);
    const auto pop = generate_population(cfg, rng);
    double x1u = 0, nu = 0, x1r = 0, nr = 0;
    for (std::size_t i = 0; i < pop.size(); ++i) {
        if (pop.u[i]) x1u += pop.x[0][i], ++nu;
        else x1r += pop.x[0][i], ++nr;
    }
    CHECK(x1u / nu < x1r / nr);
}

TEST_CASE("estimand lists") {
    CHECK(simulation_total_estimands().size() == 6);
    CHECK(simulation_probability_estimands().size() == 20);
    const auto margins = simulation_margins([] {
        Rng r = make_stream(5, 0);
        return generate_population(small(), r);
    }());
    CHECK(margins.entries.size() == 2);
    CHECK(margins.entries[0].calibrate);
}

TEST_CASE("voter-like data has unknown weights only on nonrespondents") {
    VoterSynthConfig c;
    c.rows = 600;
    c.unit_nonrespondents = 150;
    Rng rng = make_stream(6, 0);
    const auto t = generate_voter_like(c, rng);
    CHECK(t.rows() == 600);
    CHECK(double(t.unit_nonrespondent_count()) == doctest::Approx(150.0).epsilon(0.25));
    double w = 0;
    for (std::size_t i = 0; i < t.rows(); ++i) {
        CHECK(t.weight_known(i) != t.unit_nonrespondent(i));
        if (!t.unit_nonrespondent(i)) w += t.weight(i);
    }
    CHECK(w == doctest::Approx(c.population_size));
}
