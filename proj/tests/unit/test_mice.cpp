#include "doctest.h"
#include "helpers.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "mdam/mice.hpp"

using namespace mdam;

namespace {

// 300 respondents: a binary, c three-level, x continuous depending on both;
// roughly a fifth of each variable missing, plus 20 unit nonrespondents.
SurveyTable mixed_table(std::uint64_t seed) {
    const auto s = test::schema_of({VariableSpec::binary("a"), VariableSpec::categorical("c", {"p", "q", "r"}),
                                    VariableSpec::continuous("x")});
    Rng rng = make_stream(seed, 1);
    std::normal_distribution<double> nd;
    std::ostringstream csv;
    csv << "a,c,x,w\n";
    for (int i = 0; i < 300; ++i) {
        const int a = bernoulli(rng, 0.4);
        const int c = 1 + int(uniform_index(rng, 3));
        const double x = 1.0 + 2.0 * a - 0.5 * c + 0.3 * nd(rng);
        auto cell = [&](const std::string& v) { return bernoulli(rng, 0.2) ? std::string() : v; };
        csv << cell(std::to_string(a)) << ',' << cell(std::to_string(c)) << ',' << cell(format_number(x)) << ",10\n";
    }
    for (int i = 0; i < 20; ++i) csv << ",,,10\n";
    return test::table_of(s, csv.str());
}

}  // namespace

TEST_CASE("imputer names") {
    CHECK(parse_imputer("logreg") == Imputer::logistic);
    CHECK(parse_imputer("polyreg") == Imputer::multinomial);
    CHECK(parse_imputer("norm") == Imputer::linear_normal);
    CHECK(parse_imputer("pmm") == Imputer::pmm);
    CHECK_THROWS(parse_imputer("cart"));
    CHECK(default_imputer(VariableSpec::binary("b")) == Imputer::logistic);
    CHECK(default_imputer(VariableSpec::categorical("c", {"1", "2", "3"})) == Imputer::multinomial);
    CHECK(default_imputer(VariableSpec::continuous("x")) == Imputer::pmm);
}

TEST_CASE("pmm with one donor takes the nearest prediction") {
    Rng rng = make_stream(1, 2);
    const std::vector<double> dp{0.0, 1.0, 2.0, 3.0}, dv{10, 11, 12, 13}, tp{2.2, -5.0, 2.9};
    const auto got = impute_pmm(dp, dv, tp, 1, rng);
    CHECK(got == std::vector<double>{12, 10, 13});
}

TEST_CASE("pmm draws only among the k nearest") {
    Rng rng = make_stream(1, 3);
    const std::vector<double> dp{0.0, 1.0, 2.0, 3.0, 4.0, 5.0}, dv{0, 1, 2, 3, 4, 5};
    const std::vector<double> tp(2000, 2.1);
    std::set<double> seen;
    for (double v : impute_pmm(dp, dv, tp, 3, rng)) seen.insert(v);
    CHECK(seen == std::set<double>{1, 2, 3});
}

TEST_CASE("pmm breaks ties at the boundary uniformly") {
    Rng rng = make_stream(1, 4);
    // donors 1 and 3 tie at distance 1 from the target; k = 2 keeps donor 2
    // plus one of them.
    const std::vector<double> dp{1.0, 2.0, 3.0}, dv{1, 2, 3};
    const std::vector<double> tp(20000, 2.0);
    int c1 = 0, c2 = 0, c3 = 0;
    for (double v : impute_pmm(dp, dv, tp, 2, rng)) (v == 1 ? c1 : v == 2 ? c2 : c3)++;
    CHECK(c2 == doctest::Approx(10000).epsilon(0.03));
    CHECK(c1 == doctest::Approx(5000).epsilon(0.05));
    CHECK(c3 == doctest::Approx(5000).epsilon(0.05));
}

TEST_CASE("visit sequence orders by missingness and skips complete variables") {
    const auto s = test::schema_of({VariableSpec::binary("a"), VariableSpec::binary("b"), VariableSpec::binary("c")});
    const auto t = test::table_of(s, "a,b,c,w\n,,1,1\n1,,0,1\n0,1,1,1\n,,,1\n");
    CHECK(default_visit_sequence(t) == std::vector<std::string>{"a", "b"});
}

TEST_CASE("run_mice completes respondents and keeps observed cells") {
    const auto t = mixed_table(11);
    MiceConfig cfg;
    cfg.datasets = 3;
    Rng rng = make_stream(5, 0);
    const auto sets = run_mice(t, cfg, rng);
    REQUIRE(sets.size() == 3);
    const auto resp = t.respondent_rows();
    for (const auto& d : sets) {
        CHECK(d.rows() == resp.size());
        CHECK(d.respondents_complete());
        for (std::size_t i = 0; i < d.rows(); ++i)
            for (std::size_t j = 0; j < 3; ++j) {
                const std::size_t src = d.source_row(i);
                if (!t.missing(j, src)) CHECK(d.value(j, i) == t.value(j, src));
                if (j < 2) CHECK(t.schema()[j].level_index(d.value(j, i)) >= 0);
            }
    }
}

TEST_CASE("run_mice is deterministic for a seed and thread count independent") {
    const auto t = mixed_table(12);
    MiceConfig cfg;
    cfg.datasets = 4;
    Rng r1 = make_stream(9, 0), r2 = make_stream(9, 0);
    const auto a = run_mice(t, cfg, r1);
    cfg.threads = 3;
    const auto b = run_mice(t, cfg, r2);
    for (std::size_t l = 0; l < a.size(); ++l)
        for (std::size_t j = 0; j < 3; ++j)
            for (std::size_t i = 0; i < a[l].rows(); ++i) CHECK(a[l].value(j, i) == b[l].value(j, i));
}

TEST_CASE("imputations follow the predictor relationship") {
    const auto t = mixed_table(13);
    MiceConfig cfg;
    cfg.datasets = 2;
    cfg.imputers["x"] = Imputer::linear_normal;
    Rng rng = make_stream(3, 0);
    const auto d = run_mice(t, cfg, rng).front();
    // mean imputed x among a=1 exceeds that among a=0 (true gap 2)
    double s1 = 0, s0 = 0;
    int n1 = 0, n0 = 0;
    for (std::size_t i = 0; i < d.rows(); ++i)
        if (d.imputed(2, i)) (d.value(0, i) == 1 ? (s1 += d.value(2, i), ++n1) : (s0 += d.value(2, i), ++n0));
    REQUIRE(n1 > 5);
    REQUIRE(n0 > 5);
    CHECK(s1 / n1 - s0 / n0 > 1.0);
}

TEST_CASE("plan_mice rejects incompatible settings") {
    const auto t = mixed_table(14);
    MiceConfig cfg;
    cfg.imputers["a"] = Imputer::linear_normal;
    CHECK_THROWS(plan_mice(t, cfg));
    MiceConfig partial;
    partial.visit_sequence = {"a"};
    CHECK_THROWS(plan_mice(t, partial));
    MiceConfig zero;
    zero.datasets = 0;
    CHECK_THROWS(plan_mice(t, zero));
}
