#include "doctest.h"
#include "helpers.hpp"

#include <cmath>
#include <limits>

#include "mdam/estimation.hpp"

using namespace mdam;

TEST_CASE("HT total and Poisson variance by hand") {
    const std::vector<double> z{1, 2, 3}, w{2, 4, 1};
    const auto h = ht_total(z, w, SamplingDesign::poisson);
    CHECK(h.estimate == 2 + 8 + 3);
    CHECK(h.variance == doctest::Approx(2 * 1 * 1 + 4 * 3 * 4 + 0));
}

TEST_CASE("pps-with-replacement variance by hand") {
    const std::vector<double> z{1, 2, 3}, w{2, 4, 1};
    const auto h = ht_total(z, w, SamplingDesign::pps_with_replacement);
    const double T = 13, n = 3;
    double v = 0;
    for (int i = 0; i < 3; ++i) v += std::pow(w[i] * z[i] - T / n, 2);
    CHECK(h.variance == doctest::Approx(n / (n - 1) * v));
}

TEST_CASE("census weights give exact totals with no variance") {
    const std::vector<double> z{3.5, -1, 7}, w{1, 1, 1};
    const auto h = ht_total(z, w, SamplingDesign::poisson);
    CHECK(h.estimate == 9.5);
    CHECK(h.variance == 0.0);
}

TEST_CASE("ratio estimate and linearised variance") {
    const std::vector<double> z{1, 0, 1, 0}, d{1, 1, 1, 0}, w{2, 2, 3, 5};
    const auto r = ht_ratio(z, d, w, SamplingDesign::poisson);
    CHECK(r.estimate == doctest::Approx(5.0 / 7.0));
    const double R = 5.0 / 7.0, D = 7.0;
    double v = 0;
    for (int i = 0; i < 4; ++i) v += w[i] * (w[i] - 1) * std::pow((z[i] - R * d[i]) / D, 2);
    CHECK(r.variance == doctest::Approx(v));
    const std::vector<double> none{0, 0, 0, 0};
    CHECK(std::isnan(ht_ratio(z, none, w, SamplingDesign::poisson).estimate));
}

TEST_CASE("equal weights give unweighted cell means") {
    const std::vector<double> z{1, 0, 1, 0, 0}, d{1, 1, 1, 0, 0}, w(5, 3.0);
    CHECK(ht_ratio(z, d, w, SamplingDesign::poisson).estimate == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("estimand text forms round-trip") {
    for (const char* t : {"T(X1=1)", "T(X5)", "P(X4=0|X1=1,X2=0)", "P(A=1,B=2)", "E(X5|X1=1)", "P(V=1)"})
        CHECK(format_estimand(parse_estimand(t)) == t);
    const auto p = parse_estimand("P(A=1,B=2|C=3)");
    CHECK(p.kind == EstimandSpec::Kind::probability);
    CHECK(p.event.size() == 2);
    CHECK(p.given.size() == 1);
    CHECK(p.given[0].level == 3);
    CHECK_THROWS_AS(parse_estimand("Q(X)"), ParseError);
    CHECK_THROWS_AS(parse_estimand("T(X=1"), ParseError);
}

TEST_CASE("estimands are checked against the schema") {
    const auto s = test::schema_of({VariableSpec::binary("a"), VariableSpec::continuous("x")});
    CHECK_NOTHROW(check_estimand(*s, parse_estimand("T(a=1)")));
    CHECK_NOTHROW(check_estimand(*s, parse_estimand("E(x|a=0)")));
    CHECK_THROWS(check_estimand(*s, parse_estimand("T(a=2)")));
    CHECK_THROWS(check_estimand(*s, parse_estimand("T(b=1)")));
    CHECK_THROWS(check_estimand(*s, parse_estimand("T(a)")));
    CHECK_THROWS(check_estimand(*s, parse_estimand("T(x=1)")));
}

TEST_CASE("estimate on a completed dataset") {
    const auto s = test::schema_of({VariableSpec::binary("a"), VariableSpec::continuous("x")});
    const auto t = test::table_of(s, "a,x,w\n1,2,10\n0,4,20\n1,6,30\n");
    const auto d = CompletedDataset::from_table(t);
    CHECK(estimate(d, parse_estimand("T(a=1)"), SamplingDesign::poisson).estimate == 40);
    CHECK(estimate(d, parse_estimand("T(x)"), SamplingDesign::poisson).estimate == 20 + 80 + 180);
    CHECK(estimate(d, parse_estimand("E(x|a=1)"), SamplingDesign::poisson).estimate == doctest::Approx(200.0 / 40));
    CHECK(estimate(d, parse_estimand("P(a=0)"), SamplingDesign::poisson).estimate == doctest::Approx(20.0 / 60));
}

TEST_CASE("pooling by hand") {
    const auto p = pool(std::vector<double>{4, 6}, std::vector<double>{1, 1});
    CHECK(p.qbar == 5);
    CHECK(p.ubar == 1);
    CHECK(p.b == 2);
    CHECK(p.total_var == 4);
    CHECK(p.df == doctest::Approx(16.0 / 9.0).epsilon(1e-15));
    CHECK(p.se() == 2);
    const double tq = t_quantile_975(16.0 / 9.0);
    CHECK(p.ci_low == doctest::Approx(5 - tq * 2));
    CHECK(p.ci_high == doctest::Approx(5 + tq * 2));
}

TEST_CASE("pooling without between-imputation variance") {
    const auto p = pool(std::vector<double>{3, 3, 3}, std::vector<double>{0.5, 0.5, 0.5});
    CHECK(p.b == 0);
    CHECK(p.total_var == doctest::Approx(0.5));
    CHECK(std::isinf(p.df));
    CHECK(p.ci_high - p.qbar == doctest::Approx(1.959963984540054 * std::sqrt(0.5)));
    CHECK_THROWS(pool(std::vector<double>{1}, std::vector<double>{1}));
}

TEST_CASE("t quantiles") {
    CHECK(t_quantile_975(10) == doctest::Approx(2.228138851986274).epsilon(1e-12));
    CHECK(t_quantile_975(1) == doctest::Approx(12.706204736174707).epsilon(1e-12));
    CHECK(t_quantile_975(std::numeric_limits<double>::infinity()) == doctest::Approx(1.959963984540054));
}

TEST_CASE("design names") {
    CHECK(parse_sampling_design("pps") == SamplingDesign::pps_with_replacement);
    CHECK(parse_sampling_design(to_string(SamplingDesign::poisson)) == SamplingDesign::poisson);
    CHECK_THROWS(parse_sampling_design("srs"));
}
