#include "doctest.h"
#include "helpers.hpp"

#include "mdam/study.hpp"

using namespace mdam;

TEST_CASE("subgroup report with equal weights gives cell means") {
    const auto s = test::schema_of({VariableSpec::binary("v"), VariableSpec::categorical("g", {"a", "b", "c"})});
    const auto t1 = test::table_of(s, "v,g,w\n1,1,2\n0,1,2\n1,1,2\n1,2,2\n0,2,2\n");
    const auto t2 = test::table_of(s, "v,g,w\n1,1,2\n0,1,2\n0,1,2\n1,2,2\n1,2,2\n");
    const std::vector<CompletedDataset> sets{CompletedDataset::from_table(t1), CompletedDataset::from_table(t2)};
    const auto rows = subgroup_report(sets, {"v", 1}, {"g"}, SamplingDesign::poisson);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].label == "P(v=1|g=1)");
    CHECK(rows[0].pooled.qbar == doctest::Approx((2.0 / 3 + 1.0 / 3) / 2));
    CHECK(rows[1].pooled.qbar == doctest::Approx((0.5 + 1.0) / 2));
    CHECK_FALSE(rows[0].degenerate);
    CHECK(rows[2].degenerate);  // nobody in g=3
    const auto csv = format_pooled_csv(rows);
    CHECK(csv.find("empty-subgroup") != std::string::npos);
}

TEST_CASE("subgroup report over everyone") {
    const auto s = test::schema_of({VariableSpec::binary("v")});
    const auto t = test::table_of(s, "v,w\n1,1\n0,3\n1,1\n");
    const std::vector<CompletedDataset> sets{CompletedDataset::from_table(t), CompletedDataset::from_table(t)};
    const auto rows = subgroup_report(sets, {"v", 1}, {}, SamplingDesign::poisson);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].pooled.qbar == doctest::Approx(2.0 / 5));
    CHECK(rows[0].pooled.b == 0.0);
}
