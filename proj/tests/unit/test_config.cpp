#include "doctest.h"
#include "helpers.hpp"

#include "mdam/config.hpp"

using namespace mdam;

namespace {

const char* kConfig = R"json({
  "variables": [
    {"name": "sex", "kind": "binary", "margin": true},
    {"name": "race", "kind": "categorical", "levels": ["w", "b", "o"], "margin": true},
    {"name": "age", "kind": "continuous"}
  ],
  "weight_column": "wt",
  "weight_mode": "adjusted",
  "design": "pps",
  "margins": [
    {"variable": "sex", "level": 1, "proportion": 0.5, "sd": 10},
    {"variable": "race", "level": 2, "total": 30, "variance": "calibrate"},
    {"variable": "race", "level": 3, "proportion": 0.1}
  ],
  "margin_chain": [
    {"variable": "sex"},
    {"variable": "race", "terms": ["sex"]}
  ],
  "mice": {"datasets": 3, "cycles": 2, "imputers": {"age": "norm"}},
  "gibbs": {"iterations": 50, "burn_in": 20, "thin": 10},
  "estimands": ["T(sex=1)", "E(age|race=2)"],
  "subgroups": [{"variable": "sex", "level": 1, "groups": ["race"]}]
})json";

}  // namespace

TEST_CASE("config parses every section") {
    const auto c = parse_config(kConfig);
    CHECK(c.schema->size() == 3);
    CHECK(c.schema->weight_column() == "wt");
    CHECK((*c.schema)[1].level_count() == 3);
    CHECK(c.weight_mode == WeightMode::adjusted);
    CHECK(c.design == SamplingDesign::pps_with_replacement);
    REQUIRE(c.margins.size() == 3);
    CHECK(*c.margins[0].variance == 100.0);
    CHECK(c.margins[1].calibrate);
    CHECK(c.margins[2].calibrate);
    CHECK(c.margin_chain.size() == 2);
    CHECK(c.mice.datasets == 3);
    CHECK(c.mice.imputers.at("age") == Imputer::linear_normal);
    CHECK(c.gibbs.thin == 10);
    CHECK(c.estimands.size() == 2);
    CHECK(c.subgroups.size() == 1);
}

TEST_CASE("config round-trips through its own format") {
    const auto c = parse_config(kConfig);
    const auto again = parse_config(format_config(c));
    CHECK(format_config(again) == format_config(c));
}

TEST_CASE("config errors") {
    CHECK_THROWS_AS(parse_config("{"), ParseError);
    CHECK_THROWS_AS(parse_config(R"json({"variables": [], "bogus": 1})json"), ParseError);
    CHECK_THROWS_AS(parse_config(R"json({"variables": [{"name": "a", "kind": "binary"}],
        "margins": [{"variable": "a", "total": 1, "proportion": 0.1}]})json"), ParseError);
    CHECK_THROWS_AS(parse_config(R"json({"variables": [{"name": "a", "kind": "binary"}],
        "margins": [{"variable": "zz", "total": 1}]})json"), ParseError);
    CHECK_THROWS(parse_config(R"json({"variables": [{"name": "a", "kind": "binary"}], "estimands": ["T(a=3)"]})json"));
}

TEST_CASE("proportions resolve against N and the problem validates") {
    const auto c = parse_config(kConfig);
    const auto t = parse_table("sex,race,age,wt\n1,1,30,40\n0,2,50,60\n,,,\n", c.schema);
    const auto p = make_problem(c, t);
    CHECK(*p.population_size == doctest::Approx(100.0));  // adjusted: sum of respondent weights
    CHECK(p.margins.entries[0].total == doctest::Approx(50.0));
    CHECK(p.margins.entries[2].total == doctest::Approx(10.0));
    CHECK(p.chain.links().size() == 2);
}
