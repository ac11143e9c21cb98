#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mdam/dataset.hpp"

namespace test {

inline mdam::SchemaPtr schema_of(std::vector<mdam::VariableSpec> vars, std::string weight = "w") {
    return std::make_shared<const mdam::Schema>(std::move(vars), std::move(weight));
}

inline mdam::SurveyTable table_of(const mdam::SchemaPtr& schema, const std::string& csv,
                                  std::optional<double> N = {}) {
    mdam::LoadOptions o;
    o.population_size = N;
    return mdam::parse_table(csv, schema, o);
}

}  // namespace test
