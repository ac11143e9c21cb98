#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mdam/dataset.hpp"
#include "mdam/estimation.hpp"
#include "mdam/gibbs_item.hpp"
#include "mdam/mice.hpp"
#include "mdam/pipeline.hpp"

namespace mdam {

/// A margin as written in a config: a total or a proportion of N, and a
/// variance, a standard deviation, or "calibrate".
struct MarginSpec {
    std::string variable;
    int level = 1;
    std::optional<double> total;
    std::optional<double> proportion;
    std::optional<double> variance;
    bool calibrate = false;
};

struct SubgroupSpec {
    Condition event;
    std::vector<std::string> groups;
};

/// Everything a config file declares about one survey.
struct ProjectConfig {
    SchemaPtr schema;
    std::string missing_token;
    std::optional<double> population_size;
    WeightMode weight_mode = WeightMode::design_known;
    SamplingDesign design = SamplingDesign::poisson;
    std::vector<MarginSpec> margins;
    std::vector<DesignSpec> margin_chain;  // empty: margin variables in order, main effects
    std::vector<std::string> hotdeck_keys;
    MiceConfig mice;
    std::vector<DesignSpec> gibbs_outcomes;   // empty: sequential main effects
    std::vector<DesignSpec> gibbs_responses;  // empty: every variable with missing items
    GibbsConfig gibbs;
    std::vector<EstimandSpec> estimands;
    std::vector<SubgroupSpec> subgroups;
};

ProjectConfig parse_config(std::string_view json_text);
ProjectConfig load_config(const std::filesystem::path& path);
std::string format_config(const ProjectConfig& config);

SurveyTable load_survey(const ProjectConfig& config, const std::filesystem::path& data);

/// Margins with proportions turned into totals against N.
AuxiliaryMargins resolve_margins(const ProjectConfig& config, double population_size);

/// Shared inputs of the method arms for `table`; throws when the resolved
/// margins fail validation.
ImputationProblem make_problem(const ProjectConfig& config, const SurveyTable& table);

}  // namespace mdam
