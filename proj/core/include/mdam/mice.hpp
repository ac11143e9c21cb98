#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "mdam/completed.hpp"
#include "mdam/dataset.hpp"
#include "mdam/design.hpp"
#include "mdam/random.hpp"

namespace mdam {

enum class Imputer { logistic, multinomial, linear_normal, pmm };

std::string_view to_string(Imputer imputer);
Imputer parse_imputer(std::string_view text);
/// Default imputer for a variable kind: logistic, multinomial, or PMM.
Imputer default_imputer(const VariableSpec& spec);

/// Chained-equations settings.
struct MiceConfig {
    int datasets = 5;   // L
    int cycles = 5;
    /// Empty: variables with missing items in ascending order of missingness.
    std::vector<std::string> visit_sequence;
    /// Per-variable overrides; others use default_imputer().
    std::map<std::string, Imputer> imputers;
    /// Per-variable predictor overrides; default is a main effect of every
    /// other variable (plus response indicators, see below).
    std::map<std::string, std::vector<Term>> predictors;
    int pmm_donors = 5;
    /// Add R(X) for every other variable with missing items as a predictor.
    bool include_response_indicators = true;
    /// Pseudo-observation augmentation of categorical imputation models.
    bool augment = true;
    unsigned threads = 1;
};

/// Visit order by ascending count of missing items among unit respondents;
/// ties keep schema order. Fully observed variables are omitted.
std::vector<std::string> default_visit_sequence(const SurveyTable& table);

/// Per-variable imputation step of a chain, resolved against a table.
struct MiceStep {
    std::size_t var = 0;
    Imputer imputer = Imputer::pmm;
    ResolvedDesign design;
};

/// Resolves and validates `config` against `table`.
std::vector<MiceStep> plan_mice(const SurveyTable& table, const MiceConfig& config);

/// L completed copies of the unit respondents of `table` (rows in table order).
std::vector<CompletedDataset> run_mice(const SurveyTable& table, const MiceConfig& config, Rng& rng);

/// One chain: random-draw initialisation followed by `cycles` sweeps.
CompletedDataset run_mice_chain(const SurveyTable& table, const std::vector<MiceStep>& plan,
                                const MiceConfig& config, int cycles, Rng& rng);

/// Fills every imputed cell of `data` on `rows` by sampling the observed values
/// of the same variable uniformly.
void initialise_from_observed(CompletedDataset& data, std::span<const std::size_t> rows, Rng& rng);

/// One sweep over `plan` on the given rows.
void mice_sweep(CompletedDataset& data, std::span<const std::size_t> rows,
                const std::vector<MiceStep>& plan, const MiceConfig& config, Rng& rng);

/// Predictive mean matching: for each target, the k donors with closest
/// predictions (ties at the boundary broken uniformly), then one of those k
/// uniformly; returns the chosen donors' values.
std::vector<double> impute_pmm(std::span<const double> donor_predictions,
                               std::span<const double> donor_values,
                               std::span<const double> target_predictions, int k, Rng& rng);

}  // namespace mdam
