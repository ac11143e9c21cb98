#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mdam/completed.hpp"
#include "mdam/design.hpp"
#include "mdam/glm.hpp"
#include "mdam/random.hpp"

namespace mdam {

/// Joint model used by the full-conditional item sampler: one outcome model
/// per variable (conditioning on earlier variables) and one logistic model per
/// item-response indicator. A response model for X_j never reads X_j.
class ConditionalFactorization {
public:
    ConditionalFactorization() = default;
    ConditionalFactorization(const Schema& schema, const std::vector<DesignSpec>& outcomes,
                             const std::vector<DesignSpec>& responses);

    /// Outcome model of every variable on all earlier variables (main effects),
    /// response model of each listed variable on all other variables.
    static ConditionalFactorization sequential(const Schema& schema,
                                               const std::vector<std::string>& response_vars);

    const Schema& schema() const { return *schema_; }
    const std::vector<ResolvedDesign>& outcomes() const { return outcomes_; }
    const std::vector<ResolvedDesign>& responses() const { return responses_; }
    const std::vector<Family>& outcome_families() const { return families_; }
    const std::vector<int>& outcome_levels() const { return levels_; }

    /// Index into outcomes() of the model whose response is `var`, or -1.
    int outcome_for(std::size_t var) const;
    /// Index into responses() of the model for R(var), or -1.
    int response_for(std::size_t var) const;

private:
    SchemaPtr schema_;
    std::vector<ResolvedDesign> outcomes_;
    std::vector<ResolvedDesign> responses_;
    std::vector<Family> families_;
    std::vector<int> levels_;
    std::vector<int> outcome_index_;
    std::vector<int> response_index_;
};

/// One parameter draw for every model of a factorization.
struct GibbsParams {
    std::vector<Eigen::VectorXd> outcome_coef;
    std::vector<double> outcome_sd;  // linear outcomes; 1 otherwise
    std::vector<Eigen::VectorXd> response_coef;
};

/// Values and item-response indicators of one record.
struct RowState {
    std::vector<double> values;
    std::vector<std::uint8_t> missing;
};

RowState row_state(const CompletedDataset& data, std::size_t row);

/// Full conditional of categorical X_j over its levels (by level index):
/// its own outcome model, every outcome model that reads X_j, and every other
/// response model that reads X_j, normalised in log space.
std::vector<double> conditional_pmf_discrete(const ConditionalFactorization& fact,
                                             const GibbsParams& params, const RowState& row,
                                             std::size_t j);

enum class AcceptanceRule {
    /// Independence Metropolis-Hastings with the outcome model as proposal:
    /// ratio of the remaining full-conditional factors at y' and y.
    metropolis,
    /// Outcome-model density included in the ratio as well.
    as_printed,
};

/// log of the acceptance ratio for replacing X_j = y by y'.
double log_acceptance(const ConditionalFactorization& fact, const GibbsParams& params,
                      RowState row, std::size_t j, double y, double y_new, AcceptanceRule rule);

/// One proposal/accept step for continuous X_j; returns the new value.
double rejection_step_continuous(const ConditionalFactorization& fact, const GibbsParams& params,
                                 RowState& row, std::size_t j, Rng& rng,
                                 AcceptanceRule rule = AcceptanceRule::metropolis);

struct GibbsConfig {
    int iterations = 10000;
    int burn_in = 5000;
    int thin = 100;
    AcceptanceRule rule = AcceptanceRule::metropolis;
};

/// Number of states emitted: t in (burn_in, iterations] with (t - burn_in) % thin == 0.
int emitted_count(const GibbsConfig& config);

/// Refits every model on the completed data and draws one parameter set.
GibbsParams draw_params(const ConditionalFactorization& fact, const CompletedDataset& data,
                        Rng& rng, std::vector<FittedGlm>* warm = nullptr);

/// Full-conditional item sampler over the unit respondents of `table`.
/// `start`, if given, is a respondent-only completion used as the initial state.
std::vector<CompletedDataset> run_gibbs_item(const SurveyTable& table,
                                             const ConditionalFactorization& fact,
                                             const GibbsConfig& config, Rng& rng,
                                             const CompletedDataset* start = nullptr);

}  // namespace mdam
