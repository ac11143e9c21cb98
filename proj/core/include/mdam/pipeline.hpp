#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mdam/completed.hpp"
#include "mdam/estimation.hpp"
#include "mdam/gibbs_item.hpp"
#include "mdam/margin_match.hpp"
#include "mdam/mice.hpp"

namespace mdam {

enum class ArmKind { mmh, mh, ih };
enum class ItemEngine { mice, gibbs };

std::string_view to_string(ArmKind kind);
ArmKind parse_arm(std::string_view text);
std::string_view to_string(ItemEngine engine);
ItemEngine parse_item_engine(std::string_view text);

/// Everything about a dataset that the arms share.
struct ImputationProblem {
    AuxiliaryMargins margins;
    MarginChain chain;
    ConditionalFactorization factorization;  // gibbs engine only
    std::vector<std::string> hotdeck_keys;   // empty: the chain variables
    WeightMode weight_mode = WeightMode::design_known;
    SamplingDesign design = SamplingDesign::poisson;
    /// N; when absent, the table's own value, else (adjusted weights) the
    /// sum of respondent weights.
    std::optional<double> population_size;
};

struct ArmConfig {
    ArmKind kind = ArmKind::mmh;
    /// Item engine; MMH implies mice and MH implies gibbs. IH defaults to mice.
    ItemEngine engine = ItemEngine::mice;
    int datasets = 5;  // L for the mice engine; gibbs emits per its own schedule
    MiceConfig mice;
    GibbsConfig gibbs;
    unsigned threads = 1;

    static ArmConfig make(ArmKind kind, int datasets);
};

/// L completed datasets covering every row of the table, weights included.
struct ImputationSet {
    std::vector<CompletedDataset> datasets;
    std::vector<std::vector<MarginStepTrace>> traces;  // per dataset
    std::vector<double> weights;
    AuxiliaryMargins margins;  // as used, variances calibrated
};

double resolve_population_size(const SurveyTable& table, const ImputationProblem& problem);

/// One chained-equations cycle over the respondents, then margin variables of
/// unit nonrespondents from respondent-fitted models without offsets and a hot
/// deck for the rest. Covers all rows; weights set.
CompletedDataset preliminary_fill(const SurveyTable& table, const ImputationProblem& problem,
                                  const MiceConfig& mice, Rng& rng);

/// Margins with every `calibrate` variance filled from a preliminary fill;
/// returned unchanged when none needs calibrating.
AuxiliaryMargins prepare_margins(const SurveyTable& table, const ImputationProblem& problem,
                                 const MiceConfig& mice, Rng& rng);

/// Runs one method arm end to end.
ImputationSet run_arm(const SurveyTable& table, const ImputationProblem& problem, const ArmConfig& arm,
                      Rng& rng);

/// Completes unit nonrespondents of each respondent completion: chain
/// variables by intercept matching (or offsets fixed at 0), then hot deck.
ImputationSet complete_unit_nonresponse(const SurveyTable& table, const ImputationProblem& problem,
                                        const AuxiliaryMargins& margins,
                                        const std::vector<CompletedDataset>& respondents,
                                        UnitStrategy strategy, unsigned threads, Rng& rng);

}  // namespace mdam
