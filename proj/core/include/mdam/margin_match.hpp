#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mdam/completed.hpp"
#include "mdam/design.hpp"
#include "mdam/estimation.hpp"
#include "mdam/glm.hpp"
#include "mdam/random.hpp"

namespace mdam {

/// Ordered models for imputing margin variables of unit nonrespondents. Each
/// link models one categorical variable given earlier links; the unit
/// nonresponse shift enters only as an intercept offset solved at run time.
class MarginChain {
public:
    MarginChain() = default;
    MarginChain(const Schema& schema, const std::vector<DesignSpec>& links);

    /// Each variable conditions on all earlier ones through main effects.
    static MarginChain sequential(const Schema& schema, const std::vector<std::string>& variables);

    const std::vector<ResolvedDesign>& links() const { return links_; }
    std::vector<std::string> variables(const Schema& schema) const;

private:
    std::vector<ResolvedDesign> links_;
};

enum class WeightMode { design_known, adjusted };

std::string_view to_string(WeightMode mode);
WeightMode parse_weight_mode(std::string_view text);

/// Weights for every row of `table`.
///   design_known: respondents keep w; each unit nonrespondent gets
///                 (N - sum of respondent w) / n_U.
///   adjusted:     respondents get w (1 - n_U/n); each unit nonrespondent gets
///                 sum of respondent w / n.
std::vector<double> build_weights(const SurveyTable& table, WeightMode mode,
                                  std::optional<double> population_size);

/// Fills the variance of every entry flagged `calibrate` (or of every entry
/// when `all` is set) with the design-based variance of the completed-data
/// level total.
AuxiliaryMargins calibrate_v(const CompletedDataset& completed, const AuxiliaryMargins& margins,
                             SamplingDesign design, bool all = false);

struct LevelTarget {
    int level = 0;             // level code
    double drawn_total = 0.0;  // plausible total
    double count = 0.0;        // implied count among unit nonrespondents (real)
    double proportion = 0.0;   // after clamping and renormalising
};

struct PlausibleTotalDraw {
    std::string variable;
    std::vector<LevelTarget> levels;  // one per level, in level order
};

inline constexpr double kProportionFloor = 1e-3;

/// Draws plausible totals for one margin variable and converts them to target
/// proportions among the unit nonrespondents.
///
/// `respondent_totals` holds sum of respondent weights per level index;
/// `nonrespondent_weight` the total weight of the n_U unit nonrespondents.
PlausibleTotalDraw draw_targets(const VariableSpec& spec, const AuxiliaryMargins& margins,
                                double population_size, std::span<const double> respondent_totals,
                                double nonrespondent_weight, std::size_t n_nonrespondents, Rng& rng,
                                double floor = kProportionFloor);

/// Offsets that make the mean linear predictor over the rows of X match the
/// target: logit(p_1) for logistic, log(p_e / p_0) per block for multinomial.
std::vector<double> solve_theta(const Eigen::MatrixXd& X, const Eigen::VectorXd& coef, Family family,
                                int levels, std::span<const double> proportions);

enum class UnitStrategy {
    intercept_matching,  // offsets solved to hit plausible totals
    ignorable,           // offsets fixed at 0
};

struct MarginStepTrace {
    std::string variable;
    PlausibleTotalDraw targets;  // empty levels under the ignorable strategy
    std::vector<double> theta;
};

/// Imputes the chain variables of every unit nonrespondent of `data`, whose
/// respondents must be complete and whose weights must be set for all rows.
/// No-op without unit nonrespondents.
std::vector<MarginStepTrace> impute_margin_vars(CompletedDataset& data, const MarginChain& chain,
                                                const AuxiliaryMargins& margins,
                                                double population_size, UnitStrategy strategy,
                                                Rng& rng);

}  // namespace mdam
