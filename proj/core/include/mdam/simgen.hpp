#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <vector>

#include "mdam/completed.hpp"
#include "mdam/dataset.hpp"
#include "mdam/estimation.hpp"
#include "mdam/gibbs_item.hpp"
#include "mdam/margin_match.hpp"
#include "mdam/random.hpp"

namespace mdam {

/// Item nonresponse model for one variable: logit P(R=1) = phi[0] + sum of
/// phi[k] times the k-th other variable in schema order. A phi[0] of -inf
/// switches item nonresponse off for that variable.
struct ItemNonresponseModel {
    std::size_t var = 0;
    std::vector<double> phi;
};

/// Generating model of the six-variable simulation: X1..X4 binary, X5 and X6
/// normal, sequential dependence, unit nonresponse shifting X1 and X2.
struct SimulationConfig {
    std::size_t population_size = 200000;
    double expected_sample_size = 2000.0;  // sum of inclusion probabilities
    double size_log_sd = 0.6;              // log-scale sd of the size variable

    double nu0 = -1.2;
    std::array<double, 2> omega1{0.06, -0.0002};  // intercept, W
    double theta1 = -2.0;
    std::array<double, 2> omega2{0.2, 0.4};
    double theta2 = -2.0;
    std::array<double, 3> omega3{0.2, 0.3, 0.1};
    std::array<double, 4> omega4{0.2, 0.4, 0.4, 0.1};
    std::array<double, 5> omega5{0.4, 1.2, -0.9, 0.1, 0.2};
    double sigma5 = 0.5;
    std::array<double, 6> omega6{0.4, 1.2, -0.9, 0.1, -0.1, 0.1};
    double sigma6 = 0.5;
    std::vector<ItemNonresponseModel> item_nonresponse;

    /// Published parameter set; theta1 is -2 or -0.5 in the two scenarios.
    static SimulationConfig appendix_b(double theta1 = -2.0);
    /// Full-scale sizes: N = 3,373,378 and E[n] = 6000.
    SimulationConfig& full_scale();
};

/// Finite population, one entry per unit.
struct Population {
    std::array<std::vector<double>, 6> x;
    std::vector<std::uint8_t> u;  // latent unit nonresponse
    std::vector<double> z;
    std::vector<double> w;        // 10 z
    std::vector<double> pi;       // 1 / w

    std::size_t size() const { return u.size(); }
};

/// X1..X6 (X1, X2 carry margins), weight column "w".
SchemaPtr simulation_schema();

Population generate_population(const SimulationConfig& config, Rng& rng);

/// Indices of units selected by independent Bernoulli(pi) draws.
std::vector<std::size_t> draw_poisson_sample(const Population& pop, Rng& rng);

/// Fully observed table of the given units with their design weights.
SurveyTable sample_table(const Population& pop, std::span<const std::size_t> units);

/// P(U = 1 | X1, X2) from the population counts, indexed 2*x1 + x2.
std::array<double, 4> unit_nr_cell_probabilities(const Population& pop);

/// Redraws U for each row from its (X1, X2) cell; U = 1 rows become all-missing.
SurveyTable inject_unit_nonresponse(const SurveyTable& sample, const std::array<double, 4>& cell_probs,
                                    Rng& rng);

/// Deletes items of unit respondents per the configured models, each drawn
/// from the fully observed row.
SurveyTable inject_item_nonresponse(const SurveyTable& table,
                                    const std::vector<ItemNonresponseModel>& models, Rng& rng);

/// Known totals of level 1 of X1 and X2; variances to be calibrated.
AuxiliaryMargins simulation_margins(const Population& pop);
/// X1 on an intercept, X2 on X1.
MarginChain simulation_chain(const Schema& schema);
/// Generating structure as outcome models plus the fitted response models.
ConditionalFactorization simulation_factorization(const Schema& schema);

std::vector<EstimandSpec> simulation_total_estimands();
std::vector<EstimandSpec> simulation_probability_estimands();

/// The whole population as a completed dataset with unit weights, so that
/// estimate() returns population values.
CompletedDataset population_dataset(const Population& pop);

// --- voter-supplement-like data --------------------------------------------

/// Eleven-variable schema modelled on a voter supplement: difficulty,
/// employment, sex, race, marital, education, age, proxy, duration, vote,
/// income; sex, race and vote carry margins.
SchemaPtr voter_schema();

struct VoterSynthConfig {
    std::size_t rows = 2926;
    std::size_t unit_nonrespondents = 913;  // expected count
    double population_size = 7.5e6;
};

/// Synthetic stand-in with nonignorable unit nonresponse on vote, item
/// nonresponse, and adjusted weights on respondent rows only.
SurveyTable generate_voter_like(const VoterSynthConfig& config, Rng& rng);

}  // namespace mdam
