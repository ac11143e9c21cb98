#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mdam/completed.hpp"
#include "mdam/design.hpp"
#include "mdam/random.hpp"

namespace mdam {

enum class Family { logistic, multinomial, linear };

/// Family used to model a variable of the given kind as a response.
Family family_for(const VariableSpec& spec);

struct FitOptions {
    int max_iterations = 50;
    double tolerance = 1e-9;            // relative log-likelihood change
    double separation_threshold = 15.0; // |coefficient| that triggers the ridge
    double ridge = 1e-4;
    const Eigen::VectorXd* start = nullptr;
    const Eigen::VectorXd* weights = nullptr;  // frequency weights, default all 1
};

/// Maximum-likelihood fit with its estimated covariance.
///
/// Multinomial coefficients are stored as m-1 consecutive blocks of width p;
/// block e-1 holds the log-odds of level index e against level index 0.
struct FittedGlm {
    Family family = Family::logistic;
    int levels = 2;
    std::size_t predictors = 0;
    std::size_t observations = 0;
    Eigen::VectorXd coefficients;
    Eigen::MatrixXd covariance;
    double residual_sd = 0.0;   // linear family only
    double residual_ss = 0.0;
    int residual_df = 0;
    double log_likelihood = 0.0;
    double gradient_max = 0.0;  // max |score| at the returned coefficients
    int iterations = 0;
    bool converged = false;
    bool ridge_applied = false;  // separation suspected; L2 penalty added
};

/// Fits `family` to (X, y). For logistic y is 0/1, for multinomial y is the
/// 0-based level index, for linear y is real. Throws GlmError on a
/// rank-deficient design, too few rows, or non-convergence.
FittedGlm fit_glm(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Family family,
                  int levels = 2, const FitOptions& options = {});

/// Response vector for `var` over `rows`: level index for categorical
/// variables, the value for continuous ones.
Eigen::VectorXd response_vector(const CompletedDataset& data, std::span<const std::size_t> rows,
                                std::size_t var);
/// Item-response indicator of `var` (1 = missing in the source) over `rows`.
Eigen::VectorXd indicator_vector(const CompletedDataset& data, std::span<const std::size_t> rows,
                                 std::size_t var);

/// Fits the design's response on `rows` with the family implied by its kind.
FittedGlm fit(const CompletedDataset& data, std::span<const std::size_t> rows,
              const ResolvedDesign& design, const FitOptions& options = {});

/// One draw from Normal(coefficients, covariance).
Eigen::VectorXd draw_coefficients(const FittedGlm& model, Rng& rng);
/// Residual sd drawn from its scaled inverse-chi-square posterior (linear family).
double draw_residual_sd(const FittedGlm& model, Rng& rng);

/// Linear predictor of block `block` (0 for logistic/linear).
double linear_predictor(const Eigen::VectorXd& coef, std::span<const double> x,
                        std::size_t block = 0);

/// Logistic: {P(y=0), P(y=1)}; multinomial: P(level 0..m-1); linear: {mean}.
std::vector<double> predict(const FittedGlm& model, std::span<const double> x);
std::vector<double> predict(const FittedGlm& model, const Eigen::VectorXd& coef,
                            std::span<const double> x);

/// Log density/mass of the observed response `y` under (model family, coef, sd).
double log_density(const FittedGlm& model, const Eigen::VectorXd& coef, double sd,
                   std::span<const double> x, double y);

/// Unpenalised log-likelihood and score; linear family uses -RSS/2.
double log_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Family family,
                      int levels, const Eigen::VectorXd& coef);
Eigen::VectorXd score(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Family family,
                      int levels, const Eigen::VectorXd& coef);

double inv_logit(double eta);
double logit(double p);
/// log(1 + exp(x)) without overflow.
double log1p_exp(double x);

}  // namespace mdam
