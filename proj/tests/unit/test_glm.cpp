#include "doctest.h"

#include <cmath>

#include "mdam/glm.hpp"

using namespace mdam;

namespace {

Eigen::MatrixXd random_design(int n, int p, Rng& rng) {
    std::normal_distribution<double> nd;
    Eigen::MatrixXd X(n, p);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        for (int k = 1; k < p; ++k) X(i, k) = nd(rng);
    }
    return X;
}

}  // namespace

TEST_CASE("linear fit equals the normal-equations solution") {
    Rng rng = make_stream(1, 1);
    std::normal_distribution<double> nd;
    const auto X = random_design(80, 3, rng);
    Eigen::VectorXd y(80);
    for (int i = 0; i < 80; ++i) y[i] = 1.0 + 2.0 * X(i, 1) - X(i, 2) + 0.3 * nd(rng);
    const auto f = fit_glm(X, y, Family::linear);
    const Eigen::VectorXd beta = (X.transpose() * X).ldlt().solve(X.transpose() * y);
    CHECK((f.coefficients - beta).cwiseAbs().maxCoeff() < 1e-10);
    const double rss = (y - X * beta).squaredNorm();
    CHECK(f.residual_df == 77);
    CHECK(f.residual_sd == doctest::Approx(std::sqrt(rss / 77)).epsilon(1e-10));
}

TEST_CASE("logistic score vanishes at the fit") {
    Rng rng = make_stream(2, 1);
    const auto X = random_design(200, 3, rng);
    Eigen::VectorXd y(200);
    for (int i = 0; i < 200; ++i) y[i] = bernoulli(rng, inv_logit(0.2 + X(i, 1) - 0.7 * X(i, 2))) ? 1 : 0;
    const auto f = fit_glm(X, y, Family::logistic);
    CHECK(f.converged);
    // independent score X'(y - p)
    Eigen::VectorXd g = Eigen::VectorXd::Zero(3);
    for (int i = 0; i < 200; ++i) g += X.row(i).transpose() * (y[i] - 1.0 / (1.0 + std::exp(-X.row(i).dot(f.coefficients))));
    CHECK(g.cwiseAbs().maxCoeff() < 1e-6);
    CHECK(f.covariance.rows() == 3);
}

TEST_CASE("multinomial probabilities sum to one and match the blocks") {
    Rng rng = make_stream(3, 1);
    const auto X = random_design(300, 2, rng);
    Eigen::VectorXd y(300);
    for (int i = 0; i < 300; ++i) y[i] = double(uniform_index(rng, 3));
    const auto f = fit_glm(X, y, Family::multinomial, 3);
    CHECK(f.coefficients.size() == 4);
    const std::vector<double> x{1.0, 0.4};
    const auto p = predict(f, x);
    REQUIRE(p.size() == 3);
    CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0));
    const double e1 = f.coefficients[0] + 0.4 * f.coefficients[1];
    const double e2 = f.coefficients[2] + 0.4 * f.coefficients[3];
    CHECK(p[1] / p[0] == doctest::Approx(std::exp(e1)));
    CHECK(p[2] / p[0] == doctest::Approx(std::exp(e2)));
}

TEST_CASE("rank deficiency and empty data are GlmErrors") {
    Eigen::MatrixXd X(6, 2);
    X << 1, 2, 1, 2, 1, 2, 1, 2, 1, 2, 1, 2;
    Eigen::VectorXd y(6);
    y << 0, 1, 0, 1, 1, 0;
    CHECK_THROWS_AS(fit_glm(X, y, Family::logistic), GlmError);
    CHECK_THROWS_AS(fit_glm(Eigen::MatrixXd(0, 1), Eigen::VectorXd(0), Family::linear), GlmError);
}

TEST_CASE("complete separation triggers the ridge and stays finite") {
    Eigen::MatrixXd X(8, 2);
    Eigen::VectorXd y(8);
    for (int i = 0; i < 8; ++i) {
        X(i, 0) = 1;
        X(i, 1) = i;
        y[i] = i < 4 ? 0 : 1;
    }
    const auto f = fit_glm(X, y, Family::logistic);
    CHECK(f.ridge_applied);
    CHECK(std::isfinite(f.coefficients[1]));
}

TEST_CASE("log1p_exp is stable") {
    CHECK(log1p_exp(800.0) == doctest::Approx(800.0));
    CHECK(log1p_exp(-800.0) >= 0.0);
    CHECK(log1p_exp(0.0) == doctest::Approx(std::log(2.0)));
    CHECK(logit(inv_logit(1.3)) == doctest::Approx(1.3));
}
