#include "mdam/glm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mdam {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double inv_logit(double eta) {
    if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

double log1p_exp(double x) {
    if (x > 35.0) return x;
    if (x < -35.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

Family family_for(const VariableSpec& spec) {
    switch (spec.kind) {
        case VariableKind::binary: return Family::logistic;
        case VariableKind::categorical:
            return spec.level_count() == 2 ? Family::logistic : Family::multinomial;
        case VariableKind::continuous: return Family::linear;
    }
    return Family::linear;
}

namespace {

struct Evaluation {
    double ll = 0.0;
    VectorXd grad;
    MatrixXd info;
};

double weight_at(const VectorXd* w, Eigen::Index i) { return w ? (*w)(i) : 1.0; }

// log(1 + sum_e exp(eta_e)) over the non-reference levels.
double log_normaliser(const double* eta, int k) {
    double mx = 0.0;
    for (int e = 0; e < k; ++e) mx = std::max(mx, eta[e]);
    double s = std::exp(-mx);
    for (int e = 0; e < k; ++e) s += std::exp(eta[e] - mx);
    return mx + std::log(s);
}

Evaluation evaluate_logistic(const MatrixXd& X, const VectorXd& y, const VectorXd* w,
                             const VectorXd& b, bool with_derivatives) {
    Evaluation ev;
    const VectorXd eta = X * b;
    VectorXd resid(X.rows()), curv(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const double wi = weight_at(w, i);
        ev.ll += wi * (y(i) * eta(i) - log1p_exp(eta(i)));
        const double p = inv_logit(eta(i));
        resid(i) = wi * (y(i) - p);
        curv(i) = wi * p * (1.0 - p);
    }
    if (with_derivatives) {
        ev.grad = X.transpose() * resid;
        ev.info = X.transpose() * (X.array().colwise() * curv.array()).matrix();
    }
    return ev;
}

Evaluation evaluate_multinomial(const MatrixXd& X, const VectorXd& y, const VectorXd* w,
                                int levels, const VectorXd& b, bool with_derivatives) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    const int k = levels - 1;
    Evaluation ev;
    // eta(i, e) = x_i' beta_e
    const MatrixXd B = Eigen::Map<const MatrixXd>(b.data(), p, k);
    const MatrixXd eta = X * B;
    MatrixXd prob(n, k);
    std::vector<double> row(static_cast<std::size_t>(k));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int e = 0; e < k; ++e) row[e] = eta(i, e);
        const double lse = log_normaliser(row.data(), k);
        const int yi = static_cast<int>(y(i));
        ev.ll += weight_at(w, i) * ((yi > 0 ? eta(i, yi - 1) : 0.0) - lse);
        for (int e = 0; e < k; ++e) prob(i, e) = std::exp(eta(i, e) - lse);
    }
    if (!with_derivatives) return ev;
    ev.grad.setZero(p * k);
    ev.info.setZero(p * k, p * k);
    for (int a = 0; a < k; ++a) {
        VectorXd resid(n);
        for (Eigen::Index i = 0; i < n; ++i)
            resid(i) = weight_at(w, i) * ((static_cast<int>(y(i)) == a + 1 ? 1.0 : 0.0) - prob(i, a));
        ev.grad.segment(a * p, p) = X.transpose() * resid;
        for (int c = a; c < k; ++c) {
            VectorXd curv(n);
            for (Eigen::Index i = 0; i < n; ++i)
                curv(i) = weight_at(w, i) * prob(i, a) * ((a == c ? 1.0 : 0.0) - prob(i, c));
            const MatrixXd blk = X.transpose() * (X.array().colwise() * curv.array()).matrix();
            ev.info.block(a * p, c * p, p, p) = blk;
            if (c != a) ev.info.block(c * p, a * p, p, p) = blk.transpose();
        }
    }
    return ev;
}

Evaluation evaluate(const MatrixXd& X, const VectorXd& y, const VectorXd* w, Family family,
                    int levels, const VectorXd& b, double lambda, bool with_derivatives) {
    Evaluation ev = family == Family::logistic
                        ? evaluate_logistic(X, y, w, b, with_derivatives)
                        : evaluate_multinomial(X, y, w, levels, b, with_derivatives);
    if (lambda > 0.0) {
        ev.ll -= 0.5 * lambda * b.squaredNorm();
        if (with_derivatives) {
            ev.grad -= lambda * b;
            ev.info.diagonal().array() += lambda;
        }
    }
    return ev;
}

MatrixXd invert_spd(const MatrixXd& A) {
    const Eigen::Index d = A.rows();
    Eigen::LLT<MatrixXd> llt(A);
    if (llt.info() == Eigen::Success) return llt.solve(MatrixXd::Identity(d, d));
    Eigen::LDLT<MatrixXd> ldlt(A);
    if (ldlt.info() != Eigen::Success) throw GlmError("information matrix is not invertible");
    return ldlt.solve(MatrixXd::Identity(d, d));
}

void check_rank(const MatrixXd& X, const VectorXd* w) {
    MatrixXd G = w ? MatrixXd(X.transpose() * (X.array().colwise() * w->array()).matrix())
                   : MatrixXd(X.transpose() * X);
    // Scale to unit diagonal so the pivot threshold is relative.
    VectorXd d = G.diagonal();
    for (Eigen::Index c = 0; c < d.size(); ++c) {
        if (!(d(c) > 0.0)) throw GlmError("rank-deficient design: column " + std::to_string(c) + " is zero");
        d(c) = 1.0 / std::sqrt(d(c));
    }
    G = d.asDiagonal() * G * d.asDiagonal();
    Eigen::LDLT<MatrixXd> ldlt(G);
    const VectorXd piv = ldlt.vectorD();
    if (ldlt.info() != Eigen::Success || piv.minCoeff() < 1e-11)
        throw GlmError("rank-deficient design");
}

FittedGlm fit_linear(const MatrixXd& X, const VectorXd& y, const VectorXd* w) {
    FittedGlm m;
    m.family = Family::linear;
    m.levels = 0;
    m.predictors = static_cast<std::size_t>(X.cols());
    m.observations = static_cast<std::size_t>(X.rows());
    const MatrixXd Xw = w ? MatrixXd(X.array().colwise() * w->array()) : X;
    const MatrixXd XtX = X.transpose() * Xw;
    const MatrixXd XtX_inv = invert_spd(XtX);
    m.coefficients = XtX_inv * (Xw.transpose() * y);
    const VectorXd resid = y - X * m.coefficients;
    m.residual_ss = w ? resid.cwiseProduct(resid).dot(*w) : resid.squaredNorm();
    const double n_eff = w ? w->sum() : static_cast<double>(X.rows());
    m.residual_df = static_cast<int>(std::lround(n_eff)) - static_cast<int>(X.cols());
    const double s2 = m.residual_df > 0 ? m.residual_ss / m.residual_df : 0.0;
    m.residual_sd = std::sqrt(s2);
    m.covariance = s2 * XtX_inv;
    m.log_likelihood = -0.5 * m.residual_ss;
    m.gradient_max = (Xw.transpose() * resid).cwiseAbs().maxCoeff();
    m.iterations = 1;
    m.converged = true;
    return m;
}

}  // namespace

double log_likelihood(const MatrixXd& X, const VectorXd& y, Family family, int levels,
                      const VectorXd& coef) {
    if (family == Family::linear) return -0.5 * (y - X * coef).squaredNorm();
    return evaluate(X, y, nullptr, family, levels, coef, 0.0, false).ll;
}

VectorXd score(const MatrixXd& X, const VectorXd& y, Family family, int levels,
               const VectorXd& coef) {
    if (family == Family::linear) return X.transpose() * (y - X * coef);
    return evaluate(X, y, nullptr, family, levels, coef, 0.0, true).grad;
}

FittedGlm fit_glm(const MatrixXd& X, const VectorXd& y, Family family, int levels,
                  const FitOptions& options) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    if (y.size() != n) throw GlmError("response length does not match design rows");
    if (p == 0) throw GlmError("empty design");
    const VectorXd* w = options.weights;
    if (w && w->size() != n) throw GlmError("weight length does not match design rows");
    const double n_eff = w ? w->sum() : static_cast<double>(n);
    if (n_eff < static_cast<double>(p + 1))
        throw GlmError("need at least p+1 rows (" + std::to_string(p + 1) + "), got " +
                       std::to_string(n));
    check_rank(X, w);

    if (family == Family::linear) return fit_linear(X, y, w);

    if (family == Family::logistic) levels = 2;
    if (levels < 2) throw GlmError("multinomial needs at least 2 levels");
    const Eigen::Index dim = family == Family::logistic ? p : p * (levels - 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double yi = y(i);
        if (yi < 0 || yi > levels - 1 || yi != std::floor(yi))
            throw GlmError("response value out of range for the family");
    }

    auto run = [&](double lambda, const VectorXd& start, bool& separated) {
        FittedGlm m;
        m.family = family;
        m.levels = levels;
        m.predictors = static_cast<std::size_t>(p);
        m.observations = static_cast<std::size_t>(n);
        m.ridge_applied = lambda > 0.0;
        VectorXd beta = start;
        Evaluation ev = evaluate(X, y, w, family, levels, beta, lambda, true);
        separated = false;
        for (int it = 1; it <= options.max_iterations; ++it) {
            m.iterations = it;
            VectorXd delta;
            Eigen::LLT<MatrixXd> llt(ev.info);
            if (llt.info() == Eigen::Success) {
                delta = llt.solve(ev.grad);
            } else {
                delta = ev.info.ldlt().solve(ev.grad);
            }
            double step = 1.0;
            VectorXd cand = beta + delta;
            double ll_cand = evaluate(X, y, w, family, levels, cand, lambda, false).ll;
            for (int h = 0; h < 30 && !(ll_cand >= ev.ll - 1e-12 * std::abs(ev.ll)); ++h) {
                step *= 0.5;
                cand = beta + step * delta;
                ll_cand = evaluate(X, y, w, family, levels, cand, lambda, false).ll;
            }
            const double old_ll = ev.ll;
            beta = std::move(cand);
            ev = evaluate(X, y, w, family, levels, beta, lambda, true);
            if (lambda == 0.0 && beta.cwiseAbs().maxCoeff() > options.separation_threshold) {
                separated = true;
                return m;
            }
            if (std::abs(ev.ll - old_ll) / (std::abs(ev.ll) + 0.1) < options.tolerance) {
                m.converged = true;
                break;
            }
        }
        m.coefficients = beta;
        m.log_likelihood = ev.ll;
        m.gradient_max = ev.grad.cwiseAbs().maxCoeff();
        m.covariance = invert_spd(ev.info);
        return m;
    };

    VectorXd start = VectorXd::Zero(dim);
    if (options.start && options.start->size() == dim && options.start->allFinite() &&
        options.start->cwiseAbs().maxCoeff() <= options.separation_threshold)
        start = *options.start;

    bool separated = false;
    FittedGlm m = run(0.0, start, separated);
    if (separated) {
        m = run(options.ridge, VectorXd::Zero(dim), separated);
    }
    if (!m.converged)
        throw GlmError("IRLS did not converge in " + std::to_string(options.max_iterations) +
                       " iterations");
    return m;
}

VectorXd response_vector(const CompletedDataset& data, std::span<const std::size_t> rows,
                         std::size_t var) {
    const auto& spec = data.schema()[var];
    VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const double v = data.value(var, rows[r]);
        y(static_cast<Eigen::Index>(r)) = spec.is_categorical() ? spec.level_index(v) : v;
    }
    return y;
}

VectorXd indicator_vector(const CompletedDataset& data, std::span<const std::size_t> rows,
                          std::size_t var) {
    VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        y(static_cast<Eigen::Index>(r)) = data.imputed(var, rows[r]) ? 1.0 : 0.0;
    return y;
}

FittedGlm fit(const CompletedDataset& data, std::span<const std::size_t> rows,
              const ResolvedDesign& design, const FitOptions& options) {
    const auto& spec = data.schema()[design.response()];
    const MatrixXd X = design.matrix(data, rows);
    const VectorXd y = response_vector(data, rows, design.response());
    try {
        return fit_glm(X, y, family_for(spec), spec.level_count(), options);
    } catch (const GlmError& e) {
        throw GlmError("fitting model for '" + spec.name + "': " + e.what());
    }
}

VectorXd draw_coefficients(const FittedGlm& model, Rng& rng) {
    const Eigen::Index d = model.coefficients.size();
    const double max_diag = d > 0 ? model.covariance.diagonal().maxCoeff() : 0.0;
    if (!(max_diag > 0.0)) return model.coefficients;
    MatrixXd cov = model.covariance;
    cov = 0.5 * (cov + cov.transpose());
    Eigen::LLT<MatrixXd> llt(cov);
    double jitter = 1e-8 * max_diag;
    for (int attempt = 0; llt.info() != Eigen::Success; ++attempt) {
        if (attempt > 40) throw GlmError("covariance cannot be factorised");
        cov.diagonal().array() += jitter;
        jitter *= 2.0;
        llt.compute(cov);
    }
    VectorXd z(d);
    for (Eigen::Index c = 0; c < d; ++c) z(c) = standard_normal(rng);
    return model.coefficients + llt.matrixL() * z;
}

double draw_residual_sd(const FittedGlm& model, Rng& rng) {
    if (model.family != Family::linear) return 0.0;
    if (model.residual_df <= 0 || !(model.residual_ss > 0.0)) return model.residual_sd;
    return std::sqrt(model.residual_ss / chi_square(rng, model.residual_df));
}

double linear_predictor(const VectorXd& coef, std::span<const double> x, std::size_t block) {
    const std::size_t p = x.size();
    double eta = 0.0;
    const double* b = coef.data() + block * p;
    for (std::size_t c = 0; c < p; ++c) eta += b[c] * x[c];
    return eta;
}

std::vector<double> predict(const FittedGlm& model, const VectorXd& coef,
                            std::span<const double> x) {
    switch (model.family) {
        case Family::linear: return {linear_predictor(coef, x)};
        case Family::logistic: {
            const double p1 = inv_logit(linear_predictor(coef, x));
            return {1.0 - p1, p1};
        }
        case Family::multinomial: {
            const int k = model.levels - 1;
            std::vector<double> eta(static_cast<std::size_t>(k));
            for (int e = 0; e < k; ++e) eta[e] = linear_predictor(coef, x, e);
            const double lse = log_normaliser(eta.data(), k);
            std::vector<double> out(static_cast<std::size_t>(model.levels));
            out[0] = std::exp(-lse);
            for (int e = 0; e < k; ++e) out[e + 1] = std::exp(eta[e] - lse);
            return out;
        }
    }
    return {};
}

std::vector<double> predict(const FittedGlm& model, std::span<const double> x) {
    return predict(model, model.coefficients, x);
}

double log_density(const FittedGlm& model, const VectorXd& coef, double sd,
                   std::span<const double> x, double y) {
    switch (model.family) {
        case Family::linear: {
            const double z = (y - linear_predictor(coef, x)) / sd;
            return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
        }
        case Family::logistic: {
            const double eta = linear_predictor(coef, x);
            return y > 0.5 ? -log1p_exp(-eta) : -log1p_exp(eta);
        }
        case Family::multinomial: {
            const int k = model.levels - 1;
            std::vector<double> eta(static_cast<std::size_t>(k));
            for (int e = 0; e < k; ++e) eta[e] = linear_predictor(coef, x, e);
            const int yi = static_cast<int>(y);
            return (yi > 0 ? eta[yi - 1] : 0.0) - log_normaliser(eta.data(), k);
        }
    }
    return 0.0;
}

}  // namespace mdam
