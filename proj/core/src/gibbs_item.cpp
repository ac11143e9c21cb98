#include "mdam/gibbs_item.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mdam/mice.hpp"

namespace mdam {

using Eigen::MatrixXd;
using Eigen::VectorXd;

ConditionalFactorization::ConditionalFactorization(const Schema& schema,
                                                   const std::vector<DesignSpec>& outcomes,
                                                   const std::vector<DesignSpec>& responses)
    : schema_(std::make_shared<const Schema>(schema)),
      outcome_index_(schema.size(), -1),
      response_index_(schema.size(), -1) {
    for (const auto& spec : outcomes) {
        ResolvedDesign d(schema, spec);
        const std::size_t j = d.response();
        if (outcome_index_[j] >= 0)
            throw Error("factorization: two outcome models for '" + schema[j].name + "'");
        outcome_index_[j] = static_cast<int>(outcomes_.size());
        families_.push_back(family_for(schema[j]));
        levels_.push_back(schema[j].is_categorical() ? schema[j].level_count() : 0);
        outcomes_.push_back(std::move(d));
    }
    for (const auto& spec : responses) {
        ResolvedDesign d(schema, spec);
        const std::size_t j = d.response();
        if (d.references(j))
            throw Error("factorization: response model for '" + schema[j].name +
                        "' reads the variable itself");
        if (response_index_[j] >= 0)
            throw Error("factorization: two response models for '" + schema[j].name + "'");
        response_index_[j] = static_cast<int>(responses_.size());
        responses_.push_back(std::move(d));
    }
}

ConditionalFactorization ConditionalFactorization::sequential(
    const Schema& schema, const std::vector<std::string>& response_vars) {
    std::vector<DesignSpec> outcomes;
    for (std::size_t j = 0; j < schema.size(); ++j) {
        DesignSpec s;
        s.response = schema[j].name;
        for (std::size_t t = 0; t < j; ++t) s.terms.push_back(Term::main(schema[t].name));
        outcomes.push_back(std::move(s));
    }
    std::vector<DesignSpec> responses;
    for (const auto& name : response_vars) {
        DesignSpec s;
        s.response = name;
        for (std::size_t t = 0; t < schema.size(); ++t)
            if (schema[t].name != name) s.terms.push_back(Term::main(schema[t].name));
        responses.push_back(std::move(s));
    }
    return ConditionalFactorization(schema, outcomes, responses);
}

int ConditionalFactorization::outcome_for(std::size_t var) const {
    return var < outcome_index_.size() ? outcome_index_[var] : -1;
}

int ConditionalFactorization::response_for(std::size_t var) const {
    return var < response_index_.size() ? response_index_[var] : -1;
}

RowState row_state(const CompletedDataset& data, std::size_t row) {
    RowState s;
    s.values.resize(data.cols());
    s.missing.resize(data.cols());
    for (std::size_t j = 0; j < data.cols(); ++j) {
        s.values[j] = data.value(j, row);
        s.missing[j] = data.imputed(j, row) ? 1 : 0;
    }
    return s;
}

namespace {

void design_row(const ResolvedDesign& d, const RowState& row, std::vector<double>& x) {
    x.resize(d.width());
    d.fill([&](std::size_t v) { return row.values[v]; },
           [&](std::size_t v) { return row.missing[v] != 0; }, x.data());
}

// log density of outcome model k at the row's current value of its response.
double outcome_term(const ConditionalFactorization& fact, const GibbsParams& params,
                    std::size_t k, const RowState& row, std::vector<double>& x) {
    const auto& d = fact.outcomes()[k];
    design_row(d, row, x);
    FittedGlm shape;
    shape.family = fact.outcome_families()[k];
    shape.levels = fact.outcome_levels()[k];
    const auto& spec = fact.schema()[d.response()];
    const double v = row.values[d.response()];
    const double y = spec.is_categorical() ? spec.level_index(v) : v;
    return log_density(shape, params.outcome_coef[k], params.outcome_sd[k], x, y);
}

double response_term(const ConditionalFactorization& fact, const GibbsParams& params,
                     std::size_t k, const RowState& row, std::vector<double>& x) {
    const auto& d = fact.responses()[k];
    design_row(d, row, x);
    const double eta = linear_predictor(params.response_coef[k], x);
    return row.missing[d.response()] ? -log1p_exp(-eta) : -log1p_exp(eta);
}

// Sum of the log factors of the joint that change with X_j, except X_j's own
// outcome model when `include_own` is false.
double log_factors(const ConditionalFactorization& fact, const GibbsParams& params,
                   const RowState& row, std::size_t j, bool include_own) {
    std::vector<double> x;
    double total = 0.0;
    for (std::size_t k = 0; k < fact.outcomes().size(); ++k) {
        const auto& d = fact.outcomes()[k];
        const bool own = d.response() == j;
        if ((own && include_own) || (!own && d.references(j)))
            total += outcome_term(fact, params, k, row, x);
    }
    for (std::size_t k = 0; k < fact.responses().size(); ++k) {
        const auto& d = fact.responses()[k];
        if (d.response() != j && d.references(j)) total += response_term(fact, params, k, row, x);
    }
    return total;
}

}  // namespace

std::vector<double> conditional_pmf_discrete(const ConditionalFactorization& fact,
                                             const GibbsParams& params, const RowState& row,
                                             std::size_t j) {
    const auto& spec = fact.schema()[j];
    if (!spec.is_categorical())
        throw Error("conditional pmf requested for continuous variable '" + spec.name + "'");
    if (fact.outcome_for(j) < 0) throw Error("no outcome model for '" + spec.name + "'");
    const int m = spec.level_count();
    RowState work = row;
    std::vector<double> logp(static_cast<std::size_t>(m));
    for (int l = 0; l < m; ++l) {
        work.values[j] = spec.code_of(l);
        logp[static_cast<std::size_t>(l)] = log_factors(fact, params, work, j, true);
    }
    const double top = *std::max_element(logp.begin(), logp.end());
    if (!std::isfinite(top))
        throw Error("conditional pmf of '" + spec.name + "' has no level with positive mass");
    double total = 0.0;
    for (double& v : logp) {
        v = std::exp(v - top);
        total += v;
    }
    for (double& v : logp) v /= total;
    return logp;
}

double log_acceptance(const ConditionalFactorization& fact, const GibbsParams& params,
                      RowState row, std::size_t j, double y, double y_new, AcceptanceRule rule) {
    const bool own = rule == AcceptanceRule::as_printed;
    row.values[j] = y_new;
    const double num = log_factors(fact, params, row, j, own);
    row.values[j] = y;
    const double den = log_factors(fact, params, row, j, own);
    return num - den;
}

double rejection_step_continuous(const ConditionalFactorization& fact, const GibbsParams& params,
                                 RowState& row, std::size_t j, Rng& rng, AcceptanceRule rule) {
    const int k = fact.outcome_for(j);
    if (k < 0 || fact.outcome_families()[static_cast<std::size_t>(k)] != Family::linear)
        throw Error("rejection step needs a linear outcome model for '" + fact.schema()[j].name + "'");
    const auto uk = static_cast<std::size_t>(k);
    std::vector<double> x;
    design_row(fact.outcomes()[uk], row, x);
    const double mean = linear_predictor(params.outcome_coef[uk], x);
    const double y = row.values[j];
    const double proposal = mean + params.outcome_sd[uk] * standard_normal(rng);
    const double log_a = log_acceptance(fact, params, row, j, y, proposal, rule);
    const double u = uniform01(rng);
    if (log_a >= 0.0 || std::log(u) <= log_a) row.values[j] = proposal;
    return row.values[j];
}

int emitted_count(const GibbsConfig& config) {
    if (config.thin < 1 || config.iterations <= config.burn_in || config.burn_in < 0) return 0;
    return (config.iterations - config.burn_in) / config.thin;
}

GibbsParams draw_params(const ConditionalFactorization& fact, const CompletedDataset& data,
                        Rng& rng, std::vector<FittedGlm>* warm) {
    std::vector<std::size_t> rows(data.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    const std::size_t no = fact.outcomes().size();
    const std::size_t nr = fact.responses().size();
    const bool use_warm = warm && warm->size() == no + nr;
    std::vector<FittedGlm> fitted(no + nr);

    GibbsParams p;
    p.outcome_coef.resize(no);
    p.outcome_sd.assign(no, 1.0);
    p.response_coef.resize(nr);
    for (std::size_t k = 0; k < no; ++k) {
        FitOptions opt;
        if (use_warm) opt.start = &(*warm)[k].coefficients;
        fitted[k] = fit(data, rows, fact.outcomes()[k], opt);
        p.outcome_coef[k] = draw_coefficients(fitted[k], rng);
        if (fitted[k].family == Family::linear) p.outcome_sd[k] = draw_residual_sd(fitted[k], rng);
    }
    for (std::size_t k = 0; k < nr; ++k) {
        const auto& d = fact.responses()[k];
        FitOptions opt;
        if (use_warm) opt.start = &(*warm)[no + k].coefficients;
        const MatrixXd X = d.matrix(data, rows);
        const VectorXd y = indicator_vector(data, rows, d.response());
        try {
            fitted[no + k] = fit_glm(X, y, Family::logistic, 2, opt);
        } catch (const GlmError& e) {
            throw GlmError("fitting response model for '" + fact.schema()[d.response()].name +
                           "': " + e.what());
        }
        p.response_coef[k] = draw_coefficients(fitted[no + k], rng);
    }
    if (warm) *warm = std::move(fitted);
    return p;
}

std::vector<CompletedDataset> run_gibbs_item(const SurveyTable& table,
                                             const ConditionalFactorization& fact,
                                             const GibbsConfig& config, Rng& rng,
                                             const CompletedDataset* start) {
    if (config.iterations <= config.burn_in)
        throw Error("gibbs: iterations must exceed burn-in");
    if (config.thin < 1) throw Error("gibbs: thin must be at least 1");

    CompletedDataset data;
    if (start) {
        data = *start;
    } else {
        data = CompletedDataset::from_table(table, table.respondent_rows());
        std::vector<std::size_t> all(data.rows());
        std::iota(all.begin(), all.end(), std::size_t{0});
        initialise_from_observed(data, all, rng);
    }

    // Cells to update, grouped by variable in schema order.
    std::vector<std::pair<std::size_t, std::vector<std::size_t>>> targets;
    for (std::size_t j = 0; j < data.cols(); ++j) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < data.rows(); ++i)
            if (data.imputed(j, i)) rows.push_back(i);
        if (rows.empty()) continue;
        if (fact.outcome_for(j) < 0)
            throw Error("gibbs: '" + data.schema()[j].name + "' has missing items but no outcome model");
        targets.emplace_back(j, std::move(rows));
    }

    std::vector<CompletedDataset> out;
    out.reserve(static_cast<std::size_t>(emitted_count(config)));
    std::vector<FittedGlm> warm;
    for (int t = 1; t <= config.iterations; ++t) {
        if (!targets.empty()) {
            const GibbsParams params = draw_params(fact, data, rng, &warm);
            for (const auto& [j, rows] : targets) {
                const auto& spec = data.schema()[j];
                for (std::size_t i : rows) {
                    RowState row = row_state(data, i);
                    if (spec.is_categorical()) {
                        const auto pmf = conditional_pmf_discrete(fact, params, row, j);
                        data.impute(j, i, spec.code_of(static_cast<int>(categorical(rng, pmf))));
                    } else {
                        data.impute(j, i, rejection_step_continuous(fact, params, row, j, rng, config.rule));
                    }
                }
            }
        }
        if (t > config.burn_in && (t - config.burn_in) % config.thin == 0) out.push_back(data);
    }
    return out;
}

}  // namespace mdam
