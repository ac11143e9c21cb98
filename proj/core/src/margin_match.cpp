#include "mdam/margin_match.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace mdam {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MarginChain::MarginChain(const Schema& schema, const std::vector<DesignSpec>& links) {
    std::set<std::size_t> earlier;
    for (const auto& spec : links) {
        ResolvedDesign d(schema, spec);
        const std::size_t j = d.response();
        if (!schema[j].is_categorical())
            throw Error("margin chain: '" + schema[j].name + "' is continuous");
        if (earlier.count(j)) throw Error("margin chain: '" + schema[j].name + "' appears twice");
        for (const auto& col : d.columns()) {
            using K = DesignColumn::Kind;
            if (col.kind == K::response)
                throw Error("margin chain: model for '" + schema[j].name + "' uses a response indicator");
            if (col.kind == K::intercept) continue;
            const bool ok = earlier.count(col.var) &&
                            (col.kind != K::indicator_product || earlier.count(col.var2));
            if (!ok)
                throw Error("margin chain: model for '" + schema[j].name + "' term '" + col.label +
                            "' must use earlier chain variables only");
        }
        earlier.insert(j);
        links_.push_back(std::move(d));
    }
}

MarginChain MarginChain::sequential(const Schema& schema, const std::vector<std::string>& variables) {
    std::vector<DesignSpec> links;
    for (std::size_t k = 0; k < variables.size(); ++k) {
        DesignSpec s;
        s.response = variables[k];
        for (std::size_t t = 0; t < k; ++t) s.terms.push_back(Term::main(variables[t]));
        links.push_back(std::move(s));
    }
    return MarginChain(schema, links);
}

std::vector<std::string> MarginChain::variables(const Schema& schema) const {
    std::vector<std::string> out;
    for (const auto& d : links_) out.push_back(schema[d.response()].name);
    return out;
}

std::string_view to_string(WeightMode mode) {
    switch (mode) {
        case WeightMode::design_known: return "design-known";
        case WeightMode::adjusted: return "adjusted";
    }
    return "unknown";
}

WeightMode parse_weight_mode(std::string_view text) {
    if (text == "design-known" || text == "design") return WeightMode::design_known;
    if (text == "adjusted") return WeightMode::adjusted;
    throw ParseError("unknown weight mode '" + std::string(text) + "'");
}

std::vector<double> build_weights(const SurveyTable& table, WeightMode mode,
                                  std::optional<double> population_size) {
    const std::size_t n = table.rows();
    std::vector<double> w(table.weights().begin(), table.weights().end());
    std::size_t n_u = 0;
    double resp_total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (table.unit_nonrespondent(i)) {
            ++n_u;
        } else {
            if (!table.weight_known(i)) throw Error("build_weights: respondent row " + std::to_string(i) + " has no weight");
            resp_total += w[i];
        }
    }
    switch (mode) {
        case WeightMode::design_known: {
            if (n_u == 0) return w;
            if (!population_size) throw Error("build_weights: design-known weights need the population size");
            const double remaining = *population_size - resp_total;
            if (remaining < 0.0)
                throw Error("build_weights: respondent weights sum to " + format_number(resp_total) +
                            ", more than the population size " + format_number(*population_size));
            const double each = remaining / double(n_u);
            for (std::size_t i = 0; i < n; ++i)
                if (table.unit_nonrespondent(i)) w[i] = each;
            return w;
        }
        case WeightMode::adjusted: {
            const double shrink = 1.0 - double(n_u) / double(n);
            const double each = resp_total / double(n);
            for (std::size_t i = 0; i < n; ++i) w[i] = table.unit_nonrespondent(i) ? each : w[i] * shrink;
            return w;
        }
    }
    return w;
}

AuxiliaryMargins calibrate_v(const CompletedDataset& completed, const AuxiliaryMargins& margins,
                             SamplingDesign design, bool all) {
    if (!completed.complete()) throw Error("calibrate_v: completed dataset has unfilled cells");
    const Schema& schema = completed.schema();
    AuxiliaryMargins out = margins;
    std::vector<double> z(completed.rows());
    for (auto& e : out.entries) {
        if (!e.calibrate && !all) continue;
        const auto col = completed.column(schema.index_of(e.variable));
        for (std::size_t i = 0; i < z.size(); ++i) z[i] = col[i] == double(e.level) ? 1.0 : 0.0;
        e.variance = ht_total(z, completed.weights(), design).variance;
        e.calibrate = false;
    }
    return out;
}

PlausibleTotalDraw draw_targets(const VariableSpec& spec, const AuxiliaryMargins& margins,
                                double population_size, std::span<const double> respondent_totals,
                                double nonrespondent_weight, std::size_t n_nonrespondents, Rng& rng,
                                double floor) {
    if (n_nonrespondents == 0) throw Error("draw_targets: no unit nonrespondents");
    if (!spec.is_categorical()) throw Error("draw_targets: '" + spec.name + "' is continuous");
    const int m = spec.level_count();
    if (respondent_totals.size() != static_cast<std::size_t>(m))
        throw Error("draw_targets: respondent totals for '" + spec.name + "' have the wrong length");
    if (!(nonrespondent_weight > 0.0)) throw Error("draw_targets: nonrespondent weight must be positive");

    std::vector<const MarginEntry*> by_level(static_cast<std::size_t>(m), nullptr);
    std::size_t listed = 0;
    for (const MarginEntry* e : margins.for_variable(spec.name)) {
        const int l = spec.level_index(e->level);
        if (l < 0) throw Error("draw_targets: level " + std::to_string(e->level) + " of '" + spec.name + "'");
        if (e->calibrate) throw Error("draw_targets: variance of '" + spec.name + "' not calibrated yet");
        by_level[static_cast<std::size_t>(l)] = e;
        ++listed;
    }
    if (listed + 1 < static_cast<std::size_t>(m))
        throw Error("draw_targets: '" + spec.name + "' needs totals for at least m-1 levels");
    // The level whose total is implied by the population size.
    std::size_t rest = 0;
    if (listed < static_cast<std::size_t>(m))
        while (by_level[rest]) ++rest;

    PlausibleTotalDraw draw;
    draw.variable = spec.name;
    draw.levels.resize(static_cast<std::size_t>(m));
    double drawn_sum = 0.0;
    for (std::size_t l = 0; l < by_level.size(); ++l) {
        draw.levels[l].level = static_cast<int>(spec.code_of(static_cast<int>(l)));
        if (l == rest) continue;
        const MarginEntry* e = by_level[l];
        const double sd = std::sqrt(std::max(e->variance, 0.0));
        draw.levels[l].drawn_total = e->total + sd * standard_normal(rng);
        drawn_sum += draw.levels[l].drawn_total;
    }
    draw.levels[rest].drawn_total = population_size - drawn_sum;

    const double nu = double(n_nonrespondents);
    const double mean_weight = nonrespondent_weight / nu;
    double total = 0.0;
    for (std::size_t l = 0; l < draw.levels.size(); ++l) {
        auto& t = draw.levels[l];
        t.count = (t.drawn_total - respondent_totals[l]) / mean_weight;
        t.proportion = std::clamp(t.count / nu, floor, 1.0 - floor);
        total += t.proportion;
    }
    for (auto& t : draw.levels) t.proportion /= total;
    return draw;
}

std::vector<double> solve_theta(const MatrixXd& X, const VectorXd& coef, Family family, int levels,
                                std::span<const double> proportions) {
    if (X.rows() == 0) throw Error("solve_theta: no rows");
    const Eigen::Index p = X.cols();
    auto mean_eta = [&](Eigen::Index block) {
        return (X * coef.segment(block * p, p)).mean();
    };
    switch (family) {
        case Family::logistic:
            if (proportions.size() != 2) throw Error("solve_theta: binary target needs 2 proportions");
            return {logit(proportions[1]) - mean_eta(0)};
        case Family::multinomial: {
            if (proportions.size() != static_cast<std::size_t>(levels))
                throw Error("solve_theta: proportion vector has the wrong length");
            std::vector<double> theta(static_cast<std::size_t>(levels - 1));
            for (int e = 1; e < levels; ++e)
                theta[static_cast<std::size_t>(e - 1)] =
                    std::log(proportions[static_cast<std::size_t>(e)] / proportions[0]) - mean_eta(e - 1);
            return theta;
        }
        case Family::linear: break;
    }
    throw Error("solve_theta: continuous margin variable");
}

std::vector<MarginStepTrace> impute_margin_vars(CompletedDataset& data, const MarginChain& chain,
                                                const AuxiliaryMargins& margins,
                                                double population_size, UnitStrategy strategy,
                                                Rng& rng) {
    const auto nr = data.nonrespondent_rows();
    if (nr.empty()) return {};
    std::vector<std::size_t> resp;
    for (std::size_t i = 0; i < data.rows(); ++i)
        if (!data.unit_nonrespondent(i)) resp.push_back(i);
    if (resp.empty()) throw Error("intercept matching: no unit respondents");
    const auto w = data.weights();
    double nr_weight = 0.0;
    for (std::size_t i : nr) nr_weight += w[i];

    std::vector<MarginStepTrace> trace;
    for (const auto& link : chain.links()) {
        const std::size_t j = link.response();
        const auto& spec = data.schema()[j];
        const int m = spec.level_count();
        const FittedGlm model = fit(data, resp, link);
        const VectorXd omega = draw_coefficients(model, rng);
        const MatrixXd X = link.matrix(data, nr);

        MarginStepTrace step;
        step.variable = spec.name;
        step.theta.assign(static_cast<std::size_t>(m - 1), 0.0);
        if (strategy == UnitStrategy::intercept_matching && !margins.for_variable(spec.name).empty()) {
            std::vector<double> totals(static_cast<std::size_t>(m), 0.0);
            for (std::size_t i : resp) {
                const int l = spec.level_index(data.value(j, i));
                if (l < 0) throw Error("intercept matching: respondent value of '" + spec.name + "' is not a level");
                totals[static_cast<std::size_t>(l)] += w[i];
            }
            step.targets = draw_targets(spec, margins, population_size, totals, nr_weight, nr.size(), rng);
            std::vector<double> props;
            for (const auto& t : step.targets.levels) props.push_back(t.proportion);
            step.theta = solve_theta(X, omega, model.family, m, props);
        }

        const Eigen::Index p = X.cols();
        std::vector<double> probs(static_cast<std::size_t>(m));
        for (std::size_t r = 0; r < nr.size(); ++r) {
            const auto row = X.row(static_cast<Eigen::Index>(r));
            if (model.family == Family::logistic) {
                const double p1 = inv_logit(row.dot(omega) + step.theta[0]);
                probs = {1.0 - p1, p1};
            } else {
                std::vector<double> eta(static_cast<std::size_t>(m), 0.0);
                for (int e = 1; e < m; ++e)
                    eta[static_cast<std::size_t>(e)] =
                        row.dot(omega.segment((e - 1) * p, p)) + step.theta[static_cast<std::size_t>(e - 1)];
                const double top = *std::max_element(eta.begin(), eta.end());
                for (int e = 0; e < m; ++e)
                    probs[static_cast<std::size_t>(e)] = std::exp(eta[static_cast<std::size_t>(e)] - top);
            }
            data.impute(j, nr[r], spec.code_of(static_cast<int>(categorical(rng, probs))));
        }
        trace.push_back(std::move(step));
    }
    return trace;
}

}  // namespace mdam
