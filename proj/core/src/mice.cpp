#include "mdam/mice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "mdam/glm.hpp"
#include "mdam/parallel.hpp"

namespace mdam {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string_view to_string(Imputer imputer) {
    switch (imputer) {
        case Imputer::logistic: return "logistic";
        case Imputer::multinomial: return "multinomial";
        case Imputer::linear_normal: return "linear-normal";
        case Imputer::pmm: return "pmm";
    }
    return "unknown";
}

Imputer parse_imputer(std::string_view text) {
    if (text == "logistic" || text == "logreg") return Imputer::logistic;
    if (text == "multinomial" || text == "polyreg") return Imputer::multinomial;
    if (text == "linear-normal" || text == "norm") return Imputer::linear_normal;
    if (text == "pmm") return Imputer::pmm;
    throw ParseError("unknown imputer '" + std::string(text) + "'");
}

Imputer default_imputer(const VariableSpec& spec) {
    switch (family_for(spec)) {
        case Family::logistic: return Imputer::logistic;
        case Family::multinomial: return Imputer::multinomial;
        case Family::linear: return Imputer::pmm;
    }
    return Imputer::pmm;
}

std::vector<std::string> default_visit_sequence(const SurveyTable& table) {
    std::vector<std::pair<std::size_t, std::size_t>> counts;
    for (std::size_t j = 0; j < table.cols(); ++j) {
        const std::size_t c = table.item_missing_count(j);
        if (c > 0) counts.emplace_back(c, j);
    }
    std::stable_sort(counts.begin(), counts.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::string> out;
    for (const auto& [c, j] : counts) out.push_back(table.schema()[j].name);
    return out;
}

std::vector<MiceStep> plan_mice(const SurveyTable& table, const MiceConfig& config) {
    const Schema& schema = table.schema();
    if (config.datasets < 1) throw Error("mice: number of datasets must be at least 1");
    if (config.cycles < 1) throw Error("mice: number of cycles must be at least 1");
    if (config.pmm_donors < 1) throw Error("mice: pmm donor count k must be at least 1");

    std::vector<std::string> sequence =
        config.visit_sequence.empty() ? default_visit_sequence(table) : config.visit_sequence;

    std::set<std::size_t> listed;
    for (const auto& name : sequence) {
        const std::size_t j = schema.index_of(name);
        if (!listed.insert(j).second) throw Error("mice: '" + name + "' appears twice in the visit sequence");
    }
    std::vector<std::size_t> with_missing;
    for (std::size_t j = 0; j < schema.size(); ++j)
        if (table.item_missing_count(j) > 0) {
            with_missing.push_back(j);
            if (!listed.count(j))
                throw Error("mice: '" + schema[j].name + "' has missing items but is not in the visit sequence");
        }

    std::vector<MiceStep> plan;
    for (const auto& name : sequence) {
        const std::size_t j = schema.index_of(name);
        if (table.item_missing_count(j) == 0) continue;
        const auto& spec = schema[j];
        MiceStep step;
        step.var = j;
        auto imp = config.imputers.find(name);
        step.imputer = imp != config.imputers.end() ? imp->second : default_imputer(spec);
        const Family fam = family_for(spec);
        const bool ok = (step.imputer == Imputer::logistic && fam == Family::logistic) ||
                        (step.imputer == Imputer::multinomial && spec.is_categorical()) ||
                        ((step.imputer == Imputer::linear_normal || step.imputer == Imputer::pmm) &&
                         fam == Family::linear);
        if (!ok)
            throw Error("mice: imputer '" + std::string(to_string(step.imputer)) +
                        "' does not fit variable '" + name + "'");

        DesignSpec ds;
        ds.response = name;
        if (auto pr = config.predictors.find(name); pr != config.predictors.end()) {
            ds.terms = pr->second;
        } else {
            for (std::size_t t = 0; t < schema.size(); ++t)
                if (t != j) ds.terms.push_back(Term::main(schema[t].name));
            if (config.include_response_indicators)
                for (std::size_t t : with_missing)
                    if (t != j) ds.terms.push_back(Term::response(schema[t].name));
        }
        step.design = ResolvedDesign(schema, ds);
        plan.push_back(std::move(step));
    }
    return plan;
}

void initialise_from_observed(CompletedDataset& data, std::span<const std::size_t> rows, Rng& rng) {
    for (std::size_t j = 0; j < data.cols(); ++j) {
        std::vector<double> observed;
        std::vector<std::size_t> targets;
        for (std::size_t i : rows) {
            if (data.imputed(j, i))
                targets.push_back(i);
            else
                observed.push_back(data.value(j, i));
        }
        if (targets.empty()) continue;
        if (observed.empty())
            throw Error("mice: variable '" + data.schema()[j].name + "' has no observed values");
        for (std::size_t i : targets) data.impute(j, i, observed[uniform_index(rng, observed.size())]);
    }
}

namespace {

// Pseudo-observations for categorical imputation models: for each predictor
// column and response level, two records at the column mean +/- half a
// standard deviation (other columns at their means), total weight p+1.
// An intercept-only model gets one record per level, total weight 1.
void augment(MatrixXd& X, VectorXd& y, VectorXd& w, int levels, const ResolvedDesign& design) {
    const Eigen::Index n = X.rows();
    const Eigen::Index cols = X.cols();
    std::vector<Eigen::Index> predictors;
    for (Eigen::Index c = 0; c < cols; ++c)
        if (design.columns()[static_cast<std::size_t>(c)].kind != DesignColumn::Kind::intercept)
            predictors.push_back(c);
    const Eigen::Index p = static_cast<Eigen::Index>(predictors.size());
    const Eigen::Index extra = p == 0 ? levels : 2 * p * levels;
    const double wt = static_cast<double>(p + 1) / static_cast<double>(extra);

    const VectorXd mean = X.colwise().mean();
    VectorXd sd(cols), lo(cols), hi(cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        const double var = n > 1 ? (X.col(c).array() - mean(c)).square().sum() / double(n - 1) : 0.0;
        sd(c) = std::sqrt(var);
        lo(c) = X.col(c).minCoeff();
        hi(c) = X.col(c).maxCoeff();
    }

    X.conservativeResize(n + extra, Eigen::NoChange);
    y.conservativeResize(n + extra);
    w = VectorXd::Ones(n + extra);
    Eigen::Index r = n;
    if (p == 0) {
        for (int l = 0; l < levels; ++l, ++r) {
            X.row(r) = mean.transpose();
            y(r) = l;
            w(r) = wt;
        }
        return;
    }
    for (Eigen::Index c : predictors)
        for (int l = 0; l < levels; ++l)
            for (double sign : {0.5, -0.5}) {
                X.row(r) = mean.transpose();
                X(r, c) = std::clamp(mean(c) + sign * sd(c), lo(c), hi(c));
                y(r) = l;
                w(r) = wt;
                ++r;
            }
}

void impute_step(CompletedDataset& data, std::span<const std::size_t> rows, const MiceStep& step,
                 const MiceConfig& config, Rng& rng) {
    const std::size_t j = step.var;
    const auto& spec = data.schema()[j];
    std::vector<std::size_t> obs, mis;
    for (std::size_t i : rows) (data.imputed(j, i) ? mis : obs).push_back(i);
    if (mis.empty()) return;
    if (obs.empty()) throw Error("mice: variable '" + spec.name + "' has no observed values");

    MatrixXd X = step.design.matrix(data, obs);
    VectorXd y = response_vector(data, obs, j);
    const MatrixXd Xmis = step.design.matrix(data, mis);
    const std::size_t p = step.design.width();

    FittedGlm model;
    try {
        if (step.imputer == Imputer::logistic || step.imputer == Imputer::multinomial) {
            FitOptions opt;
            VectorXd w;
            if (config.augment) {
                augment(X, y, w, spec.level_count(), step.design);
                opt.weights = &w;
            }
            model = fit_glm(X, y, family_for(spec), spec.level_count(), opt);
        } else {
            model = fit_glm(X, y, Family::linear, 0);
        }
    } catch (const GlmError& e) {
        throw GlmError("mice: imputation model for '" + spec.name + "': " + e.what());
    }

    const VectorXd beta = draw_coefficients(model, rng);
    switch (step.imputer) {
        case Imputer::logistic:
        case Imputer::multinomial: {
            std::vector<double> x(p);
            for (std::size_t r = 0; r < mis.size(); ++r) {
                for (std::size_t c = 0; c < p; ++c)
                    x[c] = Xmis(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
                const auto probs = predict(model, beta, x);
                const std::size_t level = categorical(rng, probs);
                data.impute(j, mis[r], spec.code_of(static_cast<int>(level)));
            }
            break;
        }
        case Imputer::linear_normal: {
            const double sd = draw_residual_sd(model, rng);
            const VectorXd mu = Xmis * beta;
            for (std::size_t r = 0; r < mis.size(); ++r)
                data.impute(j, mis[r], mu(static_cast<Eigen::Index>(r)) + sd * standard_normal(rng));
            break;
        }
        case Imputer::pmm: {
            const VectorXd donor_pred = X * model.coefficients;
            const VectorXd target_pred = Xmis * beta;
            std::vector<double> donor_values(obs.size());
            for (std::size_t r = 0; r < obs.size(); ++r) donor_values[r] = data.value(j, obs[r]);
            const auto values = impute_pmm(
                std::span<const double>(donor_pred.data(), obs.size()), donor_values,
                std::span<const double>(target_pred.data(), mis.size()), config.pmm_donors, rng);
            for (std::size_t r = 0; r < mis.size(); ++r) data.impute(j, mis[r], values[r]);
            break;
        }
    }
}

}  // namespace

void mice_sweep(CompletedDataset& data, std::span<const std::size_t> rows,
                const std::vector<MiceStep>& plan, const MiceConfig& config, Rng& rng) {
    for (const auto& step : plan) impute_step(data, rows, step, config, rng);
}

CompletedDataset run_mice_chain(const SurveyTable& table, const std::vector<MiceStep>& plan,
                                const MiceConfig& config, int cycles, Rng& rng) {
    const auto resp = table.respondent_rows();
    CompletedDataset data = CompletedDataset::from_table(table, resp);
    std::vector<std::size_t> rows(data.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    initialise_from_observed(data, rows, rng);
    for (int c = 0; c < cycles; ++c) mice_sweep(data, rows, plan, config, rng);
    return data;
}

std::vector<CompletedDataset> run_mice(const SurveyTable& table, const MiceConfig& config, Rng& rng) {
    const auto plan = plan_mice(table, config);
    const std::size_t L = static_cast<std::size_t>(config.datasets);
    std::vector<Rng> streams;
    streams.reserve(L);
    for (std::size_t l = 0; l < L; ++l) streams.push_back(split(rng));
    std::vector<CompletedDataset> out(L);
    parallel_for(L, config.threads, [&](std::size_t l) {
        out[l] = run_mice_chain(table, plan, config, config.cycles, streams[l]);
    });
    return out;
}

std::vector<double> impute_pmm(std::span<const double> donor_predictions,
                               std::span<const double> donor_values,
                               std::span<const double> target_predictions, int k, Rng& rng) {
    const std::size_t n = donor_predictions.size();
    if (n == 0) throw Error("pmm: empty donor set");
    if (donor_values.size() != n) throw Error("pmm: donor prediction/value length mismatch");
    if (k < 1) throw Error("pmm: k must be at least 1");
    const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), n);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return donor_predictions[a] < donor_predictions[b]; });
    std::vector<double> sorted(n);
    for (std::size_t r = 0; r < n; ++r) sorted[r] = donor_predictions[order[r]];

    std::vector<double> out(target_predictions.size());
    std::vector<std::size_t> inner, boundary;
    constexpr double inf = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < target_predictions.size(); ++t) {
        const double target = target_predictions[t];
        const std::size_t pos = static_cast<std::size_t>(
            std::lower_bound(sorted.begin(), sorted.end(), target) - sorted.begin());
        // Walk outward to find the distance of the k-th nearest donor.
        std::ptrdiff_t lo = static_cast<std::ptrdiff_t>(pos) - 1;
        std::size_t hi = pos;
        double dk = 0.0;
        for (std::size_t taken = 0; taken < kk; ++taken) {
            const double dl = lo >= 0 ? target - sorted[static_cast<std::size_t>(lo)] : inf;
            const double dh = hi < n ? sorted[hi] - target : inf;
            if (dl <= dh) {
                dk = dl;
                --lo;
            } else {
                dk = dh;
                ++hi;
            }
        }
        // Widen to every donor at exactly the boundary distance.
        while (lo >= 0 && target - sorted[static_cast<std::size_t>(lo)] <= dk) --lo;
        while (hi < n && sorted[hi] - target <= dk) ++hi;
        inner.clear();
        boundary.clear();
        for (std::size_t r = static_cast<std::size_t>(lo + 1); r < hi; ++r) {
            const double d = std::abs(sorted[r] - target);
            (d < dk ? inner : boundary).push_back(r);
        }
        const std::size_t pick = uniform_index(rng, kk);
        const std::size_t r = pick < inner.size() ? inner[pick] : boundary[uniform_index(rng, boundary.size())];
        out[t] = donor_values[order[r]];
    }
    return out;
}

}  // namespace mdam
