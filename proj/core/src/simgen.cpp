#include "mdam/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace mdam {

namespace {

constexpr std::size_t kVars = 6;

std::vector<ItemNonresponseModel> appendix_b_item_models() {
    const std::vector<double> without_x6{-1.4, 0.1, 0.1, 0.1, 0.1, 0.0};
    const std::vector<double> all{-1.4, 0.1, 0.1, 0.1, 0.1, 0.1};
    return {{1, without_x6}, {2, without_x6}, {3, without_x6}, {5, all}};
}

// Intercept shift that makes the mean of inv_logit(shift + eta) equal `target`.
double match_mean(const std::vector<double>& eta, double target) {
    auto mean = [&](double shift) {
        double s = 0.0;
        for (double e : eta) s += inv_logit(shift + e);
        return s / double(eta.size());
    };
    double lo = -30.0, hi = 30.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (mean(mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

SimulationConfig SimulationConfig::appendix_b(double theta1) {
    SimulationConfig c;
    c.theta1 = theta1;
    c.item_nonresponse = appendix_b_item_models();
    return c;
}

SimulationConfig& SimulationConfig::full_scale() {
    population_size = 3373378;
    expected_sample_size = 6000.0;
    return *this;
}

SchemaPtr simulation_schema() {
    return std::make_shared<const Schema>(
        std::vector<VariableSpec>{VariableSpec::binary("X1", true), VariableSpec::binary("X2", true),
                                  VariableSpec::binary("X3"), VariableSpec::binary("X4"),
                                  VariableSpec::continuous("X5"), VariableSpec::continuous("X6")},
        "w");
}

Population generate_population(const SimulationConfig& config, Rng& rng) {
    const std::size_t N = config.population_size;
    if (N < 1) throw Error("simulation: population size must be at least 1");
    if (!(config.sigma5 > 0.0) || !(config.sigma6 > 0.0)) throw Error("simulation: sigma must be positive");
    if (!(config.expected_sample_size > 0.0) || config.expected_sample_size > double(N))
        throw Error("simulation: expected sample size must lie in (0, N]");

    Population pop;
    pop.u.resize(N);
    pop.z.resize(N);
    pop.w.resize(N);
    pop.pi.resize(N);
    for (auto& col : pop.x) col.resize(N);

    // Size variable: log-normal shape scaled so the inclusion probabilities
    // sum to the expected sample size; weights below 1 are raised to 1.
    std::vector<double> shape(N);
    for (auto& g : shape) g = std::exp(config.size_log_sd * standard_normal(rng));
    std::vector<bool> capped(N, false);
    double scale = 1.0;
    for (int pass = 0; pass < 100; ++pass) {
        double free_inv = 0.0;
        std::size_t n_capped = 0;
        for (std::size_t i = 0; i < N; ++i) {
            if (capped[i])
                ++n_capped;
            else
                free_inv += 1.0 / shape[i];
        }
        const double budget = config.expected_sample_size - double(n_capped);
        if (budget <= 0.0) throw Error("simulation: cannot reach the expected sample size");
        scale = free_inv / budget;
        bool changed = false;
        for (std::size_t i = 0; i < N; ++i)
            if (!capped[i] && scale * shape[i] < 1.0) capped[i] = changed = true;
        if (!changed) break;
    }
    for (std::size_t i = 0; i < N; ++i) {
        pop.w[i] = capped[i] ? 1.0 : scale * shape[i];
        pop.z[i] = pop.w[i] / 10.0;
        pop.pi[i] = 1.0 / pop.w[i];
        if (!(pop.pi[i] > 0.0 && pop.pi[i] <= 1.0)) throw Error("simulation: inclusion probability out of (0,1]");
    }

    const auto& o1 = config.omega1;
    const auto& o2 = config.omega2;
    const auto& o3 = config.omega3;
    const auto& o4 = config.omega4;
    const auto& o5 = config.omega5;
    const auto& o6 = config.omega6;
    for (std::size_t i = 0; i < N; ++i) {
        const double u = bernoulli(rng, inv_logit(config.nu0)) ? 1.0 : 0.0;
        pop.u[i] = static_cast<std::uint8_t>(u);
        const double x1 = bernoulli(rng, inv_logit(o1[0] + o1[1] * pop.w[i] + config.theta1 * u)) ? 1.0 : 0.0;
        const double x2 = bernoulli(rng, inv_logit(o2[0] + o2[1] * x1 + config.theta2 * u)) ? 1.0 : 0.0;
        const double x3 = bernoulli(rng, inv_logit(o3[0] + o3[1] * x1 + o3[2] * x2)) ? 1.0 : 0.0;
        const double x4 = bernoulli(rng, inv_logit(o4[0] + o4[1] * x1 + o4[2] * x2 + o4[3] * x3)) ? 1.0 : 0.0;
        const double x5 = o5[0] + o5[1] * x1 + o5[2] * x2 + o5[3] * x3 + o5[4] * x4 +
                          config.sigma5 * standard_normal(rng);
        const double x6 = o6[0] + o6[1] * x1 + o6[2] * x2 + o6[3] * x3 + o6[4] * x4 + o6[5] * x5 +
                          config.sigma6 * standard_normal(rng);
        pop.x[0][i] = x1;
        pop.x[1][i] = x2;
        pop.x[2][i] = x3;
        pop.x[3][i] = x4;
        pop.x[4][i] = x5;
        pop.x[5][i] = x6;
    }
    return pop;
}

std::vector<std::size_t> draw_poisson_sample(const Population& pop, Rng& rng) {
    std::vector<std::size_t> units;
    for (std::size_t i = 0; i < pop.size(); ++i)
        if (bernoulli(rng, pop.pi[i])) units.push_back(i);
    return units;
}

SurveyTable sample_table(const Population& pop, std::span<const std::size_t> units) {
    SurveyTable::Columns c;
    c.values.assign(kVars, std::vector<double>(units.size()));
    c.item_mask.assign(kVars, std::vector<std::uint8_t>(units.size(), 0));
    c.unit_flag.assign(units.size(), 0);
    c.weights.resize(units.size());
    for (std::size_t r = 0; r < units.size(); ++r) {
        const std::size_t i = units[r];
        for (std::size_t j = 0; j < kVars; ++j) c.values[j][r] = pop.x[j][i];
        c.weights[r] = pop.w[i];
    }
    return SurveyTable(simulation_schema(), std::move(c), double(pop.size()));
}

std::array<double, 4> unit_nr_cell_probabilities(const Population& pop) {
    std::array<double, 4> count{}, nonresp{};
    for (std::size_t i = 0; i < pop.size(); ++i) {
        const std::size_t cell = 2 * static_cast<std::size_t>(pop.x[0][i]) + static_cast<std::size_t>(pop.x[1][i]);
        count[cell] += 1.0;
        nonresp[cell] += pop.u[i];
    }
    std::array<double, 4> p{};
    for (std::size_t c = 0; c < 4; ++c) {
        if (count[c] == 0.0)
            throw Error("simulation: population has no units with (X1, X2) = (" + std::to_string(c / 2) + ", " +
                        std::to_string(c % 2) + ")");
        p[c] = nonresp[c] / count[c];
    }
    return p;
}

SurveyTable inject_unit_nonresponse(const SurveyTable& sample, const std::array<double, 4>& cell_probs,
                                    Rng& rng) {
    const Schema& schema = sample.schema();
    const std::size_t x1 = schema.index_of("X1");
    const std::size_t x2 = schema.index_of("X2");
    auto c = sample.columns();
    for (std::size_t i = 0; i < sample.rows(); ++i) {
        if (sample.missing(x1, i) || sample.missing(x2, i))
            throw Error("inject_unit_nonresponse: sample must be fully observed");
        const std::size_t cell = 2 * static_cast<std::size_t>(sample.value(x1, i)) +
                                 static_cast<std::size_t>(sample.value(x2, i));
        const bool u = bernoulli(rng, cell_probs[cell]);
        c.unit_flag[i] = u ? 1 : 0;
        if (u)
            for (std::size_t j = 0; j < schema.size(); ++j) c.item_mask[j][i] = 1;
    }
    return SurveyTable(sample.schema_ptr(), std::move(c), sample.population_size());
}

SurveyTable inject_item_nonresponse(const SurveyTable& table,
                                    const std::vector<ItemNonresponseModel>& models, Rng& rng) {
    const std::size_t k = table.cols();
    for (const auto& m : models) {
        if (m.var >= k) throw Error("item nonresponse model for unknown variable");
        if (m.phi.size() != k) throw Error("item nonresponse model needs an intercept plus one coefficient per other variable");
    }
    auto c = table.columns();
    for (std::size_t i = 0; i < table.rows(); ++i) {
        if (table.unit_nonrespondent(i)) continue;
        for (std::size_t j = 0; j < k; ++j)
            if (table.missing(j, i)) throw Error("inject_item_nonresponse: respondent rows must be fully observed");
        for (const auto& m : models) {
            if (std::isinf(m.phi[0]) && m.phi[0] < 0.0) {
                (void)uniform01(rng);
                continue;
            }
            double eta = m.phi[0];
            std::size_t slot = 1;
            for (std::size_t t = 0; t < k; ++t)
                if (t != m.var) eta += m.phi[slot++] * table.value(t, i);
            if (bernoulli(rng, inv_logit(eta))) c.item_mask[m.var][i] = 1;
        }
    }
    return SurveyTable(table.schema_ptr(), std::move(c), table.population_size());
}

AuxiliaryMargins simulation_margins(const Population& pop) {
    double t1 = 0.0, t2 = 0.0;
    for (std::size_t i = 0; i < pop.size(); ++i) {
        t1 += pop.x[0][i];
        t2 += pop.x[1][i];
    }
    AuxiliaryMargins m;
    m.entries.push_back({"X1", 1, t1, 0.0, true});
    m.entries.push_back({"X2", 1, t2, 0.0, true});
    return m;
}

MarginChain simulation_chain(const Schema& schema) {
    return MarginChain::sequential(schema, {"X1", "X2"});
}

ConditionalFactorization simulation_factorization(const Schema& schema) {
    std::vector<DesignSpec> outcomes;
    const std::vector<std::string> names{"X1", "X2", "X3", "X4", "X5", "X6"};
    for (std::size_t j = 0; j < names.size(); ++j) {
        DesignSpec s;
        s.response = names[j];
        for (std::size_t t = 0; t < j; ++t) s.terms.push_back(Term::main(names[t]));
        outcomes.push_back(std::move(s));
    }
    // Response models of X2..X4 leave out X6, matching the generating values.
    std::vector<DesignSpec> responses;
    for (const std::string r : {"X2", "X3", "X4", "X6"}) {
        DesignSpec s;
        s.response = r;
        for (const auto& t : names)
            if (t != r && !(t == "X6" && r != "X6")) s.terms.push_back(Term::main(t));
        responses.push_back(std::move(s));
    }
    return ConditionalFactorization(schema, outcomes, responses);
}

std::vector<EstimandSpec> simulation_total_estimands() {
    std::vector<EstimandSpec> out;
    for (const char* t : {"T(X1=1)", "T(X2=1)", "T(X3=1)", "T(X4=1)", "T(X5)", "T(X6)"})
        out.push_back(parse_estimand(t));
    return out;
}

std::vector<EstimandSpec> simulation_probability_estimands() {
    std::vector<EstimandSpec> out;
    for (const char* t :
         {"P(X1=0|X2=0)", "P(X1=0|X2=1)", "P(X2=0|X1=0)", "P(X2=0|X1=1)", "P(X4=0|X3=0)",
          "P(X4=0|X3=1)", "P(X3=0|X4=0)", "P(X3=0|X4=1)", "P(X2=0,X3=0)", "P(X2=1,X3=0)",
          "P(X2=0,X3=1)", "P(X2=1,X3=1)", "P(X3=0|X1=0,X2=0)", "P(X3=0|X1=0,X2=1)",
          "P(X3=0|X1=1,X2=0)", "P(X3=0|X1=1,X2=1)", "P(X4=0|X1=0,X2=0)", "P(X4=0|X1=0,X2=1)",
          "P(X4=0|X1=1,X2=0)", "P(X4=0|X1=1,X2=1)"})
        out.push_back(parse_estimand(t));
    return out;
}

CompletedDataset population_dataset(const Population& pop) {
    std::vector<std::size_t> all(pop.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    CompletedDataset d = CompletedDataset::from_table(sample_table(pop, all));
    d.set_weights(std::vector<double>(pop.size(), 1.0));
    return d;
}

// --- voter-supplement-like data --------------------------------------------

SchemaPtr voter_schema() {
    return std::make_shared<const Schema>(
        std::vector<VariableSpec>{
            VariableSpec::binary("difficulty"),
            VariableSpec::categorical("employment", {"Employed", "Unemployed", "Not in labor force"}),
            VariableSpec::binary("sex", true),
            VariableSpec::categorical("race", {"White", "Black", "Hispanic", "Other"}, true),
            VariableSpec::categorical("marital", {"Married", "Single", "Other"}),
            VariableSpec::categorical("education", {"High school or less", "Some college", "Bachelor+"}),
            VariableSpec::continuous("age"),
            VariableSpec::binary("proxy"),
            VariableSpec::binary("duration"),
            VariableSpec::binary("vote", true),
            VariableSpec::categorical("income", {"<50k", "50k-100k", "100k+"}),
        },
        "weight");
}

SurveyTable generate_voter_like(const VoterSynthConfig& config, Rng& rng) {
    const std::size_t n = config.rows;
    if (n < 2 || config.unit_nonrespondents >= n) throw Error("voter synth: need 2+ rows and some respondents");
    auto schema = voter_schema();
    const std::size_t k = schema->size();
    SurveyTable::Columns c;
    c.values.assign(k, std::vector<double>(n));
    c.item_mask.assign(k, std::vector<std::uint8_t>(n, 0));
    c.unit_flag.assign(n, 0);
    c.weights.assign(n, 0.0);
    c.weight_known.assign(n, 1);
    auto& v = c.values;
    auto pick = [&](std::initializer_list<double> p) {
        return 1.0 + double(categorical(rng, std::vector<double>(p)));
    };

    std::vector<double> vote_eta(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double age = std::clamp(48.0 + 17.0 * standard_normal(rng), 18.0, 90.0);
        v[6][i] = std::round(age);
        v[2][i] = bernoulli(rng, 0.52) ? 1.0 : 0.0;
        v[3][i] = pick({0.699, 0.218, 0.039, 0.044});
        v[5][i] = v[3][i] == 1.0 ? pick({0.36, 0.31, 0.33}) : pick({0.45, 0.32, 0.23});
        v[4][i] = age < 30 ? pick({0.2, 0.7, 0.1}) : pick({0.58, 0.2, 0.22});
        v[1][i] = age > 65 ? pick({0.15, 0.02, 0.83}) : pick({0.7, 0.05, 0.25});
        v[0][i] = bernoulli(rng, inv_logit(-3.0 + 0.04 * (age - 18.0))) ? 1.0 : 0.0;
        v[10][i] = v[5][i] == 1.0 ? pick({0.6, 0.3, 0.1})
                 : v[5][i] == 2.0 ? pick({0.45, 0.38, 0.17})
                                  : pick({0.25, 0.4, 0.35});
        v[8][i] = bernoulli(rng, inv_logit(-1.0 + 0.04 * (age - 18.0))) ? 1.0 : 0.0;
        v[7][i] = bernoulli(rng, 0.25) ? 1.0 : 0.0;
        vote_eta[i] = 0.035 * (age - 48.0) + 0.25 * (v[5][i] == 2.0) + 0.6 * (v[5][i] == 3.0) -
                      0.5 * v[0][i] + 0.3 * (v[4][i] == 1.0);
    }
    const double vote_shift = match_mean(vote_eta, 0.49);
    std::vector<double> unit_eta(n);
    for (std::size_t i = 0; i < n; ++i) {
        v[9][i] = bernoulli(rng, inv_logit(vote_shift + vote_eta[i])) ? 1.0 : 0.0;
        unit_eta[i] = -0.9 * v[9][i] + 0.3 * (v[3][i] == 2.0) - 0.01 * (v[6][i] - 48.0);
    }
    const double unit_shift = match_mean(unit_eta, double(config.unit_nonrespondents) / double(n));

    // Design weights, then a respondent-only nonresponse adjustment scaled to N.
    std::vector<double> base(n);
    for (auto& b : base) b = std::exp(0.5 * standard_normal(rng));
    double resp_base = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (bernoulli(rng, inv_logit(unit_shift + unit_eta[i]))) {
            c.unit_flag[i] = 1;
            for (std::size_t j = 0; j < k; ++j) c.item_mask[j][i] = 1;
            c.weight_known[i] = 0;
        } else {
            resp_base += base[i];
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (!c.unit_flag[i]) c.weights[i] = base[i] * config.population_size / resp_base;

    // Item nonresponse rates in visit order; vote is skipped more by proxies.
    const std::array<double, 11> rate{0.0, 0.0, 0.001, 0.02, 0.025, 0.04, 0.045, 0.145, 0.16, 0.18, 0.27};
    for (std::size_t i = 0; i < n; ++i) {
        if (c.unit_flag[i]) continue;
        for (std::size_t j = 0; j < k; ++j) {
            double p = rate[j];
            if (j == 9) p = inv_logit(logit(rate[j]) + (v[7][i] == 1.0 ? 0.8 : -0.25));
            if (p > 0.0 && bernoulli(rng, p)) c.item_mask[j][i] = 1;
        }
    }
    return SurveyTable(schema, std::move(c), config.population_size);
}

}  // namespace mdam
