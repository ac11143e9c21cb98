#include "mdam/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace mdam {

using json = nlohmann::ordered_json;

namespace {

void check_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) throw ParseError(std::string(where) + ": expected an object");
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (auto a : allowed) ok = ok || key == a;
        if (!ok) throw ParseError(std::string(where) + ": unknown key '" + key + "'");
    }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    try {
        return it->template get<T>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("key '") + key + "': " + e.what());
    }
}

std::vector<std::string> string_list(const json& j, const char* key) {
    return get_or<std::vector<std::string>>(j, key, {});
}

VariableSpec parse_variable(const json& j) {
    check_keys(j, "variable", {"name", "kind", "levels", "margin"});
    const auto name = j.at("name").get<std::string>();
    const auto kind = parse_variable_kind(get_or<std::string>(j, "kind", "continuous"));
    const bool margin = get_or(j, "margin", false);
    switch (kind) {
        case VariableKind::binary: {
            auto v = VariableSpec::binary(name, margin);
            if (j.contains("levels") && j["levels"].is_array()) {
                v.levels = j["levels"].get<std::vector<std::string>>();
                if (v.levels.size() != 2) throw ParseError("binary variable '" + name + "' needs 2 labels");
            }
            return v;
        }
        case VariableKind::categorical: {
            std::vector<std::string> labels;
            const auto& lv = j.at("levels");
            if (lv.is_number_integer()) {
                for (int c = 1; c <= lv.get<int>(); ++c) labels.push_back(std::to_string(c));
            } else {
                labels = lv.get<std::vector<std::string>>();
            }
            if (labels.size() < 2) throw ParseError("categorical variable '" + name + "' needs 2+ levels");
            return VariableSpec::categorical(name, std::move(labels), margin);
        }
        case VariableKind::continuous:
            if (margin) throw ParseError("continuous variable '" + name + "' cannot carry a margin");
            return VariableSpec::continuous(name);
    }
    throw ParseError("bad variable kind");
}

MarginSpec parse_margin(const json& j) {
    check_keys(j, "margin", {"variable", "level", "total", "proportion", "variance", "sd"});
    MarginSpec m;
    m.variable = j.at("variable").get<std::string>();
    m.level = get_or(j, "level", 1);
    if (j.contains("total")) m.total = j["total"].get<double>();
    if (j.contains("proportion")) m.proportion = j["proportion"].get<double>();
    if (m.total.has_value() == m.proportion.has_value())
        throw ParseError("margin for '" + m.variable + "' needs exactly one of total and proportion");
    if (j.contains("variance") && j.contains("sd"))
        throw ParseError("margin for '" + m.variable + "' gives both variance and sd");
    if (j.contains("sd")) {
        const double sd = j["sd"].get<double>();
        m.variance = sd * sd;
    } else if (j.contains("variance")) {
        const auto& v = j["variance"];
        if (v.is_string()) {
            if (v.get<std::string>() != "calibrate")
                throw ParseError("margin variance must be a number or \"calibrate\"");
            m.calibrate = true;
        } else {
            m.variance = v.get<double>();
        }
    } else {
        m.calibrate = true;
    }
    return m;
}

DesignSpec parse_model(const json& j, std::string_view where) {
    check_keys(j, where, {"variable", "terms", "intercept"});
    DesignSpec s;
    s.response = j.at("variable").get<std::string>();
    s.terms = parse_terms(string_list(j, "terms"));
    s.intercept = get_or(j, "intercept", true);
    return s;
}

std::vector<DesignSpec> parse_models(const json& j, const char* key, std::string_view where) {
    std::vector<DesignSpec> out;
    if (auto it = j.find(key); it != j.end())
        for (const auto& m : *it) out.push_back(parse_model(m, where));
    return out;
}

json model_json(const DesignSpec& s) {
    json j;
    j["variable"] = s.response;
    json terms = json::array();
    for (const auto& t : s.terms) terms.push_back(t.to_string());
    j["terms"] = terms;
    if (!s.intercept) j["intercept"] = false;
    return j;
}

void parse_mice(const json& j, MiceConfig& mice) {
    check_keys(j, "mice", {"datasets", "cycles", "visit_sequence", "imputers", "predictors", "pmm_donors",
                           "response_indicators", "augment"});
    mice.datasets = get_or(j, "datasets", mice.datasets);
    mice.cycles = get_or(j, "cycles", mice.cycles);
    mice.visit_sequence = string_list(j, "visit_sequence");
    if (auto it = j.find("imputers"); it != j.end())
        for (const auto& [var, name] : it->items()) mice.imputers[var] = parse_imputer(name.get<std::string>());
    if (auto it = j.find("predictors"); it != j.end())
        for (const auto& [var, terms] : it->items())
            mice.predictors[var] = parse_terms(terms.get<std::vector<std::string>>());
    mice.pmm_donors = get_or(j, "pmm_donors", mice.pmm_donors);
    mice.include_response_indicators = get_or(j, "response_indicators", mice.include_response_indicators);
    mice.augment = get_or(j, "augment", mice.augment);
}

AcceptanceRule parse_rule(std::string_view text) {
    if (text == "metropolis") return AcceptanceRule::metropolis;
    if (text == "as-printed" || text == "as_printed") return AcceptanceRule::as_printed;
    throw ParseError("unknown acceptance rule '" + std::string(text) + "'");
}

void parse_gibbs(const json& j, ProjectConfig& config) {
    check_keys(j, "gibbs", {"outcomes", "responses", "iterations", "burn_in", "thin", "acceptance"});
    config.gibbs_outcomes = parse_models(j, "outcomes", "gibbs outcome");
    config.gibbs_responses = parse_models(j, "responses", "gibbs response");
    config.gibbs.iterations = get_or(j, "iterations", config.gibbs.iterations);
    config.gibbs.burn_in = get_or(j, "burn_in", config.gibbs.burn_in);
    config.gibbs.thin = get_or(j, "thin", config.gibbs.thin);
    config.gibbs.rule = parse_rule(get_or<std::string>(j, "acceptance", "metropolis"));
}

void check_variable(const Schema& schema, const std::string& name, std::string_view where) {
    if (!schema.find(name)) throw ParseError(std::string(where) + ": unknown variable '" + name + "'");
}

std::vector<std::string> variables_with_missing_items(const SurveyTable& table) {
    std::vector<std::string> out;
    for (std::size_t j = 0; j < table.cols(); ++j)
        if (table.item_missing_count(j) > 0) out.push_back(table.schema()[j].name);
    return out;
}

std::vector<DesignSpec> sequential_outcomes(const Schema& schema) {
    std::vector<DesignSpec> out;
    for (std::size_t j = 0; j < schema.size(); ++j) {
        DesignSpec s;
        s.response = schema[j].name;
        for (std::size_t t = 0; t < j; ++t) s.terms.push_back(Term::main(schema[t].name));
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<DesignSpec> all_other_responses(const Schema& schema, const std::vector<std::string>& vars) {
    std::vector<DesignSpec> out;
    for (const auto& name : vars) {
        DesignSpec s;
        s.response = name;
        for (std::size_t t = 0; t < schema.size(); ++t)
            if (schema[t].name != name) s.terms.push_back(Term::main(schema[t].name));
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace

ProjectConfig parse_config(std::string_view json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    check_keys(j, "config", {"variables", "weight_column", "missing_token", "population_size", "weight_mode",
                             "design", "margins", "margin_chain", "hotdeck_keys", "mice", "gibbs",
                             "estimands", "subgroups"});
    ProjectConfig c;
    std::vector<VariableSpec> vars;
    for (const auto& v : j.at("variables")) vars.push_back(parse_variable(v));
    c.schema = std::make_shared<const Schema>(std::move(vars), get_or<std::string>(j, "weight_column", "w"));
    const Schema& schema = *c.schema;

    c.missing_token = get_or<std::string>(j, "missing_token", "");
    if (auto it = j.find("population_size"); it != j.end() && !it->is_null())
        c.population_size = it->get<double>();
    c.weight_mode = parse_weight_mode(get_or<std::string>(j, "weight_mode", "design-known"));
    c.design = parse_sampling_design(get_or<std::string>(j, "design", "poisson"));

    if (auto it = j.find("margins"); it != j.end())
        for (const auto& m : *it) {
            c.margins.push_back(parse_margin(m));
            check_variable(schema, c.margins.back().variable, "margin");
        }
    c.margin_chain = parse_models(j, "margin_chain", "margin_chain link");
    c.hotdeck_keys = string_list(j, "hotdeck_keys");
    for (const auto& k : c.hotdeck_keys) check_variable(schema, k, "hotdeck_keys");
    if (auto it = j.find("mice"); it != j.end()) parse_mice(*it, c.mice);
    if (auto it = j.find("gibbs"); it != j.end()) parse_gibbs(*it, c);

    for (const auto& e : string_list(j, "estimands")) {
        c.estimands.push_back(parse_estimand(e));
        check_estimand(schema, c.estimands.back());
    }
    if (auto it = j.find("subgroups"); it != j.end())
        for (const auto& s : *it) {
            check_keys(s, "subgroup", {"variable", "level", "groups"});
            SubgroupSpec g;
            g.event.variable = s.at("variable").get<std::string>();
            g.event.level = get_or(s, "level", 1);
            g.groups = string_list(s, "groups");
            check_variable(schema, g.event.variable, "subgroup");
            for (const auto& v : g.groups) check_variable(schema, v, "subgroup");
            c.subgroups.push_back(std::move(g));
        }
    return c;
}

ProjectConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string format_config(const ProjectConfig& c) {
    json j;
    json vars = json::array();
    for (const auto& v : c.schema->variables()) {
        json jv;
        jv["name"] = v.name;
        jv["kind"] = std::string(to_string(v.kind));
        if (v.kind == VariableKind::categorical) jv["levels"] = v.levels;
        if (v.has_margin) jv["margin"] = true;
        vars.push_back(jv);
    }
    j["variables"] = vars;
    j["weight_column"] = c.schema->weight_column();
    if (!c.missing_token.empty()) j["missing_token"] = c.missing_token;
    if (c.population_size) j["population_size"] = *c.population_size;
    j["weight_mode"] = std::string(to_string(c.weight_mode));
    j["design"] = std::string(to_string(c.design));
    json margins = json::array();
    for (const auto& m : c.margins) {
        json jm;
        jm["variable"] = m.variable;
        jm["level"] = m.level;
        if (m.total) jm["total"] = *m.total;
        if (m.proportion) jm["proportion"] = *m.proportion;
        if (m.calibrate) jm["variance"] = "calibrate";
        else if (m.variance) jm["variance"] = *m.variance;
        margins.push_back(jm);
    }
    j["margins"] = margins;
    if (!c.margin_chain.empty()) {
        json chain = json::array();
        for (const auto& s : c.margin_chain) chain.push_back(model_json(s));
        j["margin_chain"] = chain;
    }
    if (!c.hotdeck_keys.empty()) j["hotdeck_keys"] = c.hotdeck_keys;
    json mice;
    mice["datasets"] = c.mice.datasets;
    mice["cycles"] = c.mice.cycles;
    if (!c.mice.visit_sequence.empty()) mice["visit_sequence"] = c.mice.visit_sequence;
    for (const auto& [var, imp] : c.mice.imputers) mice["imputers"][var] = std::string(to_string(imp));
    mice["pmm_donors"] = c.mice.pmm_donors;
    j["mice"] = mice;
    json gibbs;
    if (!c.gibbs_outcomes.empty()) {
        gibbs["outcomes"] = json::array();
        for (const auto& s : c.gibbs_outcomes) gibbs["outcomes"].push_back(model_json(s));
    }
    if (!c.gibbs_responses.empty()) {
        gibbs["responses"] = json::array();
        for (const auto& s : c.gibbs_responses) gibbs["responses"].push_back(model_json(s));
    }
    gibbs["iterations"] = c.gibbs.iterations;
    gibbs["burn_in"] = c.gibbs.burn_in;
    gibbs["thin"] = c.gibbs.thin;
    gibbs["acceptance"] = c.gibbs.rule == AcceptanceRule::metropolis ? "metropolis" : "as-printed";
    j["gibbs"] = gibbs;
    json est = json::array();
    for (const auto& e : c.estimands) est.push_back(format_estimand(e));
    j["estimands"] = est;
    if (!c.subgroups.empty()) {
        json subs = json::array();
        for (const auto& s : c.subgroups)
            subs.push_back({{"variable", s.event.variable}, {"level", s.event.level}, {"groups", s.groups}});
        j["subgroups"] = subs;
    }
    return j.dump(2) + "\n";
}

SurveyTable load_survey(const ProjectConfig& config, const std::filesystem::path& data) {
    LoadOptions opts;
    opts.missing_token = config.missing_token;
    opts.population_size = config.population_size;
    return load_table(data, config.schema, opts);
}

AuxiliaryMargins resolve_margins(const ProjectConfig& config, double population_size) {
    AuxiliaryMargins out;
    for (const auto& m : config.margins) {
        MarginEntry e;
        e.variable = m.variable;
        e.level = m.level;
        e.total = m.total ? *m.total : *m.proportion * population_size;
        e.calibrate = m.calibrate;
        e.variance = m.variance.value_or(0.0);
        out.entries.push_back(e);
    }
    return out;
}

ImputationProblem make_problem(const ProjectConfig& config, const SurveyTable& table) {
    const Schema& schema = table.schema();
    ImputationProblem p;
    p.weight_mode = config.weight_mode;
    p.design = config.design;
    p.population_size = config.population_size;
    p.hotdeck_keys = config.hotdeck_keys;
    const double N = resolve_population_size(table, p);
    p.population_size = N;

    p.margins = resolve_margins(config, N);
    const auto violations = validate_margins(schema, N, p.margins);
    if (!violations.empty()) {
        std::string msg = "invalid margins:";
        for (const auto& v : violations) msg += "\n  " + v.variable + ": " + v.message;
        throw Error(msg);
    }

    if (config.margin_chain.empty()) {
        p.chain = MarginChain::sequential(schema, p.margins.variables());
    } else {
        p.chain = MarginChain(schema, config.margin_chain);
        std::set<std::string> covered;
        for (const auto& v : p.chain.variables(schema)) covered.insert(v);
        for (const auto& v : p.margins.variables())
            if (!covered.count(v)) throw Error("margin variable '" + v + "' missing from margin_chain");
    }

    const auto with_missing = variables_with_missing_items(table);
    if (config.gibbs_outcomes.empty() && config.gibbs_responses.empty()) {
        p.factorization = ConditionalFactorization::sequential(schema, with_missing);
    } else {
        p.factorization = ConditionalFactorization(
            schema, config.gibbs_outcomes.empty() ? sequential_outcomes(schema) : config.gibbs_outcomes,
            config.gibbs_responses.empty() ? all_other_responses(schema, with_missing)
                                           : config.gibbs_responses);
    }
    return p;
}

}  // namespace mdam
