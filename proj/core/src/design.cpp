#include "mdam/design.hpp"

#include <algorithm>
#include <charconv>

namespace mdam {

namespace {

std::string_view strip(std::string_view s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    return s;
}

int parse_code(std::string_view s, std::string_view whole) {
    s = strip(s);
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw ParseError("bad level code in term '" + std::string(whole) + "'");
    return v;
}

struct Factor {
    std::string var;
    std::optional<int> level;
};

Factor parse_factor(std::string_view s, std::string_view whole) {
    s = strip(s);
    if (s.empty()) throw ParseError("empty factor in term '" + std::string(whole) + "'");
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) return {std::string(s), std::nullopt};
    return {std::string(strip(s.substr(0, eq))), parse_code(s.substr(eq + 1), whole)};
}

}  // namespace

std::string Term::to_string() const {
    switch (kind) {
        case Kind::main: return var;
        case Kind::level: return var + "=" + std::to_string(level);
        case Kind::interaction:
            return var + "=" + std::to_string(level) + ":" + var2 + "=" + std::to_string(level2);
        case Kind::interaction_all: return var + ":" + var2;
        case Kind::response: return "R(" + var + ")";
    }
    return {};
}

Term parse_term(std::string_view text) {
    const auto t = strip(text);
    if (t.empty()) throw ParseError("empty term");
    if (t.size() > 3 && t.substr(0, 2) == "R(" && t.back() == ')')
        return Term::response(std::string(strip(t.substr(2, t.size() - 3))));
    const auto colon = t.find(':');
    if (colon == std::string_view::npos) {
        auto f = parse_factor(t, t);
        return f.level ? Term::indicator(f.var, *f.level) : Term::main(f.var);
    }
    auto a = parse_factor(t.substr(0, colon), t);
    auto b = parse_factor(t.substr(colon + 1), t);
    if (a.level.has_value() != b.level.has_value())
        throw ParseError("interaction '" + std::string(t) + "' mixes level and variable factors");
    if (a.level) return Term::product(a.var, *a.level, b.var, *b.level);
    return Term{Term::Kind::interaction_all, a.var, 0, b.var, 0};
}

std::vector<Term> parse_terms(const std::vector<std::string>& texts) {
    std::vector<Term> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(parse_term(t));
    return out;
}

ResolvedDesign::ResolvedDesign(const Schema& schema, const DesignSpec& spec)
    : response_(schema.index_of(spec.response)) {
    using K = DesignColumn::Kind;
    if (spec.intercept) columns_.push_back({K::intercept, 0, 0, 0, 0, "(Intercept)"});

    auto check_level = [&](std::size_t j, int code) {
        if (!schema[j].is_categorical())
            throw Error("term uses a level of continuous variable '" + schema[j].name + "'");
        if (schema[j].level_index(code) < 0)
            throw Error("level " + std::to_string(code) + " is not a level of '" + schema[j].name + "'");
    };
    auto check_not_response = [&](std::size_t j, const Term& t) {
        if (j == response_)
            throw Error("design for '" + spec.response + "' uses its own value in term '" +
                        t.to_string() + "'");
    };

    for (const auto& t : spec.terms) {
        const std::size_t a = schema.index_of(t.var);
        switch (t.kind) {
            case Term::Kind::main: {
                check_not_response(a, t);
                const auto& v = schema[a];
                if (v.kind == VariableKind::categorical) {
                    for (int l = 1; l < v.level_count(); ++l) {
                        const double code = v.code_of(l);
                        columns_.push_back({K::indicator, a, code, 0, 0,
                                            v.name + "=" + format_number(code)});
                    }
                } else {
                    columns_.push_back({K::value, a, 0, 0, 0, v.name});
                }
                break;
            }
            case Term::Kind::level:
                check_not_response(a, t);
                check_level(a, t.level);
                columns_.push_back({K::indicator, a, double(t.level), 0, 0, t.to_string()});
                break;
            case Term::Kind::interaction: {
                const std::size_t b = schema.index_of(t.var2);
                check_not_response(a, t);
                check_not_response(b, t);
                check_level(a, t.level);
                check_level(b, t.level2);
                columns_.push_back({K::indicator_product, a, double(t.level), b, double(t.level2),
                                    t.to_string()});
                break;
            }
            case Term::Kind::interaction_all: {
                const std::size_t b = schema.index_of(t.var2);
                check_not_response(a, t);
                check_not_response(b, t);
                const auto& va = schema[a];
                const auto& vb = schema[b];
                if (!va.is_categorical() || !vb.is_categorical())
                    throw Error("interaction '" + t.to_string() + "' needs categorical variables");
                for (int la = 1; la < va.level_count(); ++la)
                    for (int lb = 1; lb < vb.level_count(); ++lb) {
                        const double ca = va.code_of(la);
                        const double cb = vb.code_of(lb);
                        columns_.push_back({K::indicator_product, a, ca, b, cb,
                                            va.name + "=" + format_number(ca) + ":" + vb.name +
                                                "=" + format_number(cb)});
                    }
                break;
            }
            case Term::Kind::response:
                if (a == response_)
                    throw Error("design for '" + spec.response + "' uses its own response indicator");
                columns_.push_back({K::response, a, 0, 0, 0, t.to_string()});
                break;
        }
    }
}

std::vector<std::string> ResolvedDesign::labels() const {
    std::vector<std::string> out;
    for (const auto& c : columns_) out.push_back(c.label);
    return out;
}

bool ResolvedDesign::references(std::size_t var) const {
    return std::any_of(columns_.begin(), columns_.end(), [&](const DesignColumn& c) {
        switch (c.kind) {
            case DesignColumn::Kind::value:
            case DesignColumn::Kind::indicator: return c.var == var;
            case DesignColumn::Kind::indicator_product: return c.var == var || c.var2 == var;
            default: return false;
        }
    });
}

bool ResolvedDesign::references_response_indicator(std::size_t var) const {
    return std::any_of(columns_.begin(), columns_.end(), [&](const DesignColumn& c) {
        return c.kind == DesignColumn::Kind::response && c.var == var;
    });
}

void ResolvedDesign::fill(const CompletedDataset& data, std::size_t row, double* out) const {
    fill([&](std::size_t j) { return data.value(j, row); },
         [&](std::size_t j) { return data.imputed(j, row); }, out);
}

Eigen::MatrixXd ResolvedDesign::matrix(const CompletedDataset& data,
                                       std::span<const std::size_t> rows) const {
    // Row-major scratch then transpose into Eigen's column-major storage.
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> m(rows.size(), width());
    for (std::size_t r = 0; r < rows.size(); ++r) fill(data, rows[r], m.row(r).data());
    return m;
}

}  // namespace mdam
