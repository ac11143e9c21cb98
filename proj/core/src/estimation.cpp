#include "mdam/estimation.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

namespace mdam {

std::string_view to_string(SamplingDesign design) {
    switch (design) {
        case SamplingDesign::poisson: return "poisson";
        case SamplingDesign::pps_with_replacement: return "pps";
    }
    return "unknown";
}

SamplingDesign parse_sampling_design(std::string_view text) {
    if (text == "poisson") return SamplingDesign::poisson;
    if (text == "pps" || text == "pps-with-replacement") return SamplingDesign::pps_with_replacement;
    throw ParseError("unknown sampling design '" + std::string(text) + "'");
}

HtEstimate ht_total(std::span<const double> z, std::span<const double> w, SamplingDesign design) {
    if (z.size() != w.size()) throw Error("ht_total: value/weight length mismatch");
    const std::size_t n = z.size();
    HtEstimate out;
    for (std::size_t i = 0; i < n; ++i) out.estimate += w[i] * z[i];
    switch (design) {
        case SamplingDesign::poisson:
            for (std::size_t i = 0; i < n; ++i) out.variance += w[i] * (w[i] - 1.0) * z[i] * z[i];
            break;
        case SamplingDesign::pps_with_replacement: {
            if (n < 2) break;
            const double mean = out.estimate / double(n);
            double ss = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = w[i] * z[i] - mean;
                ss += d * d;
            }
            out.variance = double(n) / double(n - 1) * ss;
            break;
        }
    }
    out.variance = std::max(out.variance, 0.0);
    return out;
}

HtEstimate ht_ratio(std::span<const double> z, std::span<const double> d, std::span<const double> w,
                    SamplingDesign design) {
    if (z.size() != w.size() || d.size() != w.size()) throw Error("ht_ratio: length mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        num += w[i] * z[i];
        den += w[i] * d[i];
    }
    if (den == 0.0) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    const double r = num / den;
    std::vector<double> e(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) e[i] = (z[i] - r * d[i]) / den;
    return {r, ht_total(e, w, design).variance};
}

namespace {

std::string_view strip(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

Condition parse_condition(std::string_view text, std::string_view whole) {
    const auto t = strip(text);
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw ParseError("estimand '" + std::string(whole) + "': expected X=c");
    Condition c;
    c.variable = std::string(strip(t.substr(0, eq)));
    const auto code = strip(t.substr(eq + 1));
    const auto res = std::from_chars(code.data(), code.data() + code.size(), c.level);
    if (c.variable.empty() || res.ec != std::errc{} || res.ptr != code.data() + code.size())
        throw ParseError("estimand '" + std::string(whole) + "': bad condition '" + std::string(t) + "'");
    return c;
}

std::vector<Condition> parse_conditions(std::string_view text, std::string_view whole) {
    std::vector<Condition> out;
    while (!text.empty()) {
        const auto comma = text.find(',');
        out.push_back(parse_condition(text.substr(0, comma), whole));
        if (comma == std::string_view::npos) break;
        text.remove_prefix(comma + 1);
    }
    return out;
}

std::string format_conditions(const std::vector<Condition>& cs) {
    std::string s;
    for (std::size_t k = 0; k < cs.size(); ++k) {
        if (k) s += ',';
        s += cs[k].variable + "=" + std::to_string(cs[k].level);
    }
    return s;
}

}  // namespace

EstimandSpec parse_estimand(std::string_view text) {
    const auto t = strip(text);
    if (t.size() < 4 || t[1] != '(' || t.back() != ')')
        throw ParseError("estimand '" + std::string(t) + "': expected T(...), P(...) or E(...)");
    const auto body = strip(t.substr(2, t.size() - 3));
    const auto bar = body.find('|');
    const auto head = strip(body.substr(0, bar));
    const auto tail = bar == std::string_view::npos ? std::string_view{} : strip(body.substr(bar + 1));

    EstimandSpec spec;
    switch (t[0]) {
        case 'T':
            if (bar != std::string_view::npos)
                throw ParseError("estimand '" + std::string(t) + "': totals take no condition");
            if (head.find('=') == std::string_view::npos) {
                spec.kind = EstimandSpec::Kind::value_total;
                spec.variable = std::string(head);
            } else {
                const auto c = parse_condition(head, t);
                spec.kind = EstimandSpec::Kind::level_total;
                spec.variable = c.variable;
                spec.level = c.level;
            }
            break;
        case 'P':
            spec.kind = EstimandSpec::Kind::probability;
            spec.event = parse_conditions(head, t);
            spec.given = parse_conditions(tail, t);
            if (spec.event.empty()) throw ParseError("estimand '" + std::string(t) + "': empty event");
            break;
        case 'E':
            spec.kind = EstimandSpec::Kind::mean;
            spec.variable = std::string(head);
            spec.given = parse_conditions(tail, t);
            break;
        default:
            throw ParseError("estimand '" + std::string(t) + "': unknown kind");
    }
    if ((spec.kind != EstimandSpec::Kind::probability) && spec.variable.empty())
        throw ParseError("estimand '" + std::string(t) + "': missing variable");
    spec.label = format_estimand(spec);
    return spec;
}

std::string format_estimand(const EstimandSpec& spec) {
    switch (spec.kind) {
        case EstimandSpec::Kind::level_total:
            return "T(" + spec.variable + "=" + std::to_string(spec.level) + ")";
        case EstimandSpec::Kind::value_total: return "T(" + spec.variable + ")";
        case EstimandSpec::Kind::probability:
            return "P(" + format_conditions(spec.event) +
                   (spec.given.empty() ? "" : "|" + format_conditions(spec.given)) + ")";
        case EstimandSpec::Kind::mean:
            return "E(" + spec.variable + (spec.given.empty() ? "" : "|" + format_conditions(spec.given)) + ")";
    }
    return {};
}

void check_estimand(const Schema& schema, const EstimandSpec& spec) {
    auto check_condition = [&](const Condition& c) {
        const std::size_t j = schema.index_of(c.variable);
        if (!schema[j].is_categorical())
            throw Error("estimand " + spec.label + ": '" + c.variable + "' is continuous");
        if (schema[j].level_index(c.level) < 0)
            throw Error("estimand " + spec.label + ": " + std::to_string(c.level) + " is not a level of '" +
                        c.variable + "'");
    };
    switch (spec.kind) {
        case EstimandSpec::Kind::level_total: check_condition({spec.variable, spec.level}); break;
        case EstimandSpec::Kind::value_total:
        case EstimandSpec::Kind::mean:
            if (schema[schema.index_of(spec.variable)].is_categorical())
                throw Error("estimand " + spec.label + ": '" + spec.variable + "' is categorical");
            break;
        case EstimandSpec::Kind::probability: break;
    }
    for (const auto& c : spec.event) check_condition(c);
    for (const auto& c : spec.given) check_condition(c);
}

EstimandColumns estimand_columns(const CompletedDataset& data, const EstimandSpec& spec) {
    const Schema& schema = data.schema();
    check_estimand(schema, spec);
    const std::size_t n = data.rows();
    auto indicator = [&](const std::vector<Condition>& cs) {
        std::vector<std::pair<std::size_t, double>> idx;
        for (const auto& c : cs) idx.emplace_back(schema.index_of(c.variable), double(c.level));
        std::vector<double> out(n, 1.0);
        for (std::size_t i = 0; i < n; ++i)
            for (const auto& [j, code] : idx)
                if (data.value(j, i) != code) {
                    out[i] = 0.0;
                    break;
                }
        return out;
    };
    EstimandColumns cols;
    switch (spec.kind) {
        case EstimandSpec::Kind::level_total:
            cols.numerator = indicator({{spec.variable, spec.level}});
            break;
        case EstimandSpec::Kind::value_total: {
            const auto v = data.column(schema.index_of(spec.variable));
            cols.numerator.assign(v.begin(), v.end());
            break;
        }
        case EstimandSpec::Kind::probability: {
            cols.denominator = indicator(spec.given);
            cols.numerator = indicator(spec.event);
            for (std::size_t i = 0; i < n; ++i) cols.numerator[i] *= cols.denominator[i];
            break;
        }
        case EstimandSpec::Kind::mean: {
            cols.denominator = indicator(spec.given);
            const auto v = data.column(schema.index_of(spec.variable));
            cols.numerator.resize(n);
            for (std::size_t i = 0; i < n; ++i) cols.numerator[i] = cols.denominator[i] * v[i];
            break;
        }
    }
    return cols;
}

HtEstimate estimate(const CompletedDataset& data, const EstimandSpec& spec, SamplingDesign design) {
    const auto cols = estimand_columns(data, spec);
    if (spec.is_ratio()) return ht_ratio(cols.numerator, cols.denominator, data.weights(), design);
    return ht_total(cols.numerator, data.weights(), design);
}

double PooledEstimate::se() const { return std::sqrt(total_var); }

double t_quantile_975(double df) {
    if (!(df > 0.0)) throw Error("t quantile: degrees of freedom must be positive");
    if (std::isinf(df)) return 1.959963984540054;
    return boost::math::quantile(boost::math::students_t_distribution<double>(df), 0.975);
}

PooledEstimate pool(std::span<const double> q, std::span<const double> u) {
    if (q.size() != u.size()) throw Error("pool: estimate/variance length mismatch");
    const std::size_t L = q.size();
    if (L < 2) throw Error("pool: at least 2 completed datasets are required");
    PooledEstimate p;
    p.datasets = L;
    const double dl = double(L);
    p.qbar = std::accumulate(q.begin(), q.end(), 0.0) / dl;
    p.ubar = std::accumulate(u.begin(), u.end(), 0.0) / dl;
    double ss = 0.0;
    for (double v : q) ss += (v - p.qbar) * (v - p.qbar);
    p.b = ss / (dl - 1.0);
    const double inflated = (1.0 + 1.0 / dl) * p.b;
    p.total_var = p.ubar + inflated;
    if (inflated > 0.0) {
        const double r = 1.0 + p.ubar / inflated;
        p.df = (dl - 1.0) * r * r;
    } else {
        p.df = std::numeric_limits<double>::infinity();
    }
    const double half = t_quantile_975(p.df) * std::sqrt(p.total_var);
    p.ci_low = p.qbar - half;
    p.ci_high = p.qbar + half;
    return p;
}

}  // namespace mdam
