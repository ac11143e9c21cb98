#include "mdam/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace mdam {

std::string_view to_string(VariableKind kind) {
    switch (kind) {
        case VariableKind::binary: return "binary";
        case VariableKind::categorical: return "categorical";
        case VariableKind::continuous: return "continuous";
    }
    return "unknown";
}

VariableKind parse_variable_kind(std::string_view text) {
    if (text == "binary") return VariableKind::binary;
    if (text == "categorical" || text == "nominal" || text == "ordinal") return VariableKind::categorical;
    if (text == "continuous") return VariableKind::continuous;
    throw ParseError("unknown variable kind '" + std::string(text) + "'");
}

VariableSpec VariableSpec::binary(std::string name, bool has_margin) {
    return VariableSpec{std::move(name), VariableKind::binary, {"0", "1"}, has_margin};
}

VariableSpec VariableSpec::categorical(std::string name, std::vector<std::string> labels,
                                       bool has_margin) {
    return VariableSpec{std::move(name), VariableKind::categorical, std::move(labels), has_margin};
}

VariableSpec VariableSpec::continuous(std::string name) {
    return VariableSpec{std::move(name), VariableKind::continuous, {}, false};
}

int VariableSpec::level_index(double code) const {
    if (!is_categorical()) return -1;
    const double idx = code - first_code();
    if (idx < 0 || idx >= level_count() || idx != std::floor(idx)) return -1;
    return static_cast<int>(idx);
}

Schema::Schema(std::vector<VariableSpec> variables, std::string weight_column)
    : variables_(std::move(variables)), weight_column_(std::move(weight_column)) {
    std::set<std::string> seen;
    for (const auto& v : variables_) {
        if (v.name.empty()) throw Error("schema: empty variable name");
        if (!seen.insert(v.name).second) throw Error("schema: duplicate variable '" + v.name + "'");
        if (v.name == weight_column_)
            throw Error("schema: variable '" + v.name + "' collides with the weight column");
        if (v.kind == VariableKind::binary && v.levels.size() != 2)
            throw Error("schema: binary variable '" + v.name + "' must have exactly 2 levels");
        if (v.kind == VariableKind::categorical && v.levels.size() < 2)
            throw Error("schema: categorical variable '" + v.name + "' needs at least 2 levels");
        if (v.kind == VariableKind::continuous && v.has_margin)
            throw Error("schema: continuous variable '" + v.name + "' cannot carry a margin");
    }
}

std::optional<std::size_t> Schema::find(std::string_view name) const {
    for (std::size_t j = 0; j < variables_.size(); ++j)
        if (variables_[j].name == name) return j;
    return std::nullopt;
}

std::size_t Schema::index_of(std::string_view name) const {
    if (auto j = find(name)) return *j;
    throw Error("unknown variable '" + std::string(name) + "'");
}

// --- SurveyTable -------------------------------------------------------------

SurveyTable::SurveyTable(SchemaPtr schema, Columns c, std::optional<double> population_size)
    : schema_(std::move(schema)),
      values_(std::move(c.values)),
      item_mask_(std::move(c.item_mask)),
      unit_flag_(std::move(c.unit_flag)),
      weights_(std::move(c.weights)),
      weight_known_(std::move(c.weight_known)),
      population_size_(population_size) {
    if (!schema_) throw Error("SurveyTable: null schema");
    const std::size_t k = schema_->size();
    const std::size_t n = unit_flag_.size();
    if (values_.size() != k || item_mask_.size() != k)
        throw Error("SurveyTable: column count does not match schema");
    if (weights_.size() != n) throw Error("SurveyTable: weight column length mismatch");
    if (weight_known_.empty()) weight_known_.assign(n, 1);
    if (weight_known_.size() != n) throw Error("SurveyTable: weight mask length mismatch");
    for (std::size_t j = 0; j < k; ++j) {
        if (values_[j].size() != n || item_mask_[j].size() != n)
            throw Error("SurveyTable: column '" + (*schema_)[j].name + "' length mismatch");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (unit_flag_[i]) {
            for (std::size_t j = 0; j < k; ++j)
                if (!item_mask_[j][i])
                    throw Error("SurveyTable: unit nonrespondent row " + std::to_string(i) +
                                " has an observed cell");
        } else if (!weight_known_[i]) {
            throw Error("SurveyTable: respondent row " + std::to_string(i) + " lacks a weight");
        }
        if (weight_known_[i] && !(weights_[i] > 0.0 && std::isfinite(weights_[i])))
            throw Error("SurveyTable: nonpositive weight in row " + std::to_string(i));
    }
    for (std::size_t j = 0; j < k; ++j) {
        const auto& spec = (*schema_)[j];
        for (std::size_t i = 0; i < n; ++i) {
            if (item_mask_[j][i]) continue;
            const double x = values_[j][i];
            if (!std::isfinite(x))
                throw Error("SurveyTable: non-finite value in '" + spec.name + "'");
            if (spec.is_categorical() && spec.level_index(x) < 0)
                throw Error("SurveyTable: level " + format_number(x) + " out of range for '" +
                            spec.name + "'");
        }
    }
    if (population_size_ && !(*population_size_ > 0.0))
        throw Error("SurveyTable: population size must be positive");
}

std::size_t SurveyTable::unit_nonrespondent_count() const {
    return static_cast<std::size_t>(std::count(unit_flag_.begin(), unit_flag_.end(), 1));
}

std::vector<std::size_t> SurveyTable::respondent_rows() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < rows(); ++i)
        if (!unit_flag_[i]) out.push_back(i);
    return out;
}

std::vector<std::size_t> SurveyTable::nonrespondent_rows() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < rows(); ++i)
        if (unit_flag_[i]) out.push_back(i);
    return out;
}

std::size_t SurveyTable::item_missing_count(std::size_t j) const {
    std::size_t count = 0;
    for (std::size_t i = 0; i < rows(); ++i)
        if (!unit_flag_[i] && item_mask_[j][i]) ++count;
    return count;
}

SurveyTable::Columns SurveyTable::columns() const {
    return Columns{values_, item_mask_, unit_flag_, weights_, weight_known_};
}

// --- delimited I/O -----------------------------------------------------------

namespace {

std::vector<std::string> split_record(std::string_view line, char delim) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t p = 0; p < line.size(); ++p) {
        const char ch = line[p];
        if (quoted) {
            if (ch == '"') {
                if (p + 1 < line.size() && line[p + 1] == '"') {
                    cur.push_back('"');
                    ++p;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == delim) {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    if (quoted) throw ParseError("unterminated quoted field");
    fields.push_back(std::move(cur));
    return fields;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::optional<double> parse_number(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double x = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return x;
}

}  // namespace

std::string format_number(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    if (ec != std::errc{}) return std::to_string(x);
    return std::string(buf, ptr);
}

SurveyTable parse_table(std::string_view text, SchemaPtr schema, const LoadOptions& options) {
    const Schema& s = *schema;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;

    auto next_line = [&](std::string& out) {
        while (std::getline(in, out)) {
            ++line_no;
            if (!trim(out).empty()) return true;
        }
        return false;
    };
    if (!next_line(line)) throw ParseError("empty input: no header row");

    const auto header = split_record(line, options.delimiter);
    std::vector<std::optional<std::size_t>> column_var(header.size());
    std::optional<std::size_t> weight_col;
    std::vector<int> seen(s.size(), 0);
    for (std::size_t c = 0; c < header.size(); ++c) {
        const auto name = std::string(trim(header[c]));
        if (name == s.weight_column()) {
            weight_col = c;
        } else if (auto j = s.find(name)) {
            if (seen[*j]++) throw ParseError("duplicate column '" + name + "'");
            column_var[c] = *j;
        } else {
            throw ParseError("unknown column '" + name + "'");
        }
    }
    for (std::size_t j = 0; j < s.size(); ++j)
        if (!seen[j]) throw ParseError("missing column '" + s[j].name + "'");
    if (!weight_col) throw ParseError("missing weight column '" + s.weight_column() + "'");

    SurveyTable::Columns cols;
    cols.values.resize(s.size());
    cols.item_mask.resize(s.size());
    const std::string_view token = options.missing_token;

    while (next_line(line)) {
        const auto fields = split_record(line, options.delimiter);
        if (fields.size() != header.size())
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " fields, got " +
                             std::to_string(fields.size()));
        bool all_missing = true;
        for (std::size_t c = 0; c < fields.size(); ++c) {
            if (!column_var[c]) continue;
            const std::size_t j = *column_var[c];
            const auto cell = trim(fields[c]);
            if (cell == token) {
                cols.values[j].push_back(0.0);
                cols.item_mask[j].push_back(1);
                continue;
            }
            auto x = parse_number(cell);
            if (!x)
                throw ParseError("line " + std::to_string(line_no) + ": cannot parse '" +
                                 std::string(cell) + "' in column '" + s[j].name + "'");
            if (s[j].is_categorical() && s[j].level_index(*x) < 0)
                throw ParseError("line " + std::to_string(line_no) + ": level " +
                                 std::string(cell) + " out of range for '" + s[j].name + "'");
            cols.values[j].push_back(*x);
            cols.item_mask[j].push_back(0);
            all_missing = false;
        }
        const bool unit_nr = all_missing && s.size() > 0;
        cols.unit_flag.push_back(unit_nr ? 1 : 0);

        const auto wcell = trim(fields[*weight_col]);
        if (wcell == token && unit_nr) {
            cols.weights.push_back(1.0);
            cols.weight_known.push_back(0);
        } else {
            auto w = parse_number(wcell);
            if (!w)
                throw ParseError("line " + std::to_string(line_no) + ": cannot parse weight '" +
                                 std::string(wcell) + "'");
            if (!(*w > 0.0))
                throw ParseError("line " + std::to_string(line_no) + ": nonpositive weight " +
                                 std::string(wcell));
            cols.weights.push_back(*w);
            cols.weight_known.push_back(1);
        }
    }
    return SurveyTable(std::move(schema), std::move(cols), options.population_size);
}

SurveyTable load_table(const std::filesystem::path& path, SchemaPtr schema,
                       const LoadOptions& options) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_table(ss.str(), std::move(schema), options);
}

std::string format_table(const SurveyTable& table, std::string_view missing_token) {
    const Schema& s = table.schema();
    std::string out;
    for (std::size_t j = 0; j < s.size(); ++j) {
        out += s[j].name;
        out += ',';
    }
    out += s.weight_column();
    out += '\n';
    for (std::size_t i = 0; i < table.rows(); ++i) {
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (table.missing(j, i))
                out += missing_token;
            else
                out += format_number(table.value(j, i));
            out += ',';
        }
        if (table.weight_known(i))
            out += format_number(table.weight(i));
        else
            out += missing_token;
        out += '\n';
    }
    return out;
}

void write_table(const SurveyTable& table, const std::filesystem::path& path,
                 std::string_view missing_token) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write '" + path.string() + "'");
    f << format_table(table, missing_token);
}

// --- margins -----------------------------------------------------------------

std::vector<const MarginEntry*> AuxiliaryMargins::for_variable(std::string_view name) const {
    std::vector<const MarginEntry*> out;
    for (const auto& e : entries)
        if (e.variable == name) out.push_back(&e);
    return out;
}

std::vector<std::string> AuxiliaryMargins::variables() const {
    std::vector<std::string> out;
    for (const auto& e : entries)
        if (std::find(out.begin(), out.end(), e.variable) == out.end()) out.push_back(e.variable);
    return out;
}

std::vector<MarginViolation> validate_margins(const Schema& schema,
                                              std::optional<double> population_size,
                                              const AuxiliaryMargins& margins) {
    std::vector<MarginViolation> out;
    std::map<std::string, std::vector<const MarginEntry*>> by_var;
    for (const auto& e : margins.entries) {
        auto j = schema.find(e.variable);
        if (!j) {
            out.push_back({e.variable, "margin references an unknown variable"});
            continue;
        }
        const auto& spec = schema[*j];
        if (!spec.is_categorical()) {
            out.push_back({e.variable, "margins are defined for categorical variables only"});
            continue;
        }
        if (!spec.has_margin)
            out.push_back({e.variable, "variable is not marked as having a margin"});
        if (spec.level_index(e.level) < 0)
            out.push_back({e.variable, "level " + format_number(e.level) + " is not a level"});
        if (!(e.total >= 0.0) || !std::isfinite(e.total))
            out.push_back({e.variable, "total must be a nonnegative count"});
        if (!e.calibrate && !(e.variance > 0.0))
            out.push_back({e.variable, "variance V must be positive"});
        by_var[e.variable].push_back(&e);
    }
    for (const auto& [name, entries] : by_var) {
        const auto& spec = schema[schema.index_of(name)];
        if (!spec.is_categorical()) continue;
        std::set<int> levels;
        double sum = 0.0;
        for (const auto* e : entries) {
            if (!levels.insert(e->level).second)
                out.push_back({name, "level " + std::to_string(e->level) + " listed twice"});
            sum += e->total;
        }
        if (static_cast<int>(levels.size()) < spec.level_count() - 1)
            out.push_back({name, "margins must cover at least m-1 levels"});
        if (population_size && sum > *population_size * (1.0 + 1e-12))
            out.push_back({name, "totals exceed the population size"});
    }
    for (const auto& spec : schema.variables())
        if (spec.has_margin && !by_var.count(spec.name))
            out.push_back({spec.name, "variable is marked as having a margin but none is given"});
    return out;
}

std::vector<MarginViolation> validate_margins(const SurveyTable& table,
                                              const AuxiliaryMargins& margins) {
    return validate_margins(table.schema(), table.population_size(), margins);
}

}  // namespace mdam
