#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mdam/error.hpp"

namespace mdam {

enum class VariableKind { binary, categorical, continuous };

std::string_view to_string(VariableKind kind);
VariableKind parse_variable_kind(std::string_view text);

/// One survey variable.
///
/// Level codes are what appears in data files: binary variables use {0, 1},
/// categorical variables use 1..m. Internally models work with the 0-based
/// level index, so code 1 of a categorical variable is index 0 and acts as
/// the reference level.
struct VariableSpec {
    std::string name;
    VariableKind kind = VariableKind::continuous;
    std::vector<std::string> levels;  // labels; empty for continuous
    bool has_margin = false;

    static VariableSpec binary(std::string name, bool has_margin = false);
    static VariableSpec categorical(std::string name, std::vector<std::string> labels,
                                    bool has_margin = false);
    static VariableSpec continuous(std::string name);

    bool is_categorical() const { return kind != VariableKind::continuous; }
    int level_count() const { return static_cast<int>(levels.size()); }
    int first_code() const { return kind == VariableKind::binary ? 0 : 1; }

    /// 0-based level index of a stored code, or -1 when the code is not a level.
    int level_index(double code) const;
    double code_of(int index) const { return static_cast<double>(index + first_code()); }
};

/// Ordered variable list plus the name of the weight column.
class Schema {
public:
    Schema() = default;
    Schema(std::vector<VariableSpec> variables, std::string weight_column = "w");

    std::size_t size() const { return variables_.size(); }
    const VariableSpec& operator[](std::size_t j) const { return variables_[j]; }
    const std::vector<VariableSpec>& variables() const { return variables_; }
    const std::string& weight_column() const { return weight_column_; }

    std::optional<std::size_t> find(std::string_view name) const;
    /// Index of `name`; throws Error when absent.
    std::size_t index_of(std::string_view name) const;

private:
    std::vector<VariableSpec> variables_;
    std::string weight_column_;
};

using SchemaPtr = std::shared_ptr<const Schema>;

/// Rectangular survey data with item masks, unit-nonresponse flags and weights.
///
/// Immutable after construction. The constructor enforces:
///  - every column has n_rows entries,
///  - unit nonrespondents are all-missing,
///  - observed categorical cells are valid level codes,
///  - known weights are strictly positive.
/// Weights of unit nonrespondents may be unknown (`weight_known` false); they
/// are supplied later by build_weights.
class SurveyTable {
public:
    struct Columns {
        std::vector<std::vector<double>> values;
        std::vector<std::vector<std::uint8_t>> item_mask;  // 1 = missing
        std::vector<std::uint8_t> unit_flag;               // 1 = unit nonrespondent
        std::vector<double> weights;
        std::vector<std::uint8_t> weight_known;            // empty = all known
    };

    SurveyTable(SchemaPtr schema, Columns columns, std::optional<double> population_size = {});

    const Schema& schema() const { return *schema_; }
    const SchemaPtr& schema_ptr() const { return schema_; }
    std::size_t rows() const { return unit_flag_.size(); }
    std::size_t cols() const { return values_.size(); }

    double value(std::size_t j, std::size_t i) const { return values_[j][i]; }
    bool missing(std::size_t j, std::size_t i) const { return item_mask_[j][i] != 0; }
    bool unit_nonrespondent(std::size_t i) const { return unit_flag_[i] != 0; }
    double weight(std::size_t i) const { return weights_[i]; }
    bool weight_known(std::size_t i) const { return weight_known_[i] != 0; }

    std::span<const double> column(std::size_t j) const { return values_[j]; }
    std::span<const std::uint8_t> mask(std::size_t j) const { return item_mask_[j]; }
    std::span<const std::uint8_t> unit_flags() const { return unit_flag_; }
    std::span<const double> weights() const { return weights_; }
    std::optional<double> population_size() const { return population_size_; }

    std::size_t unit_nonrespondent_count() const;
    std::vector<std::size_t> respondent_rows() const;
    std::vector<std::size_t> nonrespondent_rows() const;
    /// Missing cells of variable j among unit respondents.
    std::size_t item_missing_count(std::size_t j) const;

    /// Copy of the raw columns, for building derived tables.
    Columns columns() const;

private:
    SchemaPtr schema_;
    std::vector<std::vector<double>> values_;
    std::vector<std::vector<std::uint8_t>> item_mask_;
    std::vector<std::uint8_t> unit_flag_;
    std::vector<double> weights_;
    std::vector<std::uint8_t> weight_known_;
    std::optional<double> population_size_;
};

struct LoadOptions {
    std::string missing_token;  // default: empty field
    char delimiter = ',';
    std::optional<double> population_size;
};

/// Reads a delimited file whose header names every schema variable plus the
/// weight column. Rows with all survey variables missing are unit
/// nonrespondents.
SurveyTable load_table(const std::filesystem::path& path, SchemaPtr schema,
                       const LoadOptions& options = {});
SurveyTable parse_table(std::string_view text, SchemaPtr schema, const LoadOptions& options = {});

void write_table(const SurveyTable& table, const std::filesystem::path& path,
                 std::string_view missing_token = "");
std::string format_table(const SurveyTable& table, std::string_view missing_token = "");

/// Shortest decimal that round-trips a double.
std::string format_number(double x);

// --- auxiliary margins -----------------------------------------------------

struct MarginEntry {
    std::string variable;
    int level = 1;             // level code as stored in data
    double total = 0.0;        // T
    double variance = 0.0;     // V
    bool calibrate = false;    // V to be estimated from a preliminary fill
};

struct AuxiliaryMargins {
    std::vector<MarginEntry> entries;

    std::vector<const MarginEntry*> for_variable(std::string_view name) const;
    /// Margin variable names in first-appearance order.
    std::vector<std::string> variables() const;
};

struct MarginViolation {
    std::string variable;
    std::string message;
};

/// All invariant violations of `margins` against the table's schema; empty when ok.
std::vector<MarginViolation> validate_margins(const SurveyTable& table,
                                              const AuxiliaryMargins& margins);
std::vector<MarginViolation> validate_margins(const Schema& schema,
                                              std::optional<double> population_size,
                                              const AuxiliaryMargins& margins);

}  // namespace mdam
