#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mdam/dataset.hpp"

namespace mdam {

/// A working copy of (a row subset of) a SurveyTable in which missing cells
/// receive imputations.
///
/// Observed cells are fixed at construction; only cells flagged as imputed
/// can be written, so completion never alters observed data. Unfilled cells
/// hold NaN until an imputer writes them.
class CompletedDataset {
public:
    CompletedDataset() = default;

    /// All rows of `table`.
    static CompletedDataset from_table(const SurveyTable& table);
    /// The given rows of `table`, in order.
    static CompletedDataset from_table(const SurveyTable& table, std::span<const std::size_t> rows);

    const Schema& schema() const { return *schema_; }
    const SchemaPtr& schema_ptr() const { return schema_; }
    std::size_t rows() const { return source_rows_.size(); }
    std::size_t cols() const { return values_.size(); }

    double value(std::size_t j, std::size_t i) const { return values_[j][i]; }
    /// True when the cell was missing in the source and is (to be) imputed.
    bool imputed(std::size_t j, std::size_t i) const { return imputed_[j][i] != 0; }
    bool unit_nonrespondent(std::size_t i) const { return unit_flag_[i] != 0; }
    double weight(std::size_t i) const { return weights_[i]; }
    std::size_t source_row(std::size_t i) const { return source_rows_[i]; }

    std::span<const double> column(std::size_t j) const { return values_[j]; }
    std::span<const std::uint8_t> imputed_mask(std::size_t j) const { return imputed_[j]; }
    std::span<const double> weights() const { return weights_; }
    std::span<const std::size_t> source_rows() const { return source_rows_; }

    /// Writes an imputation. Throws if the cell was observed in the source.
    void impute(std::size_t j, std::size_t i, double v);
    void set_weights(std::vector<double> weights);

    /// Copies every imputed cell of `part` into the matching source rows here.
    void assign_from(const CompletedDataset& part);

    std::size_t count_imputed(std::size_t j) const;
    /// No unfilled cells remain (over all rows).
    bool complete() const;
    /// No unfilled cells remain among unit respondents.
    bool respondents_complete() const;

    std::vector<std::size_t> nonrespondent_rows() const;

    /// Fully observed SurveyTable view of the completion (weights as set here).
    SurveyTable to_table(std::optional<double> population_size = {}) const;

private:
    SchemaPtr schema_;
    std::vector<std::size_t> source_rows_;
    std::vector<std::vector<double>> values_;
    std::vector<std::vector<std::uint8_t>> imputed_;
    std::vector<std::uint8_t> unit_flag_;
    std::vector<double> weights_;
};

}  // namespace mdam
