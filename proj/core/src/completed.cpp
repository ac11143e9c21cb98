#include "mdam/completed.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

namespace mdam {

CompletedDataset CompletedDataset::from_table(const SurveyTable& table) {
    std::vector<std::size_t> rows(table.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return from_table(table, rows);
}

CompletedDataset CompletedDataset::from_table(const SurveyTable& table,
                                              std::span<const std::size_t> rows) {
    constexpr double unfilled = std::numeric_limits<double>::quiet_NaN();
    CompletedDataset out;
    out.schema_ = table.schema_ptr();
    out.source_rows_.assign(rows.begin(), rows.end());
    const std::size_t k = table.cols();
    out.values_.assign(k, std::vector<double>(rows.size()));
    out.imputed_.assign(k, std::vector<std::uint8_t>(rows.size()));
    out.unit_flag_.resize(rows.size());
    out.weights_.resize(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const std::size_t i = rows[r];
        if (i >= table.rows()) throw Error("CompletedDataset: row index out of range");
        out.unit_flag_[r] = table.unit_nonrespondent(i) ? 1 : 0;
        out.weights_[r] = table.weight(i);
        for (std::size_t j = 0; j < k; ++j) {
            const bool miss = table.missing(j, i);
            out.imputed_[j][r] = miss ? 1 : 0;
            out.values_[j][r] = miss ? unfilled : table.value(j, i);
        }
    }
    return out;
}

void CompletedDataset::impute(std::size_t j, std::size_t i, double v) {
    if (!imputed_[j][i])
        throw Error("CompletedDataset: attempt to overwrite observed cell of '" +
                    (*schema_)[j].name + "'");
    values_[j][i] = v;
}

void CompletedDataset::set_weights(std::vector<double> weights) {
    if (weights.size() != rows()) throw Error("CompletedDataset: weight length mismatch");
    weights_ = std::move(weights);
}

void CompletedDataset::assign_from(const CompletedDataset& part) {
    std::unordered_map<std::size_t, std::size_t> where;
    where.reserve(rows());
    for (std::size_t r = 0; r < rows(); ++r) where.emplace(source_rows_[r], r);
    for (std::size_t r = 0; r < part.rows(); ++r) {
        auto it = where.find(part.source_row(r));
        if (it == where.end()) throw Error("CompletedDataset: source row not present");
        for (std::size_t j = 0; j < cols(); ++j)
            if (part.imputed(j, r)) impute(j, it->second, part.value(j, r));
    }
}

std::size_t CompletedDataset::count_imputed(std::size_t j) const {
    std::size_t c = 0;
    for (auto f : imputed_[j]) c += f;
    return c;
}

bool CompletedDataset::complete() const {
    for (const auto& col : values_)
        for (double v : col)
            if (std::isnan(v)) return false;
    return true;
}

bool CompletedDataset::respondents_complete() const {
    for (const auto& col : values_)
        for (std::size_t i = 0; i < rows(); ++i)
            if (!unit_flag_[i] && std::isnan(col[i])) return false;
    return true;
}

std::vector<std::size_t> CompletedDataset::nonrespondent_rows() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < rows(); ++i)
        if (unit_flag_[i]) out.push_back(i);
    return out;
}

SurveyTable CompletedDataset::to_table(std::optional<double> population_size) const {
    if (!complete()) throw Error("CompletedDataset::to_table: unfilled cells remain");
    SurveyTable::Columns c;
    c.values = values_;
    c.item_mask.assign(cols(), std::vector<std::uint8_t>(rows(), 0));
    c.unit_flag.assign(rows(), 0);
    c.weights = weights_;
    return SurveyTable(schema_, std::move(c), population_size);
}

}  // namespace mdam
