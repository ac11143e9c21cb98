#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mdam/completed.hpp"
#include "mdam/dataset.hpp"

namespace mdam {

/// One predictor term of a regression, before expansion against a schema.
///
/// Text forms accepted by parse_terms():
///   `X`        main effect (categorical: m-1 indicators against the first level)
///   `X=c`      indicator of level code c
///   `X=c:Y=d`  product of two level indicators
///   `X:Y`      all products of non-reference level indicators of X and Y
///   `R(X)`     item-response indicator of X (1 = X was missing)
struct Term {
    enum class Kind { main, level, interaction, interaction_all, response };
    Kind kind = Kind::main;
    std::string var;
    int level = 0;
    std::string var2;
    int level2 = 0;

    static Term main(std::string v) { return {Kind::main, std::move(v), 0, {}, 0}; }
    static Term indicator(std::string v, int c) { return {Kind::level, std::move(v), c, {}, 0}; }
    static Term product(std::string a, int c, std::string b, int d) {
        return {Kind::interaction, std::move(a), c, std::move(b), d};
    }
    static Term response(std::string v) { return {Kind::response, std::move(v), 0, {}, 0}; }

    std::string to_string() const;
};

Term parse_term(std::string_view text);
std::vector<Term> parse_terms(const std::vector<std::string>& texts);

/// Response variable plus predictor terms.
struct DesignSpec {
    std::string response;
    std::vector<Term> terms;
    bool intercept = true;
};

/// A single design-matrix column after expansion.
struct DesignColumn {
    enum class Kind { intercept, value, indicator, indicator_product, response };
    Kind kind = Kind::intercept;
    std::size_t var = 0;
    double code = 0.0;
    std::size_t var2 = 0;
    double code2 = 0.0;
    std::string label;
};

/// DesignSpec expanded against a schema.
class ResolvedDesign {
public:
    ResolvedDesign() = default;
    ResolvedDesign(const Schema& schema, const DesignSpec& spec);

    std::size_t width() const { return columns_.size(); }
    std::size_t response() const { return response_; }
    const std::vector<DesignColumn>& columns() const { return columns_; }
    std::vector<std::string> labels() const;

    /// True when some column reads the value of variable `var`.
    bool references(std::size_t var) const;
    bool references_response_indicator(std::size_t var) const;

    /// Writes one design row. `value(j)` returns the current value of variable
    /// j, `missing(j)` its item-response indicator.
    template <class ValueFn, class MissingFn>
    void fill(ValueFn&& value, MissingFn&& missing, double* out) const {
        for (std::size_t c = 0; c < columns_.size(); ++c) {
            const auto& col = columns_[c];
            switch (col.kind) {
                case DesignColumn::Kind::intercept: out[c] = 1.0; break;
                case DesignColumn::Kind::value: out[c] = value(col.var); break;
                case DesignColumn::Kind::indicator:
                    out[c] = value(col.var) == col.code ? 1.0 : 0.0;
                    break;
                case DesignColumn::Kind::indicator_product:
                    out[c] = (value(col.var) == col.code && value(col.var2) == col.code2) ? 1.0 : 0.0;
                    break;
                case DesignColumn::Kind::response: out[c] = missing(col.var) ? 1.0 : 0.0; break;
            }
        }
    }

    void fill(const CompletedDataset& data, std::size_t row, double* out) const;
    Eigen::MatrixXd matrix(const CompletedDataset& data, std::span<const std::size_t> rows) const;

private:
    std::size_t response_ = 0;
    std::vector<DesignColumn> columns_;
};

}  // namespace mdam
