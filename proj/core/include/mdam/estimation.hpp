#pragma once

#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mdam/completed.hpp"

namespace mdam {

enum class SamplingDesign { poisson, pps_with_replacement };

std::string_view to_string(SamplingDesign design);
SamplingDesign parse_sampling_design(std::string_view text);

struct HtEstimate {
    double estimate = 0.0;
    double variance = 0.0;
};

/// Sum of w*z and its design variance.
///   poisson: sum w(w-1) z^2
///   pps:     n/(n-1) sum (w z - T/n)^2
HtEstimate ht_total(std::span<const double> z, std::span<const double> w, SamplingDesign design);

/// sum(w z) / sum(w d) with a linearised variance: the total variance formula
/// applied to e = (z - R d) / sum(w d). NaN estimate when the denominator is 0.
HtEstimate ht_ratio(std::span<const double> z, std::span<const double> d, std::span<const double> w,
                    SamplingDesign design);

struct Condition {
    std::string variable;
    int level = 0;  // level code
};

/// A finite-population quantity.
///
/// Text forms (see parse_estimand):
///   T(X=c)            total count of level c
///   T(X)              total of a continuous variable
///   P(A=a,B=b|C=c)    probability of an event, optionally within a subgroup
///   E(X|C=c)          mean of a continuous variable, optionally within a subgroup
struct EstimandSpec {
    enum class Kind { level_total, value_total, probability, mean };
    Kind kind = Kind::level_total;
    std::string variable;
    int level = 0;
    std::vector<Condition> event;
    std::vector<Condition> given;
    std::string label;

    bool is_ratio() const { return kind == Kind::probability || kind == Kind::mean; }
};

EstimandSpec parse_estimand(std::string_view text);
std::string format_estimand(const EstimandSpec& spec);

/// Throws Error when the estimand names unknown variables or levels.
void check_estimand(const Schema& schema, const EstimandSpec& spec);

/// Per-row numerator and denominator contributions of an estimand given a
/// value accessor value(j, i) over `rows` rows.
struct EstimandColumns {
    std::vector<double> numerator;
    std::vector<double> denominator;  // empty for totals
};

EstimandColumns estimand_columns(const CompletedDataset& data, const EstimandSpec& spec);

/// HT estimate of `spec` on a completed dataset with its own weights.
HtEstimate estimate(const CompletedDataset& data, const EstimandSpec& spec, SamplingDesign design);

/// Combination across L completed datasets: mean estimate, within plus inflated between variance.
struct PooledEstimate {
    double qbar = 0.0;
    double ubar = 0.0;
    double b = 0.0;
    double total_var = 0.0;
    double df = std::numeric_limits<double>::infinity();
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::size_t datasets = 0;

    double se() const;
};

PooledEstimate pool(std::span<const double> q, std::span<const double> u);

/// Upper 0.975 quantile of Student t with `df` degrees of freedom (normal for df = inf).
double t_quantile_975(double df);

}  // namespace mdam
