#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "mdam/estimation.hpp"
#include "mdam/pipeline.hpp"
#include "mdam/simgen.hpp"

namespace mdam {

struct StudyConfig {
    SimulationConfig simulation = SimulationConfig::appendix_b();
    int replicates = 100;
    int datasets = 20;  // L
    std::uint64_t seed = 20240101;
    std::vector<ArmKind> arms{ArmKind::mmh, ArmKind::ih};
    MiceConfig mice;
    /// Gibbs schedule; iterations are extended so that `datasets` states are emitted.
    GibbsConfig gibbs{2000, 1000, 50, AcceptanceRule::metropolis};
    unsigned threads = 1;
    double plausibility_band = 4.0;  // in units of sqrt(V)
};

/// Per-replicate record, kept for diagnostics and the summary tables.
struct ReplicateResult {
    bool ok = false;
    std::string error;
    std::size_t sample_size = 0;
    std::size_t unit_nonrespondents = 0;
    std::vector<double> item_missing_rate;           // per variable, among respondents
    std::vector<HtEstimate> pre;                     // per estimand
    std::vector<std::vector<PooledEstimate>> arms;   // [arm][estimand]
    std::vector<std::size_t> plausible;              // [arm] datasets inside the band on every margin
    std::vector<std::size_t> datasets;               // [arm]
};

struct StudyRow {
    std::string estimand;
    bool is_total = true;
    double truth = 0.0;
    double pre_variance = 0.0;
    std::vector<double> mean_estimate;     // per arm
    std::vector<double> percent_bias;      // per arm, absolute
    std::vector<double> coverage;          // per arm, percent
    std::vector<double> variance;          // per arm, across replicates
    std::vector<double> avg_est_variance;  // per arm, mean pooled total variance
};

struct StudyReport {
    StudyConfig config;
    std::vector<std::string> arm_names;
    std::vector<StudyRow> totals;
    std::vector<StudyRow> probabilities;
    std::vector<ReplicateResult> replicates;
    std::size_t failures = 0;
    double mean_unit_nr_rate = 0.0;
    std::vector<double> mean_item_nr_rate;  // per variable
    std::vector<double> plausible_fraction;  // per arm; NaN for arms without margins
};

/// Runs one replicate: sample, nonresponse, every arm, pooled estimates.
ReplicateResult run_replicate(const StudyConfig& config, const Population& pop,
                              const std::array<double, 4>& cell_probs, const AuxiliaryMargins& margins,
                              const std::vector<EstimandSpec>& estimands, int replicate);

/// Full repeated-sampling study; `progress` is called after each finished replicate.
StudyReport run_study(const StudyConfig& config, const std::function<void(int)>& progress = {});

std::string format_totals_csv(const StudyReport& report);
std::string format_probs_csv(const StudyReport& report);
std::string format_manifest(const StudyReport& report);
std::string format_diagnostics_csv(const StudyReport& report);

/// Writes totals.csv, probs.csv, run-manifest.json and diagnostics.csv.
void write_study(const StudyReport& report, const std::filesystem::path& dir);

// --- pooled reporting on an imputation set ----------------------------------

struct PooledRow {
    std::string label;
    PooledEstimate pooled;
    bool degenerate = false;  // empty subgroup in some dataset
};

/// Pooled estimate of each estimand across the datasets.
std::vector<PooledRow> pool_estimands(const std::vector<CompletedDataset>& datasets,
                                      const std::vector<EstimandSpec>& estimands, SamplingDesign design);

/// P(event | cell) for every cell of the cross-classification of `groups`
/// (one cell, everyone, when `groups` is empty).
std::vector<PooledRow> subgroup_report(const std::vector<CompletedDataset>& datasets, const Condition& event,
                                       const std::vector<std::string>& groups, SamplingDesign design);

std::string format_pooled_csv(const std::vector<PooledRow>& rows);

}  // namespace mdam
