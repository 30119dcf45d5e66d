#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bcatsi/model.hpp"

namespace bcatsi {

// One panel's imputation result paired with the panel that defines the eval
// cells, the held-out truths and the known-truth value range.
struct ScoredPanel {
    const TimeSeriesPanel* panel = nullptr;
    const Mat* imputed = nullptr; // raw units, full panel
};

// Range (max - min) of the known ground truth of one panel-feature: observed
// cells plus held-out eval truths.
double truth_range(const TimeSeriesPanel& panel, int f);

// Root-mean-squared error over eval cells of feature f, each residual scaled
// by the owning panel's truth range. Panels with zero range are skipped with
// a warning on stderr.
double nrmse(std::span<const ScoredPanel> scored, int f);

// Linear interpolation between order statistics; q in [0, 1].
double percentile(std::vector<double> values, double q);

struct PosteriorPredictive {
    int n_samples = 0;
    std::vector<Mat> samples; // raw units, full panels
    Mat mean, stdev, p5, p50, p95;
};

// S independent weight samples, S forward passes, per-cell statistics.
// Deterministic models are rejected; use repeated training runs instead.
PosteriorPredictive posterior_predict(ImputationModel& model, const TimeSeriesPanel& panel,
                                      int n_samples, std::uint64_t seed);

struct MetricRow {
    std::string analyte;
    double mean = 0.0;
    double band_low = 0.0;  // central 95% band over samples/runs
    double band_high = 0.0;
    double stdev = 0.0;
    std::optional<double> rel_improvement; // fraction; filled by compare_runs
};

struct MetricTable {
    std::vector<MetricRow> rows; // per analyte, then one mean_of_means row

    const MetricRow* find(const std::string& analyte) const;
};

// Builds the table from per-sample nRMSE values: values[analyte][sample].
MetricTable make_metric_table(const std::vector<std::string>& analytes,
                              const std::vector<std::vector<double>>& per_sample_nrmse);

// Relative improvement of candidate over baseline, positive when the
// candidate's error is lower; the difference is scaled by the larger
// (worse) of the two means.
MetricTable compare_runs(const MetricTable& candidate, const MetricTable& baseline);

std::string metric_table_csv(const MetricTable& table);
MetricTable parse_metric_table_csv(const std::string& text);

} // namespace bcatsi
