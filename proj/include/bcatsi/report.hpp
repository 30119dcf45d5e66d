#pragma once

#include <span>
#include <string>
#include <vector>

#include "bcatsi/evaluation.hpp"

namespace bcatsi {

struct PanelReportData {
    const TimeSeriesPanel* panel = nullptr;
    Mat point;                                       // point imputation, raw units
    const PosteriorPredictive* predictive = nullptr; // optional band + samples
};

// Emits the metric table, one overlay plot per panel-analyte (observed
// series, imputed points, 5-95 percentile band, eval-cell markers) and one
// histogram sheet per panel-analyte with per-eval-cell sample distributions.
// Panels without eval cells get no plots; a notice goes to stderr.
// Returns the written file paths.
std::vector<std::string> render_report(const MetricTable& metrics,
                                       std::span<const PanelReportData> panels,
                                       const std::vector<std::string>& analytes,
                                       const std::string& out_dir);

std::string sanitize_filename(const std::string& name);

} // namespace bcatsi
