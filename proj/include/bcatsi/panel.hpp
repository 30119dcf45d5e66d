#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bcatsi/layers.hpp"
#include "bcatsi/tensor.hpp"

namespace bcatsi {

struct FeatureStats {
    double raw_min = 0.0;
    double raw_max = 0.0;
    double norm_mean = 0.0;   // empirical mean over observed cells, normalized space
    double norm_std = 0.0;    // over observed cells; 0 for degenerate features
    double missing_rate = 0.0;
    bool degenerate = false;  // constant feature, min == max
};

// One subject's multivariate series. Missing cells carry 0.0 in `values`;
// the observation mask is authoritative. Values held out for evaluation are
// moved to `eval_truth` so nothing downstream can read them by accident.
struct TimeSeriesPanel {
    std::string id;
    std::vector<double> timestamps; // strictly increasing
    Mat values;                     // T x F, raw units
    Mat obs_mask;                   // 1 observed, 0 missing
    Mat eval_mask;                  // 1 at artificially hidden cells
    Mat eval_truth;                 // raw truth at eval cells, 0 elsewhere
    Mat gaps;                       // filled by compute_gaps
    Mat norm_values;                // filled by normalize; 0 at missing cells
    std::vector<FeatureStats> stats;
    bool normalized = false;
    bool has_gaps = false;

    int T() const { return values.rows; }
    int F() const { return values.cols; }

    static TimeSeriesPanel make(std::string id, Mat values, Mat obs_mask,
                                std::vector<double> timestamps = {});
};

struct MaskPlan {
    enum class Mode { Individual, Consecutive };
    Mode mode = Mode::Individual;
    int run_len = 3;           // m, consecutive mode only
    double rate = 0.05;        // target added-missing fraction of all cells
    std::uint64_t seed = 1;

    void validate() const;
};

// Hides `rate`*T cells per feature among the observed ones, either one by one
// or as non-overlapping runs of exactly `run_len`. Held-out truths move to
// eval_truth. Throws DataError with the achievable rate when the plan cannot
// be realized within 0.5 percentage points.
void apply_mask(TimeSeriesPanel& panel, const MaskPlan& plan, const std::string& rng_tag = "");

// Per-feature min-max normalization over observed cells. Constant features
// map to 0 and are flagged degenerate. Also records the summary statistics
// (mean, std, missing rate) used by the context model.
void normalize(TimeSeriesPanel& panel);

double denormalize_value(const FeatureStats& s, double normalized);

// Observation gap recurrence: gap resets after an observed step and
// otherwise accumulates elapsed time.
void compute_gaps(TimeSeriesPanel& panel);

// Trainable temporal decay: gamma = exp(-max(0, W delta + b)) blends the
// last observation toward the per-feature empirical mean.
struct DecayModule {
    LinearLayer lin; // F -> F, deterministic

    DecayModule() = default;
    explicit DecayModule(int features);

    struct Mounted {
        LinearLayer::Mounted lin;
    };
    Mounted mount(PassContext& ctx) { return {lin.mount(ctx)}; }
};

struct Precompletion {
    Tensor x_tilde; // T x F, observed cells preserved exactly
    Tensor gamma;   // T x F in (0, 1]
};

Precompletion decay_precomplete(PassContext& ctx, const TimeSeriesPanel& panel,
                                DecayModule::Mounted& decay);

// Last observed value per cell (the feature mean where nothing precedes),
// in normalized space. Exposed for reuse by baselines and tests.
Mat last_observation_matrix(const TimeSeriesPanel& panel);

} // namespace bcatsi
