#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bcatsi/model.hpp"

namespace bcatsi {

struct TrainConfig {
    int n_epoch = 300;
    int n_sample = 2; // Monte-Carlo weight samples per epoch
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double clip_norm = 5.0; // global gradient norm clip; <= 0 disables
    int patience = 30;      // early-stop patience in epochs; <= 0 disables
    double validation_fraction = 0.2;
    std::uint64_t seed = 1;
    // The complexity cost is divided by the total observed training-cell
    // count so it is commensurate with the per-cell likelihood terms; set
    // false to keep the raw sum.
    bool scale_complexity = true;
    ModelConfig model;

    void validate(std::size_t n_panels) const;
};

struct LossReport {
    enum class Split { Train, Validation };
    int epoch = 0;
    Split split = Split::Train;
    double l_y = 0.0;    // final-imputation term
    double l_xhat = 0.0; // recurrent term
    double l_z = 0.0;    // cross-feature term
    double complexity = 0.0;
    double total = 0.0;

    double likelihood() const { return l_y + l_xhat + l_z; }
};

// ||m . (x - y)||_F^2 / ||m||_F^2; for a binary mask the denominator is the
// observed-cell count. Rejects an all-zero mask.
Tensor masked_msd(Tape& tape, Tensor x, Tensor y, const Mat& mask);
double masked_msd_value(const Mat& x, const Mat& y, const Mat& mask);

struct LikelihoodTerms {
    Tensor l_y, l_xhat, l_z;
    Tensor total;
};

// L(Y) + L(X_hat) + L(Z), each against the presented values under the
// observation mask. Held-out eval truths never enter.
LikelihoodTerms likelihood_cost(PassContext& ctx, const ImputationModel::Forward& fw,
                                const TimeSeriesPanel& panel);

struct AdamState {
    std::vector<Mat> m;
    std::vector<Mat> v;
    long step = 0;
};

// Standard Adam with bias correction. Parameter order must stay stable
// across calls.
void adam_step(std::span<Parameter* const> params, AdamState& state, double lr, double beta1,
               double beta2, double eps);

struct FitResult {
    std::vector<LossReport> history;      // one train report per completed epoch
    std::vector<double> val_likelihood;   // parallel to history
    int best_epoch = 0;                   // 1-based
    bool early_stopped = false;
};

class Trainer {
public:
    Trainer(ImputationModel& model, TrainConfig cfg);

    // One Algorithm-style epoch: n_sample fresh weight draws, a full pass
    // over all panels per draw, one accumulated backward, one Adam step.
    LossReport train_epoch(std::span<TimeSeriesPanel> panels, int epoch);

    // Likelihood at theta = mu (no sampling); used for validation tracking.
    double validation_likelihood(std::span<TimeSeriesPanel> panels);

    // Splits panels into train/validation by the configured fraction, runs
    // up to n_epoch epochs with early stopping on the validation likelihood
    // and restores the best snapshot.
    FitResult fit(std::vector<TimeSeriesPanel>& panels);

private:
    ImputationModel& model_;
    TrainConfig cfg_;
    std::vector<Parameter*> params_;
    AdamState adam_;
    RandomStream noise_rng_;
};

void write_metrics_history(const std::string& path, const FitResult& fit);

} // namespace bcatsi
