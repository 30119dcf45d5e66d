#include "bcatsi/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

namespace bcatsi {

void TrainConfig::validate(std::size_t n_panels) const {
    if (n_sample < 1) throw ContractError("TrainConfig: n_sample must be >= 1");
    if (n_epoch < 1) throw ContractError("TrainConfig: n_epoch must be >= 1");
    if (validation_fraction <= 0.0 || validation_fraction >= 1.0) {
        throw ContractError("TrainConfig: validation_fraction must be in (0, 1)");
    }
    if (n_panels < 2) throw DataError("fit: need at least 2 panels");
}

Tensor masked_msd(Tape& tape, Tensor x, Tensor y, const Mat& mask) {
    if (x.rows != y.rows || x.cols != y.cols || mask.rows != x.rows || mask.cols != x.cols) {
        throw ShapeError("masked_msd: shapes " + shape_str(x.rows, x.cols) + ", " +
                         shape_str(y.rows, y.cols) + ", " + shape_str(mask.rows, mask.cols));
    }
    double count = 0.0;
    for (double v : mask.data) count += v * v;
    if (count == 0.0) throw DataError("masked_msd: all-zero mask");
    Tensor d = sub(x, y);
    Tensor sq = mul(d, d);
    return scale(sum(mul(tape.constant(mask), sq)), 1.0 / count);
}

double masked_msd_value(const Mat& x, const Mat& y, const Mat& mask) {
    if (!x.same_shape(y) || !x.same_shape(mask)) {
        throw ShapeError("masked_msd_value: shape mismatch");
    }
    double count = 0.0, acc = 0.0;
    for (int i = 0; i < mask.size(); ++i) {
        count += mask.data[i] * mask.data[i];
        const double d = x.data[i] - y.data[i];
        acc += mask.data[i] * d * d;
    }
    if (count == 0.0) throw DataError("masked_msd_value: all-zero mask");
    return acc / count;
}

LikelihoodTerms likelihood_cost(PassContext& ctx, const ImputationModel::Forward& fw,
                                const TimeSeriesPanel& panel) {
    Tensor x = ctx.tape.constant(panel.norm_values);
    LikelihoodTerms lt;
    lt.l_y = masked_msd(ctx.tape, x, fw.y, panel.obs_mask);
    lt.l_xhat = masked_msd(ctx.tape, x, fw.x_hat, panel.obs_mask);
    lt.l_z = masked_msd(ctx.tape, x, fw.z_hat, panel.obs_mask);
    lt.total = add(add(lt.l_y, lt.l_xhat), lt.l_z);
    return lt;
}

void adam_step(std::span<Parameter* const> params, AdamState& state, double lr, double beta1,
               double beta2, double eps) {
    if (state.m.empty()) {
        state.m.reserve(params.size());
        state.v.reserve(params.size());
        for (const Parameter* p : params) {
            state.m.emplace_back(p->value.rows, p->value.cols);
            state.v.emplace_back(p->value.rows, p->value.cols);
        }
    }
    if (state.m.size() != params.size()) {
        throw ContractError("adam_step: parameter list changed size");
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Parameter& p = *params[i];
        Mat& m = state.m[i];
        Mat& v = state.v[i];
        for (int j = 0; j < p.value.size(); ++j) {
            const double g = p.grad.data[j];
            m.data[j] = beta1 * m.data[j] + (1.0 - beta1) * g;
            v.data[j] = beta2 * v.data[j] + (1.0 - beta2) * g * g;
            const double mhat = m.data[j] / bc1;
            const double vhat = v.data[j] / bc2;
            p.value.data[j] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

Trainer::Trainer(ImputationModel& model, TrainConfig cfg)
    : model_(model), cfg_(std::move(cfg)), params_(model.trainables()),
      noise_rng_(RandomStream::mix(cfg_.seed, 0x6e6f697365ULL)) {}

namespace {

void check_finite(double v, int epoch, const char* term) {
    if (!std::isfinite(v)) {
        throw NumericError("epoch " + std::to_string(epoch) + ": " + term +
                           " is non-finite; aborting");
    }
}

double total_observed_cells(std::span<TimeSeriesPanel> panels) {
    double n = 0.0;
    for (const auto& p : panels) {
        for (double v : p.obs_mask.data) n += v;
    }
    return n;
}

} // namespace

LossReport Trainer::train_epoch(std::span<TimeSeriesPanel> panels, int epoch) {
    for (Parameter* p : params_) p->zero_grad();

    LossReport rep;
    rep.epoch = epoch;
    rep.split = LossReport::Split::Train;

    const bool variational = model_.has_variational();
    const double cell_count = total_observed_cells(panels);

    for (int s = 0; s < cfg_.n_sample; ++s) {
        if (variational) model_.draw_noise(noise_rng_);
        for (TimeSeriesPanel& panel : panels) {
            Tape tape;
            PassContext ctx{tape, {}};
            auto fw = model_.forward(ctx, panel);
            auto lt = likelihood_cost(ctx, fw, panel);
            check_finite(lt.l_y.scalar_value(), epoch, "likelihood L(Y)");
            check_finite(lt.l_xhat.scalar_value(), epoch, "likelihood L(X_hat)");
            check_finite(lt.l_z.scalar_value(), epoch, "likelihood L(Z)");
            tape.backward(lt.total);
            rep.l_y += lt.l_y.scalar_value();
            rep.l_xhat += lt.l_xhat.scalar_value();
            rep.l_z += lt.l_z.scalar_value();
        }
        if (variational) {
            // Same cached noise as the forward passes above, so the penalty
            // applies to the thetas actually used this sample.
            Tape tape;
            PassContext ctx{tape, {}};
            model_.mount_all(ctx);
            Tensor comp = complexity_cost(tape, ctx.samples);
            if (cfg_.scale_complexity && cell_count > 0.0) {
                comp = scale(comp, 1.0 / cell_count);
            }
            check_finite(comp.scalar_value(), epoch, "complexity cost");
            tape.backward(comp);
            rep.complexity += comp.scalar_value();
        }
    }

    if (cfg_.clip_norm > 0.0) {
        double sq = 0.0;
        for (const Parameter* p : params_) {
            for (double g : p->grad.data) sq += g * g;
        }
        const double norm = std::sqrt(sq);
        if (norm > cfg_.clip_norm) {
            const double k = cfg_.clip_norm / norm;
            for (Parameter* p : params_) {
                for (double& g : p->grad.data) g *= k;
            }
        }
    }

    adam_step(params_, adam_, cfg_.learning_rate, cfg_.adam_beta1, cfg_.adam_beta2,
              cfg_.adam_eps);
    model_.reapply_zero_masks();
    for (Parameter* p : params_) p->zero_grad();

    rep.total = rep.likelihood() + rep.complexity;
    return rep;
}

double Trainer::validation_likelihood(std::span<TimeSeriesPanel> panels) {
    model_.zero_noise();
    double total = 0.0;
    for (TimeSeriesPanel& panel : panels) {
        Tape tape;
        PassContext ctx{tape, {}};
        auto fw = model_.forward(ctx, panel);
        auto lt = likelihood_cost(ctx, fw, panel);
        total += lt.total.scalar_value();
    }
    return total;
}

FitResult Trainer::fit(std::vector<TimeSeriesPanel>& panels) {
    cfg_.validate(panels.size());
    const int n = static_cast<int>(panels.size());
    int n_val = static_cast<int>(std::lround(cfg_.validation_fraction * n));
    n_val = std::clamp(n_val, 1, n - 1);

    std::vector<std::size_t> order(panels.size());
    std::iota(order.begin(), order.end(), 0);
    RandomStream split_rng(RandomStream::mix(cfg_.seed, 0x73706c6974ULL));
    split_rng.shuffle(order);

    std::vector<TimeSeriesPanel> val_panels, train_panels;
    for (int i = 0; i < n; ++i) {
        auto& dst = i < n_val ? val_panels : train_panels;
        dst.push_back(panels[order[static_cast<std::size_t>(i)]]);
    }

    FitResult result;
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<Mat> best_values;

    auto snapshot = [&] {
        best_values.clear();
        for (const Parameter* p : params_) best_values.push_back(p->value);
    };
    snapshot();

    for (int epoch = 1; epoch <= cfg_.n_epoch; ++epoch) {
        LossReport rep = train_epoch(train_panels, epoch);
        const double vl = validation_likelihood(val_panels);
        result.history.push_back(rep);
        result.val_likelihood.push_back(vl);
        if (vl < best_val) {
            best_val = vl;
            result.best_epoch = epoch;
            snapshot();
        } else if (cfg_.patience > 0 && epoch - result.best_epoch >= cfg_.patience) {
            result.early_stopped = true;
            break;
        }
    }

    for (std::size_t i = 0; i < params_.size(); ++i) params_[i]->value = best_values[i];
    model_.reapply_zero_masks();
    return result;
}

void write_metrics_history(const std::string& path, const FitResult& fit) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write metrics file " + path);
    out << "epoch,train_likelihood,val_likelihood,complexity\n";
    char buf[128];
    for (std::size_t i = 0; i < fit.history.size(); ++i) {
        const LossReport& r = fit.history[i];
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", r.epoch, r.likelihood(),
                      fit.val_likelihood[i], r.complexity);
        out << buf;
    }
}

} // namespace bcatsi
