#include "bcatsi/panel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bcatsi/random.hpp"

namespace bcatsi {

TimeSeriesPanel TimeSeriesPanel::make(std::string id, Mat values, Mat obs_mask,
                                      std::vector<double> timestamps) {
    if (!values.same_shape(obs_mask)) {
        throw ShapeError("panel: values " + shape_str(values.rows, values.cols) +
                         " vs mask " + shape_str(obs_mask.rows, obs_mask.cols));
    }
    TimeSeriesPanel p;
    p.id = std::move(id);
    p.values = std::move(values);
    p.obs_mask = std::move(obs_mask);
    const int T = p.values.rows, F = p.values.cols;
    p.eval_mask = Mat(T, F);
    p.eval_truth = Mat(T, F);
    if (timestamps.empty()) {
        p.timestamps.resize(T);
        for (int t = 0; t < T; ++t) p.timestamps[t] = t;
    } else {
        if (static_cast<int>(timestamps.size()) != T) {
            throw ShapeError("panel: " + std::to_string(timestamps.size()) +
                             " timestamps for " + std::to_string(T) + " rows");
        }
        p.timestamps = std::move(timestamps);
    }
    // missing cells carry zero, whatever the caller passed
    for (int i = 0; i < p.values.size(); ++i) {
        if (p.obs_mask.data[i] == 0.0) p.values.data[i] = 0.0;
    }
    return p;
}

void MaskPlan::validate() const {
    if (rate < 0.0 || rate >= 1.0) throw ContractError("MaskPlan: rate must be in [0, 1)");
    if (mode == Mode::Consecutive && run_len < 2) {
        throw ContractError("MaskPlan: consecutive runs need length >= 2");
    }
}

namespace {

void hide_cell(TimeSeriesPanel& p, int t, int f) {
    p.eval_mask.at(t, f) = 1.0;
    p.eval_truth.at(t, f) = p.values.at(t, f);
    p.obs_mask.at(t, f) = 0.0;
    p.values.at(t, f) = 0.0;
}

void mask_feature_individual(TimeSeriesPanel& p, int f, int want, RandomStream& rng) {
    std::vector<int> observed;
    for (int t = 0; t < p.T(); ++t) {
        if (p.obs_mask.at(t, f) == 1.0) observed.push_back(t);
    }
    if (static_cast<int>(observed.size()) < want) {
        const double achievable = static_cast<double>(observed.size()) / p.T();
        throw DataError("apply_mask: feature " + std::to_string(f) + " has only " +
                        std::to_string(observed.size()) + " observed cells; achievable rate " +
                        std::to_string(achievable));
    }
    rng.shuffle(observed);
    for (int i = 0; i < want; ++i) hide_cell(p, observed[i], f);
}

void mask_feature_consecutive(TimeSeriesPanel& p, int f, int want_cells, int m,
                              double target_rate, RandomStream& rng) {
    const int T = p.T();
    const int want_runs = static_cast<int>(std::lround(static_cast<double>(want_cells) / m));
    if (want_runs == 0) return;

    std::vector<int> starts;
    for (int t = 0; t + m <= T; ++t) {
        bool ok = true;
        for (int j = 0; j < m && ok; ++j) ok = p.obs_mask.at(t + j, f) == 1.0;
        if (ok) starts.push_back(t);
    }
    rng.shuffle(starts);

    std::vector<char> taken(static_cast<std::size_t>(T), 0);
    int placed = 0;
    for (int s : starts) {
        if (placed == want_runs) break;
        bool free = true;
        for (int j = 0; j < m && free; ++j) free = taken[static_cast<std::size_t>(s + j)] == 0;
        if (!free) continue;
        for (int j = 0; j < m; ++j) {
            taken[static_cast<std::size_t>(s + j)] = 1;
            hide_cell(p, s + j, f);
        }
        ++placed;
    }
    const double realized = static_cast<double>(placed) * m / T;
    if (std::fabs(realized - target_rate) > 0.005 + 1e-12) {
        throw DataError("apply_mask: feature " + std::to_string(f) + " fits only " +
                        std::to_string(placed) + " runs of " + std::to_string(m) +
                        "; achievable rate " + std::to_string(realized));
    }
}

} // namespace

void apply_mask(TimeSeriesPanel& panel, const MaskPlan& plan, const std::string& rng_tag) {
    plan.validate();
    if (panel.normalized) {
        throw ContractError("apply_mask: mask before normalization");
    }
    std::uint64_t salt = 0;
    for (char c : panel.id) salt = salt * 131 + static_cast<unsigned char>(c);
    for (char c : rng_tag) salt = salt * 131 + static_cast<unsigned char>(c);
    RandomStream rng(RandomStream::mix(plan.seed, salt));

    const int T = panel.T();
    const int want = static_cast<int>(std::lround(plan.rate * T));
    if (want == 0) return;
    for (int f = 0; f < panel.F(); ++f) {
        if (plan.mode == MaskPlan::Mode::Individual) {
            mask_feature_individual(panel, f, want, rng);
        } else {
            mask_feature_consecutive(panel, f, want, plan.run_len, plan.rate, rng);
        }
    }
}

void normalize(TimeSeriesPanel& panel) {
    const int T = panel.T(), F = panel.F();
    panel.norm_values = Mat(T, F);
    panel.stats.assign(static_cast<std::size_t>(F), FeatureStats{});
    for (int f = 0; f < F; ++f) {
        FeatureStats& s = panel.stats[static_cast<std::size_t>(f)];
        double lo = 0.0, hi = 0.0;
        int n_obs = 0;
        for (int t = 0; t < T; ++t) {
            if (panel.obs_mask.at(t, f) != 1.0) continue;
            const double v = panel.values.at(t, f);
            if (n_obs == 0) {
                lo = hi = v;
            } else {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            ++n_obs;
        }
        if (n_obs == 0) {
            throw DataError("normalize: feature " + std::to_string(f) + " of panel " +
                            panel.id + " has no observed values");
        }
        s.raw_min = lo;
        s.raw_max = hi;
        s.degenerate = hi == lo;
        s.missing_rate = static_cast<double>(T - n_obs) / T;

        double mean = 0.0;
        for (int t = 0; t < T; ++t) {
            if (panel.obs_mask.at(t, f) != 1.0) continue;
            const double nv = s.degenerate ? 0.0 : (panel.values.at(t, f) - lo) / (hi - lo);
            panel.norm_values.at(t, f) = nv;
            mean += nv;
        }
        mean /= n_obs;
        s.norm_mean = mean;

        double var = 0.0;
        for (int t = 0; t < T; ++t) {
            if (panel.obs_mask.at(t, f) != 1.0) continue;
            const double d = panel.norm_values.at(t, f) - mean;
            var += d * d;
        }
        s.norm_std = s.degenerate ? 0.0 : std::sqrt(var / n_obs);
    }
    panel.normalized = true;
}

double denormalize_value(const FeatureStats& s, double normalized) {
    return normalized * (s.raw_max - s.raw_min) + s.raw_min;
}

void compute_gaps(TimeSeriesPanel& panel) {
    const int T = panel.T(), F = panel.F();
    for (int t = 1; t < T; ++t) {
        if (panel.timestamps[t] < panel.timestamps[t - 1]) {
            throw DataError("compute_gaps: timestamps decrease at row " + std::to_string(t) +
                            " of panel " + panel.id);
        }
    }
    panel.gaps = Mat(T, F);
    for (int f = 0; f < F; ++f) {
        for (int t = 1; t < T; ++t) {
            const double step = panel.timestamps[t] - panel.timestamps[t - 1];
            panel.gaps.at(t, f) = panel.obs_mask.at(t - 1, f) == 1.0
                                      ? step
                                      : step + panel.gaps.at(t - 1, f);
        }
    }
    panel.has_gaps = true;
}

DecayModule::DecayModule(int features)
    : lin("decay", features, features, WeightMode::Deterministic, nullptr) {
    Mat& w = lin.w.center_values();
    for (int i = 0; i < features; ++i) w.at(i, i) = 0.1;
}

Mat last_observation_matrix(const TimeSeriesPanel& panel) {
    if (!panel.normalized) throw ContractError("last_observation_matrix: normalize first");
    const int T = panel.T(), F = panel.F();
    Mat last(T, F);
    for (int f = 0; f < F; ++f) {
        double carried = panel.stats[static_cast<std::size_t>(f)].norm_mean;
        for (int t = 0; t < T; ++t) {
            last.at(t, f) = carried;
            if (panel.obs_mask.at(t, f) == 1.0) carried = panel.norm_values.at(t, f);
        }
    }
    return last;
}

Precompletion decay_precomplete(PassContext& ctx, const TimeSeriesPanel& panel,
                                DecayModule::Mounted& decay) {
    if (!panel.normalized || !panel.has_gaps) {
        throw ContractError("decay_precomplete: needs normalize and compute_gaps first");
    }
    Tape& tape = ctx.tape;
    const int T = panel.T(), F = panel.F();

    Tensor delta = tape.constant(panel.gaps);
    Tensor pre = add_rowvec(matmul(delta, decay.lin.w), decay.lin.b);
    Tensor gamma = exp(neg(relu(pre)));

    Mat mean_rows(T, F);
    for (int t = 0; t < T; ++t) {
        for (int f = 0; f < F; ++f) {
            mean_rows.at(t, f) = panel.stats[static_cast<std::size_t>(f)].norm_mean;
        }
    }
    Tensor last = tape.constant(last_observation_matrix(panel));
    Tensor means = tape.constant(std::move(mean_rows));
    Tensor filled = add(mul(gamma, last), mul(one_minus(gamma), means));

    Mat observed(T, F);
    for (int i = 0; i < observed.size(); ++i) {
        observed.data[i] = panel.obs_mask.data[i] * panel.norm_values.data[i];
    }
    Mat inv_mask(T, F);
    for (int i = 0; i < inv_mask.size(); ++i) inv_mask.data[i] = 1.0 - panel.obs_mask.data[i];

    Tensor x_tilde = add(tape.constant(std::move(observed)),
                         mul(tape.constant(std::move(inv_mask)), filled));
    return {x_tilde, gamma};
}

} // namespace bcatsi
