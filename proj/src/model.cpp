#include "bcatsi/model.hpp"

#include <cmath>

namespace bcatsi {

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::Bayes: return "bayes";
        case Variant::PartialBayes: return "partial";
        case Variant::Catsi: return "catsi";
    }
    throw ContractError("variant_name: bad variant");
}

Variant variant_from_name(const std::string& name) {
    if (name == "bayes") return Variant::Bayes;
    if (name == "partial") return Variant::PartialBayes;
    if (name == "catsi") return Variant::Catsi;
    throw DataError("unknown variant '" + name + "' (want bayes|partial|catsi)");
}

void ModelConfig::validate() const {
    if (features < 2) throw ContractError("ModelConfig: need at least 2 features");
    if (hidden < 1 || ctx_mlp_dim < 1 || ctx_gru_dim < 1 || ctx_mlp_hidden < 1 ||
        cross_hidden < 1) {
        throw ContractError("ModelConfig: dimensions must be positive");
    }
    prior.validate();
}

namespace {

WeightMode mode_for(Variant v, bool bayes_in_full, bool bayes_in_partial) {
    switch (v) {
        case Variant::Bayes: return bayes_in_full ? WeightMode::Variational
                                                  : WeightMode::Deterministic;
        case Variant::PartialBayes: return bayes_in_partial ? WeightMode::Variational
                                                            : WeightMode::Deterministic;
        case Variant::Catsi: return WeightMode::Deterministic;
    }
    throw ContractError("mode_for: bad variant");
}

} // namespace

ImputationModel::ImputationModel(ModelConfig cfg, std::uint64_t init_seed) : cfg_(cfg) {
    cfg_.validate();
    const int F = cfg_.features;
    const int H = cfg_.hidden;
    const int C = cfg_.context_dim();
    const Prior* prior = &cfg_.prior;
    const Variant v = cfg_.variant;

    // Layer placement: the partial variant keeps Bayesian weights only in the
    // recurrent-output combination, the first statistics-MLP layer and the
    // first cross-feature MLP layer; the full variant replaces every linear
    // and LSTM weight. The context GRU is deterministic in both unless
    // overridden.
    const WeightMode full_only = mode_for(v, true, false);
    const WeightMode both = mode_for(v, true, true);
    const WeightMode gru_mode =
        cfg_.gru_bayesian ? full_only : WeightMode::Deterministic;

    decay = DecayModule(F);
    ctx_mlp = Mlp("ctx_mlp", {3 * F + 1, cfg_.ctx_mlp_hidden, cfg_.ctx_mlp_dim},
                  {both, full_only}, prior);
    ctx_gru = GruCell("ctx_gru", 3 * F, cfg_.ctx_gru_dim, gru_mode, prior);
    init_f = LinearLayer("init_f", C, H, full_only, prior);
    init_b = LinearLayer("init_b", C, H, full_only, prior);
    lstm_f = LstmCell("lstm_f", F + C, H, full_only, prior);
    lstm_b = LstmCell("lstm_b", F + C, H, full_only, prior);
    out = LinearLayer("out", 2 * H, F, both, prior);
    cross_pre = LinearLayer("cross_pre", F, F, full_only, prior);
    cross_mlp = Mlp("cross_mlp", {F, cfg_.cross_hidden, F}, {both, full_only}, prior);
    fuse = LinearLayer("fuse", 2 * F, F, full_only, prior);

    RandomStream rng(init_seed);
    ctx_mlp.init_default(rng, cfg_.rho_init);
    ctx_gru.init_default(rng, cfg_.rho_init);
    init_f.init_default(rng, cfg_.rho_init);
    init_b.init_default(rng, cfg_.rho_init);
    lstm_f.init_default(rng, cfg_.rho_init);
    lstm_b.init_default(rng, cfg_.rho_init);
    out.init_default(rng, cfg_.rho_init);
    cross_pre.init_default(rng, cfg_.rho_init);
    cross_pre.set_zero_diagonal();
    cross_mlp.init_default(rng, cfg_.rho_init);
    fuse.init_default(rng, cfg_.rho_init);
    zero_noise(); // a fresh model runs at theta = mu until noise is drawn
}

bool ImputationModel::has_variational() const {
    return cfg_.variant != Variant::Catsi || cfg_.gru_bayesian;
}

namespace {

template <typename Fn>
void for_each_weight(ImputationModel& m, Fn&& fn) {
    fn(m.decay.lin.w);
    fn(m.decay.lin.b);
    for (auto& l : m.ctx_mlp.layers) {
        fn(l.w);
        fn(l.b);
    }
    for (Weight* w : {&m.ctx_gru.wz, &m.ctx_gru.bz, &m.ctx_gru.wr, &m.ctx_gru.br,
                      &m.ctx_gru.wh, &m.ctx_gru.bh}) {
        fn(*w);
    }
    fn(m.init_f.w);
    fn(m.init_f.b);
    fn(m.init_b.w);
    fn(m.init_b.b);
    for (LstmCell* cell : {&m.lstm_f, &m.lstm_b}) {
        for (Weight* w : {&cell->wi, &cell->bi, &cell->wf, &cell->bf, &cell->wg, &cell->bg,
                          &cell->wo, &cell->bo}) {
            fn(*w);
        }
    }
    fn(m.out.w);
    fn(m.out.b);
    fn(m.cross_pre.w);
    fn(m.cross_pre.b);
    for (auto& l : m.cross_mlp.layers) {
        fn(l.w);
        fn(l.b);
    }
    fn(m.fuse.w);
    fn(m.fuse.b);
}

} // namespace

void ImputationModel::draw_noise(RandomStream& rng) {
    for_each_weight(*this, [&](Weight& w) { w.draw_noise(rng); });
}

void ImputationModel::zero_noise() {
    for_each_weight(*this, [&](Weight& w) { w.zero_noise(); });
}

std::vector<Parameter*> ImputationModel::trainables() {
    std::vector<Parameter*> out_params;
    for_each_weight(*this, [&](Weight& w) { w.collect_params(out_params); });
    return out_params;
}

std::map<std::string, Parameter*> ImputationModel::named_tensors() {
    std::map<std::string, Parameter*> out_map;
    for_each_weight(*this, [&](Weight& w) { w.collect_named(out_map); });
    return out_map;
}

void ImputationModel::reapply_zero_masks() {
    cross_pre.reapply_zero_mask();
}

void ImputationModel::mount_all(PassContext& ctx) {
    for_each_weight(*this, [&](Weight& w) { (void)w.mount(ctx); });
}

Tensor build_context(PassContext& ctx, const TimeSeriesPanel& panel, Tensor x_tilde,
                     Mlp::Mounted& mlp, GruCell::Mounted& gru, double t_max_norm) {
    const int T = panel.T(), F = panel.F();
    if (T == 0) throw DataError("build_context: empty panel " + panel.id);
    Tape& tape = ctx.tape;

    Mat summary(1, 3 * F + 1);
    for (int f = 0; f < F; ++f) {
        const FeatureStats& s = panel.stats[static_cast<std::size_t>(f)];
        summary.at(0, f) = s.norm_mean;
        summary.at(0, F + f) = s.norm_std;
        summary.at(0, 2 * F + f) = s.missing_rate;
    }
    summary.at(0, 3 * F) = T / t_max_norm;
    Tensor r_mlp = Mlp::forward(mlp, tape.constant(std::move(summary)));

    Tensor h = tape.constant(Mat(1, gru.bz.cols));
    for (int t = 0; t < T; ++t) {
        Mat extra(1, 2 * F);
        for (int f = 0; f < F; ++f) {
            extra.at(0, f) = panel.obs_mask.at(t, f);
            extra.at(0, F + f) = panel.gaps.at(t, f);
        }
        Tensor in = concat(row(x_tilde, t), tape.constant(std::move(extra)), Axis::Cols);
        h = GruCell::step(gru, in, h);
    }
    return concat(r_mlp, h, Axis::Cols);
}

Tensor recurrent_impute(PassContext& ctx, Tensor x_tilde, Tensor context,
                        LinearLayer::Mounted& init_f, LinearLayer::Mounted& init_b,
                        LstmCell::Mounted& fwd, LstmCell::Mounted& bwd,
                        LinearLayer::Mounted& out) {
    const int T = x_tilde.rows;
    if (T < 2) throw DataError("recurrent_impute: need T >= 2, got T = " + std::to_string(T));

    Tensor hf = LinearLayer::forward(init_f, context);
    Tensor cf = bcatsi::tanh(hf);
    Tensor hb = LinearLayer::forward(init_b, context);
    Tensor cb = bcatsi::tanh(hb);

    // fwd_h[k] has consumed inputs 1..k; bwd_h[j] has consumed T..T-j+1
    // (1-indexed). The output at step t combines fwd_h[t-1] and bwd_h[T-t],
    // so neither side has seen the step it predicts.
    std::vector<Tensor> fwd_h(static_cast<std::size_t>(T));
    std::vector<Tensor> bwd_h(static_cast<std::size_t>(T));
    fwd_h[0] = hf;
    bwd_h[0] = hb;
    for (int k = 1; k < T; ++k) {
        Tensor in = concat(row(x_tilde, k - 1), context, Axis::Cols);
        auto [h, c] = LstmCell::step(fwd, in, hf, cf);
        hf = h;
        cf = c;
        fwd_h[static_cast<std::size_t>(k)] = h;
    }
    for (int j = 1; j < T; ++j) {
        Tensor in = concat(row(x_tilde, T - j), context, Axis::Cols);
        auto [h, c] = LstmCell::step(bwd, in, hb, cb);
        hb = h;
        cb = c;
        bwd_h[static_cast<std::size_t>(j)] = h;
    }

    std::vector<Tensor> rows;
    rows.reserve(static_cast<std::size_t>(T));
    for (int t = 1; t <= T; ++t) {
        Tensor both = concat(fwd_h[static_cast<std::size_t>(t - 1)],
                             bwd_h[static_cast<std::size_t>(T - t)], Axis::Cols);
        rows.push_back(LinearLayer::forward(out, both));
    }
    return stack_rows(ctx.tape, rows);
}

Tensor cross_feature_impute(PassContext& ctx, Tensor x_tilde, LinearLayer::Mounted& pre,
                            Mlp::Mounted& mlp) {
    const int T = x_tilde.rows;
    std::vector<Tensor> rows;
    rows.reserve(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
        Tensor v = LinearLayer::forward(pre, row(x_tilde, t));
        rows.push_back(Mlp::forward(mlp, v));
    }
    return stack_rows(ctx.tape, rows);
}

Fusion fuse_outputs(PassContext& ctx, Tensor x_hat, Tensor z_hat, Tensor gate_input,
                    const Mat& obs_mask, LinearLayer::Mounted& fuse) {
    const int T = x_hat.rows, F = x_hat.cols;
    Tape& tape = ctx.tape;
    std::vector<Tensor> rows;
    rows.reserve(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
        Mat mrow(1, F);
        for (int f = 0; f < F; ++f) mrow.at(0, f) = obs_mask.at(t, f);
        Tensor in = concat(row(gate_input, t), tape.constant(std::move(mrow)), Axis::Cols);
        rows.push_back(sigmoid(LinearLayer::forward(fuse, in)));
    }
    Tensor beta = stack_rows(tape, rows);
    Tensor y = add(mul(beta, z_hat), mul(one_minus(beta), x_hat));
    return {beta, y};
}

Mat final_output(const TimeSeriesPanel& panel, const Mat& y_norm) {
    if (!panel.normalized) throw ContractError("final_output: normalize first");
    const int T = panel.T(), F = panel.F();
    Mat out(T, F);
    for (int t = 0; t < T; ++t) {
        for (int f = 0; f < F; ++f) {
            out.at(t, f) = panel.obs_mask.at(t, f) == 1.0
                               ? panel.values.at(t, f)
                               : denormalize_value(panel.stats[static_cast<std::size_t>(f)],
                                                   y_norm.at(t, f));
        }
    }
    return out;
}

ImputationModel::Forward ImputationModel::forward(PassContext& ctx,
                                                  const TimeSeriesPanel& panel) {
    if (panel.F() != cfg_.features) {
        throw ShapeError("forward: panel has " + std::to_string(panel.F()) +
                         " features, model wants " + std::to_string(cfg_.features));
    }
    if (panel.T() < 2) {
        throw DataError("forward: need T >= 2, got T = " + std::to_string(panel.T()));
    }

    auto decay_m = decay.mount(ctx);
    auto ctx_mlp_m = ctx_mlp.mount(ctx);
    auto ctx_gru_m = ctx_gru.mount(ctx);
    auto init_f_m = init_f.mount(ctx);
    auto init_b_m = init_b.mount(ctx);
    auto lstm_f_m = lstm_f.mount(ctx);
    auto lstm_b_m = lstm_b.mount(ctx);
    auto out_m = out.mount(ctx);
    auto cross_pre_m = cross_pre.mount(ctx);
    auto cross_mlp_m = cross_mlp.mount(ctx);
    auto fuse_m = fuse.mount(ctx);

    Forward fw;
    auto pre = decay_precomplete(ctx, panel, decay_m);
    fw.x_tilde = pre.x_tilde;
    fw.gamma = pre.gamma;
    fw.context = build_context(ctx, panel, fw.x_tilde, ctx_mlp_m, ctx_gru_m, cfg_.t_max_norm);
    fw.x_hat = recurrent_impute(ctx, fw.x_tilde, fw.context, init_f_m, init_b_m, lstm_f_m,
                                lstm_b_m, out_m);
    fw.z_hat = cross_feature_impute(ctx, fw.x_tilde, cross_pre_m, cross_mlp_m);
    Tensor gate = cfg_.fusion_uses_raw_gaps ? ctx.tape.constant(panel.gaps) : fw.gamma;
    auto fusion = fuse_outputs(ctx, fw.x_hat, fw.z_hat, gate, panel.obs_mask, fuse_m);
    fw.beta = fusion.beta;
    fw.y = fusion.y;
    return fw;
}

ImputationBundle ImputationModel::impute(const TimeSeriesPanel& panel) {
    Tape tape;
    PassContext ctx{tape, {}};
    Forward fw = forward(ctx, panel);
    ImputationBundle b;
    b.x_hat = fw.x_hat.value();
    b.z_hat = fw.z_hat.value();
    b.beta = fw.beta.value();
    b.y = fw.y.value();
    b.output = final_output(panel, b.y);
    return b;
}

} // namespace bcatsi
