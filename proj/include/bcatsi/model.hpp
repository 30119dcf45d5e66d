#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bcatsi/panel.hpp"

namespace bcatsi {

enum class Variant { Bayes, PartialBayes, Catsi };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct ModelConfig {
    int features = 0;
    int hidden = 32;          // H, recurrent hidden size per direction
    int ctx_mlp_dim = 8;      // statistics embedding size
    int ctx_gru_dim = 8;      // sequence embedding size
    int ctx_mlp_hidden = 16;
    int cross_hidden = 32;
    Variant variant = Variant::Bayes;
    bool gru_bayesian = false;      // the context GRU stays deterministic by default
    bool fusion_uses_raw_gaps = false; // feed raw gaps instead of decay factors to the gate
    Prior prior = Prior::scale_mixture(0.5, 1.0, 0.0025);
    double rho_init = -5.0;
    double t_max_norm = 2000.0; // scales the series-length summary statistic

    int context_dim() const { return ctx_mlp_dim + ctx_gru_dim; }
    void validate() const;
};

// Value-level snapshot of one forward pass over one panel.
struct ImputationBundle {
    Mat x_hat;  // recurrent imputation, normalized space
    Mat z_hat;  // cross-feature imputation, normalized space
    Mat beta;   // fusion weights in (0, 1)
    Mat y;      // final imputation, normalized space
    Mat output; // raw units: original value where observed, imputation elsewhere
};

// Bidirectional context-aware recurrent imputation fused with cross-feature
// imputation. Layer modes (point vs variational) follow the variant.
class ImputationModel {
public:
    ImputationModel(ModelConfig cfg, std::uint64_t init_seed);

    const ModelConfig& config() const { return cfg_; }
    bool has_variational() const;

    void draw_noise(RandomStream& rng);
    void zero_noise(); // next pass runs at theta = mu

    std::vector<Parameter*> trainables();
    std::map<std::string, Parameter*> named_tensors();
    void reapply_zero_masks();

    struct Forward {
        Tensor x_tilde;
        Tensor gamma;
        Tensor context; // 1 x C
        Tensor x_hat;   // T x F
        Tensor z_hat;   // T x F
        Tensor beta;    // T x F
        Tensor y;       // T x F
    };
    Forward forward(PassContext& ctx, const TimeSeriesPanel& panel);

    // Mounts every weight on the pass without running a panel, registering
    // the variational samples; used to assemble the complexity cost with the
    // same cached noise as the likelihood passes.
    void mount_all(PassContext& ctx);

    // Forward with the cached noise (or at the mean after zero_noise) and
    // denormalized passthrough output.
    ImputationBundle impute(const TimeSeriesPanel& panel);

    DecayModule decay;
    Mlp ctx_mlp;          // (3F + 1) -> ctx_mlp_hidden -> ctx_mlp_dim
    GruCell ctx_gru;      // input [x_tilde_t; m_t; delta_t]
    LinearLayer init_f;   // C -> H
    LinearLayer init_b;   // C -> H
    LstmCell lstm_f;      // input [x_tilde_t; r]
    LstmCell lstm_b;
    LinearLayer out;      // 2H -> F
    LinearLayer cross_pre; // F -> F, zero diagonal
    Mlp cross_mlp;        // F -> cross_hidden -> F
    LinearLayer fuse;     // 2F -> F

private:
    ModelConfig cfg_;
};

// The architecture pieces, exposed for direct exercise in tests.

// r = [MLP(mean, std, missing-rate, length) ; final GRU hidden state]
Tensor build_context(PassContext& ctx, const TimeSeriesPanel& panel, Tensor x_tilde,
                     Mlp::Mounted& mlp, GruCell::Mounted& gru, double t_max_norm);

// Bidirectional recurrence; imputations are produced at every cell and the
// loss decides which matter. Requires T >= 2.
Tensor recurrent_impute(PassContext& ctx, Tensor x_tilde, Tensor context,
                        LinearLayer::Mounted& init_f, LinearLayer::Mounted& init_b,
                        LstmCell::Mounted& fwd, LstmCell::Mounted& bwd,
                        LinearLayer::Mounted& out);

// Per-step zero-diagonal linear map followed by an MLP, so feature f's
// estimate never reads its own input column.
Tensor cross_feature_impute(PassContext& ctx, Tensor x_tilde, LinearLayer::Mounted& pre,
                            Mlp::Mounted& mlp);

struct Fusion {
    Tensor beta;
    Tensor y;
};
Fusion fuse_outputs(PassContext& ctx, Tensor x_hat, Tensor z_hat, Tensor gate_input,
                    const Mat& obs_mask, LinearLayer::Mounted& fuse);

// Raw-unit panel with observed cells passed through bit-exact and normalized
// imputations denormalized elsewhere.
Mat final_output(const TimeSeriesPanel& panel, const Mat& y_norm);

} // namespace bcatsi
