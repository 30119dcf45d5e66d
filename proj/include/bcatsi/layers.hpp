#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bcatsi/variational.hpp"

namespace bcatsi {

enum class WeightMode { Deterministic, Variational };

// One forward pass over one tape. Collects every variational sample taken
// during mounting so the complexity cost can be assembled afterwards.
struct PassContext {
    Tape& tape;
    std::vector<SampledTheta> samples;
};

// A single trainable tensor that is either a point estimate or a Gaussian
// variational posterior, behind one mounting interface.
class Weight {
public:
    Weight() = default;
    Weight(const std::string& name, int rows, int cols, WeightMode mode, const Prior* prior);

    bool bayesian() const { return mode_ == WeightMode::Variational; }
    const std::string& name() const { return name_; }
    int rows() const;
    int cols() const;

    // Point value in deterministic mode, mu in variational mode.
    Mat& center_values();
    const Mat& center_values() const;
    Mat& rho_values(); // variational mode only

    void init_uniform(RandomStream& rng, double bound, double rho_init);
    void set_center_constant(double v);

    void draw_noise(RandomStream& rng);
    void zero_noise();

    // Leaf in deterministic mode; cached-noise sample in variational mode
    // (registered with the pass for the complexity cost).
    Tensor mount(PassContext& ctx);

    void collect_params(std::vector<Parameter*>& out);
    void collect_named(std::map<std::string, Parameter*>& out);

private:
    std::string name_;
    WeightMode mode_ = WeightMode::Deterministic;
    Parameter det_;
    std::optional<VariationalTensor> vt_;
};

class LinearLayer {
public:
    LinearLayer() = default;
    // Weights are stored input-major (in x out); forward maps 1xIn rows to
    // 1xOut rows (or batches of rows).
    LinearLayer(const std::string& name, int in, int out, WeightMode mode, const Prior* prior);

    int in_dim() const { return in_; }
    int out_dim() const { return out_; }

    // Forces the given entries of W to zero after construction, after every
    // sample and after every optimizer step. Used with the identity pattern
    // to stop a feature from predicting itself.
    void set_zero_mask(Mat mask);
    void set_zero_diagonal(); // convenience for square layers
    const std::optional<Mat>& zero_mask() const { return mask_; }
    void reapply_zero_mask();

    void init_default(RandomStream& rng, double rho_init);

    struct Mounted {
        Tensor w; // mask already applied
        Tensor b;
    };
    Mounted mount(PassContext& ctx);
    static Tensor forward(const Mounted& m, Tensor x);

    Weight w;
    Weight b;

private:
    int in_ = 0;
    int out_ = 0;
    std::optional<Mat> mask_;
};

// Standard LSTM cell over the concatenation [x; h_prev]:
//   i, f, o = sigmoid(.), g = tanh(.), c = f.c_prev + i.g, h = o.tanh(c)
class LstmCell {
public:
    LstmCell() = default;
    LstmCell(const std::string& name, int in, int hidden, WeightMode mode, const Prior* prior);

    int in_dim() const { return in_; }
    int hidden_dim() const { return hidden_; }

    // Uniform(-1/sqrt(H), 1/sqrt(H)) gates, forget bias 1.
    void init_default(RandomStream& rng, double rho_init);

    struct Mounted {
        Tensor wi, bi, wf, bf, wg, bg, wo, bo;
    };
    Mounted mount(PassContext& ctx);
    static std::pair<Tensor, Tensor> step(const Mounted& m, Tensor x, Tensor h_prev,
                                          Tensor c_prev);

    Weight wi, bi, wf, bf, wg, bg, wo, bo;

private:
    int in_ = 0;
    int hidden_ = 0;
};

// Standard GRU cell:
//   z, r = sigmoid(.), hcand = tanh(W [x; r.h_prev] + b),
//   h = (1 - z).h_prev + z.hcand
class GruCell {
public:
    GruCell() = default;
    GruCell(const std::string& name, int in, int hidden, WeightMode mode, const Prior* prior);

    int in_dim() const { return in_; }
    int hidden_dim() const { return hidden_; }

    void init_default(RandomStream& rng, double rho_init);

    struct Mounted {
        Tensor wz, bz, wr, br, wh, bh;
    };
    Mounted mount(PassContext& ctx);
    static Tensor step(const Mounted& m, Tensor x, Tensor h_prev);

    Weight wz, bz, wr, br, wh, bh;

private:
    int in_ = 0;
    int hidden_ = 0;
};

// Linear layers with ReLU between them (none after the last).
class Mlp {
public:
    Mlp() = default;
    // dims = {in, hidden..., out}; modes has one entry per layer.
    Mlp(const std::string& name, const std::vector<int>& dims,
        const std::vector<WeightMode>& modes, const Prior* prior);

    void init_default(RandomStream& rng, double rho_init);

    struct Mounted {
        std::vector<LinearLayer::Mounted> layers;
    };
    Mounted mount(PassContext& ctx);
    static Tensor forward(const Mounted& m, Tensor x);

    std::vector<LinearLayer> layers;
};

} // namespace bcatsi
