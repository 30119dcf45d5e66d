#include "bcatsi/layers.hpp"

#include <cmath>

namespace bcatsi {

Weight::Weight(const std::string& name, int rows, int cols, WeightMode mode, const Prior* prior)
    : name_(name), mode_(mode) {
    if (mode == WeightMode::Deterministic) {
        det_ = Parameter(name, rows, cols);
    } else {
        if (prior == nullptr) throw ContractError("Weight: variational mode needs a prior");
        vt_.emplace(name, rows, cols, prior);
    }
}

int Weight::rows() const { return bayesian() ? vt_->rows() : det_.value.rows; }
int Weight::cols() const { return bayesian() ? vt_->cols() : det_.value.cols; }

Mat& Weight::center_values() { return bayesian() ? vt_->mu.value : det_.value; }
const Mat& Weight::center_values() const { return bayesian() ? vt_->mu.value : det_.value; }

Mat& Weight::rho_values() {
    if (!bayesian()) throw ContractError("Weight::rho_values: deterministic weight " + name_);
    return vt_->rho.value;
}

void Weight::init_uniform(RandomStream& rng, double bound, double rho_init) {
    if (bayesian()) {
        vt_->init_uniform(rng, bound, rho_init);
    } else {
        for (double& v : det_.value.data) v = rng.uniform(-bound, bound);
    }
}

void Weight::set_center_constant(double v) {
    center_values().fill(v);
}

void Weight::draw_noise(RandomStream& rng) {
    if (bayesian()) vt_->draw_noise(rng);
}

void Weight::zero_noise() {
    if (bayesian()) vt_->zero_noise();
}

Tensor Weight::mount(PassContext& ctx) {
    if (!bayesian()) return ctx.tape.leaf(det_);
    Tensor theta = vt_->mount(ctx.tape);
    ctx.samples.push_back({&*vt_, theta});
    return theta;
}

void Weight::collect_params(std::vector<Parameter*>& out) {
    if (bayesian()) {
        out.push_back(&vt_->mu);
        out.push_back(&vt_->rho);
    } else {
        out.push_back(&det_);
    }
}

void Weight::collect_named(std::map<std::string, Parameter*>& out) {
    if (bayesian()) {
        out[vt_->mu.name] = &vt_->mu;
        out[vt_->rho.name] = &vt_->rho;
    } else {
        out[det_.name] = &det_;
    }
}

// ---- linear ------------------------------------------------------------

LinearLayer::LinearLayer(const std::string& name, int in, int out, WeightMode mode,
                         const Prior* prior)
    : w(name + ".w", in, out, mode, prior), b(name + ".b", 1, out, mode, prior),
      in_(in), out_(out) {}

void LinearLayer::set_zero_mask(Mat mask) {
    if (mask.rows != in_ || mask.cols != out_) {
        throw ShapeError("set_zero_mask: mask is " + shape_str(mask.rows, mask.cols) +
                         ", layer is " + shape_str(in_, out_));
    }
    mask_ = std::move(mask);
    reapply_zero_mask();
}

void LinearLayer::set_zero_diagonal() {
    if (in_ != out_) throw ContractError("set_zero_diagonal: layer is not square");
    Mat m(in_, out_, 1.0);
    for (int i = 0; i < in_; ++i) m.at(i, i) = 0.0;
    set_zero_mask(std::move(m));
}

void LinearLayer::reapply_zero_mask() {
    if (!mask_) return;
    Mat& c = w.center_values();
    for (int i = 0; i < c.size(); ++i) c.data[i] *= mask_->data[i];
}

void LinearLayer::init_default(RandomStream& rng, double rho_init) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_));
    w.init_uniform(rng, bound, rho_init);
    b.init_uniform(rng, bound, rho_init);
    reapply_zero_mask();
}

LinearLayer::Mounted LinearLayer::mount(PassContext& ctx) {
    Mounted m;
    m.w = w.mount(ctx);
    if (mask_) {
        m.w = mul(m.w, ctx.tape.constant(*mask_));
    }
    m.b = b.mount(ctx);
    return m;
}

Tensor LinearLayer::forward(const Mounted& m, Tensor x) {
    return add_rowvec(matmul(x, m.w), m.b);
}

// ---- lstm ---------------------------------------------------------------

LstmCell::LstmCell(const std::string& name, int in, int hidden, WeightMode mode,
                   const Prior* prior)
    : wi(name + ".wi", in + hidden, hidden, mode, prior),
      bi(name + ".bi", 1, hidden, mode, prior),
      wf(name + ".wf", in + hidden, hidden, mode, prior),
      bf(name + ".bf", 1, hidden, mode, prior),
      wg(name + ".wg", in + hidden, hidden, mode, prior),
      bg(name + ".bg", 1, hidden, mode, prior),
      wo(name + ".wo", in + hidden, hidden, mode, prior),
      bo(name + ".bo", 1, hidden, mode, prior),
      in_(in), hidden_(hidden) {}

void LstmCell::init_default(RandomStream& rng, double rho_init) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_));
    for (Weight* g : {&wi, &bi, &wf, &wg, &bg, &wo, &bo}) {
        g->init_uniform(rng, bound, rho_init);
    }
    bf.init_uniform(rng, bound, rho_init);
    bf.set_center_constant(1.0);
}

LstmCell::Mounted LstmCell::mount(PassContext& ctx) {
    return Mounted{wi.mount(ctx), bi.mount(ctx), wf.mount(ctx), bf.mount(ctx),
                   wg.mount(ctx), bg.mount(ctx), wo.mount(ctx), bo.mount(ctx)};
}

std::pair<Tensor, Tensor> LstmCell::step(const Mounted& m, Tensor x, Tensor h_prev,
                                         Tensor c_prev) {
    Tensor xh = concat(x, h_prev, Axis::Cols);
    Tensor i = sigmoid(add_rowvec(matmul(xh, m.wi), m.bi));
    Tensor f = sigmoid(add_rowvec(matmul(xh, m.wf), m.bf));
    Tensor g = bcatsi::tanh(add_rowvec(matmul(xh, m.wg), m.bg));
    Tensor o = sigmoid(add_rowvec(matmul(xh, m.wo), m.bo));
    Tensor c = add(mul(f, c_prev), mul(i, g));
    Tensor h = mul(o, bcatsi::tanh(c));
    return {h, c};
}

// ---- gru ------------------------------------------------------------------

GruCell::GruCell(const std::string& name, int in, int hidden, WeightMode mode,
                 const Prior* prior)
    : wz(name + ".wz", in + hidden, hidden, mode, prior),
      bz(name + ".bz", 1, hidden, mode, prior),
      wr(name + ".wr", in + hidden, hidden, mode, prior),
      br(name + ".br", 1, hidden, mode, prior),
      wh(name + ".wh", in + hidden, hidden, mode, prior),
      bh(name + ".bh", 1, hidden, mode, prior),
      in_(in), hidden_(hidden) {}

void GruCell::init_default(RandomStream& rng, double rho_init) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_));
    for (Weight* g : {&wz, &bz, &wr, &br, &wh, &bh}) {
        g->init_uniform(rng, bound, rho_init);
    }
}

GruCell::Mounted GruCell::mount(PassContext& ctx) {
    return Mounted{wz.mount(ctx), bz.mount(ctx), wr.mount(ctx),
                   br.mount(ctx), wh.mount(ctx), bh.mount(ctx)};
}

Tensor GruCell::step(const Mounted& m, Tensor x, Tensor h_prev) {
    Tensor xh = concat(x, h_prev, Axis::Cols);
    Tensor z = sigmoid(add_rowvec(matmul(xh, m.wz), m.bz));
    Tensor r = sigmoid(add_rowvec(matmul(xh, m.wr), m.br));
    Tensor xrh = concat(x, mul(r, h_prev), Axis::Cols);
    Tensor hcand = bcatsi::tanh(add_rowvec(matmul(xrh, m.wh), m.bh));
    return add(mul(one_minus(z), h_prev), mul(z, hcand));
}

// ---- mlp -------------------------------------------------------------------

Mlp::Mlp(const std::string& name, const std::vector<int>& dims,
         const std::vector<WeightMode>& modes, const Prior* prior) {
    if (dims.size() < 2) throw ContractError("Mlp: need at least {in, out} dims");
    if (modes.size() != dims.size() - 1) {
        throw ContractError("Mlp: one mode per layer required");
    }
    layers.reserve(dims.size() - 1);
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        layers.emplace_back(name + ".l" + std::to_string(i), dims[i], dims[i + 1], modes[i],
                            prior);
    }
}

void Mlp::init_default(RandomStream& rng, double rho_init) {
    for (auto& l : layers) l.init_default(rng, rho_init);
}

Mlp::Mounted Mlp::mount(PassContext& ctx) {
    Mounted m;
    m.layers.reserve(layers.size());
    for (auto& l : layers) m.layers.push_back(l.mount(ctx));
    return m;
}

Tensor Mlp::forward(const Mounted& m, Tensor x) {
    Tensor h = x;
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        h = LinearLayer::forward(m.layers[i], h);
        if (i + 1 < m.layers.size()) h = relu(h);
    }
    return h;
}

} // namespace bcatsi
