#include "bcatsi/variational.hpp"

#include <cmath>

namespace bcatsi {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836; // ln(2*pi)
}

Prior Prior::single_gaussian(double tau) {
    Prior p;
    p.kind = Kind::SingleGaussian;
    p.tau = tau;
    p.validate();
    return p;
}

Prior Prior::scale_mixture(double pi, double sigma1, double sigma2) {
    Prior p;
    p.kind = Kind::ScaleMixture;
    p.pi = pi;
    p.sigma1 = sigma1;
    p.sigma2 = sigma2;
    p.validate();
    return p;
}

void Prior::validate() const {
    if (kind == Kind::SingleGaussian) {
        if (!(tau > 0.0)) throw ContractError("Prior: tau must be positive");
    } else {
        if (!(sigma1 > sigma2) || !(sigma2 > 0.0)) {
            throw ContractError("Prior: need sigma1 > sigma2 > 0");
        }
        if (pi < 0.0 || pi > 1.0) throw ContractError("Prior: pi must be in [0, 1]");
    }
}

VariationalTensor::VariationalTensor(const std::string& name, int rows, int cols, const Prior* p)
    : mu(name + ".mu", rows, cols), rho(name + ".rho", rows, cols), prior(p) {}

void VariationalTensor::init_uniform(RandomStream& rng, double bound, double rho_init) {
    for (double& v : mu.value.data) v = rng.uniform(-bound, bound);
    rho.value.fill(rho_init);
}

void VariationalTensor::draw_noise(RandomStream& rng) {
    eps = Mat(rows(), cols());
    for (double& v : eps.data) v = rng.normal();
}

void VariationalTensor::zero_noise() {
    eps = Mat(rows(), cols());
}

Tensor VariationalTensor::mount(Tape& tape) {
    if (!eps.same_shape(mu.value)) {
        throw ContractError("VariationalTensor::mount: no noise drawn for " + mu.name);
    }
    Tensor mu_t = tape.leaf(mu);
    Tensor rho_t = tape.leaf(rho);
    Tensor sigma_t = softplus(rho_t);
    Tensor theta_t = add(mu_t, mul(sigma_t, tape.constant(eps)));
    theta = theta_t.value();
    return theta_t;
}

Tensor VariationalTensor::sample(Tape& tape, RandomStream& rng) {
    draw_noise(rng);
    return mount(tape);
}

Tensor VariationalTensor::log_q(Tape& tape, Tensor theta_t) {
    if (theta_t.rows != rows() || theta_t.cols != cols()) {
        throw ShapeError("log_q: theta is " + shape_str(theta_t.rows, theta_t.cols) +
                         ", mu is " + shape_str(rows(), cols()));
    }
    Tensor mu_t = tape.leaf(mu);
    Tensor rho_t = tape.leaf(rho);
    Tensor sigma_t = softplus(rho_t);
    Tensor d = sub(theta_t, mu_t);
    Tensor quad = div(mul(d, d), scale(mul(sigma_t, sigma_t), 2.0));
    Tensor per_entry = affine(add(log(sigma_t), quad), -1.0, -0.5 * kLog2Pi);
    return sum(per_entry);
}

double VariationalTensor::log_q_value(const Mat& theta_v) const {
    if (!theta_v.same_shape(mu.value)) {
        throw ShapeError("log_q_value: theta is " + shape_str(theta_v.rows, theta_v.cols) +
                         ", mu is " + shape_str(rows(), cols()));
    }
    double total = 0.0;
    for (int i = 0; i < theta_v.size(); ++i) {
        const double s = softplus_stable(rho.value.data[i]);
        const double d = theta_v.data[i] - mu.value.data[i];
        total += -0.5 * kLog2Pi - std::log(s) - d * d / (2.0 * s * s);
    }
    return total;
}

Tensor log_prior(Tape& tape, const Prior& prior, Tensor theta_t) {
    Tensor sq = mul(theta_t, theta_t);
    if (prior.kind == Prior::Kind::SingleGaussian) {
        const double tau = prior.tau;
        Tensor per_entry =
            affine(sq, -0.5 / (tau * tau), -0.5 * kLog2Pi - std::log(tau));
        return sum(per_entry);
    }
    // log( pi N(0,s1) + (1-pi) N(0,s2) ) via log-sum-exp
    const double s1 = prior.sigma1, s2 = prior.sigma2;
    Tensor la = affine(sq, -0.5 / (s1 * s1), std::log(prior.pi) - 0.5 * kLog2Pi - std::log(s1));
    Tensor lb =
        affine(sq, -0.5 / (s2 * s2), std::log(1.0 - prior.pi) - 0.5 * kLog2Pi - std::log(s2));
    Tensor m = emax(la, lb);
    Tensor lse = add(m, log(add(exp(sub(la, m)), exp(sub(lb, m)))));
    return sum(lse);
}

double log_prior_value(const Prior& prior, const Mat& theta_v) {
    double total = 0.0;
    if (prior.kind == Prior::Kind::SingleGaussian) {
        const double tau = prior.tau;
        for (double t : theta_v.data) {
            total += -0.5 * kLog2Pi - std::log(tau) - t * t / (2.0 * tau * tau);
        }
        return total;
    }
    const double s1 = prior.sigma1, s2 = prior.sigma2;
    const double ca = std::log(prior.pi) - 0.5 * kLog2Pi - std::log(s1);
    const double cb = std::log(1.0 - prior.pi) - 0.5 * kLog2Pi - std::log(s2);
    for (double t : theta_v.data) {
        const double la = ca - t * t / (2.0 * s1 * s1);
        const double lb = cb - t * t / (2.0 * s2 * s2);
        const double m = la >= lb ? la : lb;
        total += m + std::log(std::exp(la - m) + std::exp(lb - m));
    }
    return total;
}

Tensor complexity_cost(Tape& tape, std::span<VariationalTensor* const> vts,
                       std::span<const Tensor> thetas) {
    if (vts.size() != thetas.size()) {
        throw ContractError("complexity_cost: " + std::to_string(vts.size()) +
                            " parameters vs " + std::to_string(thetas.size()) + " samples");
    }
    if (vts.empty()) return tape.scalar(0.0);
    Tensor total = tape.scalar(0.0);
    for (std::size_t i = 0; i < vts.size(); ++i) {
        VariationalTensor& vt = *vts[i];
        if (thetas[i].rows != vt.rows() || thetas[i].cols != vt.cols()) {
            throw ContractError("complexity_cost: sample/parameter shape mismatch for " +
                                vt.mu.name);
        }
        Tensor term = sub(vt.log_q(tape, thetas[i]), log_prior(tape, *vt.prior, thetas[i]));
        total = add(total, term);
    }
    return total;
}

Tensor complexity_cost(Tape& tape, std::span<const SampledTheta> samples) {
    std::vector<VariationalTensor*> vts;
    std::vector<Tensor> thetas;
    vts.reserve(samples.size());
    thetas.reserve(samples.size());
    for (const SampledTheta& s : samples) {
        vts.push_back(s.vt);
        thetas.push_back(s.theta);
    }
    return complexity_cost(tape, vts, thetas);
}

double complexity_cost_value(std::span<VariationalTensor* const> vts,
                             std::span<const Mat> thetas) {
    if (vts.size() != thetas.size()) {
        throw ContractError("complexity_cost_value: " + std::to_string(vts.size()) +
                            " parameters vs " + std::to_string(thetas.size()) + " samples");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < vts.size(); ++i) {
        total += vts[i]->log_q_value(thetas[i]) - log_prior_value(*vts[i]->prior, thetas[i]);
    }
    return total;
}

} // namespace bcatsi
