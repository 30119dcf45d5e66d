#pragma once

#include <span>
#include <string>
#include <vector>

#include "bcatsi/random.hpp"
#include "bcatsi/tensor.hpp"

namespace bcatsi {

// Zero-mean weight prior: a single Gaussian or a two-component scale mixture.
struct Prior {
    enum class Kind { SingleGaussian, ScaleMixture };

    Kind kind = Kind::ScaleMixture;
    double tau = 1.0;       // SingleGaussian std
    double pi = 0.5;        // mixture weight of the wide component
    double sigma1 = 1.0;    // wide component std
    double sigma2 = 0.0025; // narrow component std

    static Prior single_gaussian(double tau);
    static Prior scale_mixture(double pi, double sigma1, double sigma2);
    void validate() const;
};

// Gaussian variational weight. Sampling is reparameterized:
//   theta = mu + softplus(rho) * eps,   eps ~ N(0, I)
// so gradients flow to both mu and rho through the tape.
struct VariationalTensor {
    Parameter mu;
    Parameter rho;
    Mat eps;   // last drawn noise
    Mat theta; // last sampled parameter values
    const Prior* prior = nullptr;

    VariationalTensor() = default;
    VariationalTensor(const std::string& name, int rows, int cols, const Prior* p);

    int rows() const { return mu.value.rows; }
    int cols() const { return mu.value.cols; }

    // mu ~ U(-bound, bound), rho constant
    void init_uniform(RandomStream& rng, double bound, double rho_init);

    void draw_noise(RandomStream& rng);
    void zero_noise(); // eps = 0, so the next mount yields theta = mu

    // Records theta on the tape using the cached noise and refreshes the
    // theta cache. draw_noise or zero_noise must have been called.
    Tensor mount(Tape& tape);

    // Fresh noise then mount.
    Tensor sample(Tape& tape, RandomStream& rng);

    // Sum over entries of the Gaussian log-density N(theta | mu, softplus(rho)).
    Tensor log_q(Tape& tape, Tensor theta_t);
    double log_q_value(const Mat& theta_v) const;
};

// Sum over entries of the prior log-density at theta. The mixture case uses a
// log-sum-exp formulation.
Tensor log_prior(Tape& tape, const Prior& prior, Tensor theta_t);
double log_prior_value(const Prior& prior, const Mat& theta_v);

struct SampledTheta {
    VariationalTensor* vt = nullptr;
    Tensor theta;
};

// sum_i [ log q(theta_i | mu_i, rho_i) - log P(theta_i) ]
Tensor complexity_cost(Tape& tape, std::span<VariationalTensor* const> vts,
                       std::span<const Tensor> thetas);
Tensor complexity_cost(Tape& tape, std::span<const SampledTheta> samples);
double complexity_cost_value(std::span<VariationalTensor* const> vts,
                             std::span<const Mat> thetas);

} // namespace bcatsi
