#pragma once

#include <Eigen/Core>

#include "symflow/random.hpp"

/// Bayesian flow for continuous variables (fractional coordinates and the
/// lattice k-vector). Input distribution N(mean, 1/precision * I), prior
/// {0, 1}, accuracy schedule beta(t) = sigma^(-2t) - 1.
namespace symflow::bfn {

/// Below this time gamma(t) is too small for the noise-to-data map to be
/// usable; estimates fall back to the prior mean.
inline constexpr double kMinTime = 1e-4;
inline constexpr double kDefaultSigma = 0.02;

struct ContinuousSchedule {
  double sigma = kDefaultSigma;
};

struct ContinuousState {
  Eigen::VectorXd mean;
  double precision = 1.0;

  static ContinuousState prior(Eigen::Index dim) {
    return {Eigen::VectorXd::Zero(dim), 1.0};
  }
};

struct Accuracy {
  double beta = 0.0;
  double gamma = 0.0;
};

/// beta(t) = sigma^(-2t) - 1 and gamma(t) = beta / (1 + beta) = 1 - sigma^(2t).
Accuracy cts_beta(double t, double sigma);

/// Posterior after observing y with accuracy alpha.
ContinuousState cts_bayes_update(const ContinuousState& state, const Eigen::VectorXd& y,
                                 double alpha);

/// y ~ N(x, 1/alpha * I).
Eigen::VectorXd cts_sender_sample(const Eigen::VectorXd& x, double alpha, Rng& rng);

/// Draws the input parameters at time t directly:
/// mean ~ N(gamma x, gamma (1 - gamma) I), precision = 1 + beta.
ContinuousState cts_flow_sample(const Eigen::VectorXd& x, double t, double sigma, Rng& rng);

/// Same draw with the standard-normal noise supplied by the caller, so the
/// training target (the noise) is known.
ContinuousState cts_flow_from_noise(const Eigen::VectorXd& x, const Eigen::VectorXd& noise,
                                    double t, double sigma);

/// Data estimate from a noise estimate: mean/gamma - sqrt((1-gamma)/gamma) eps_hat.
/// With `periodic` the estimate is reduced mod 1 into [0, 1).
/// Throws std::domain_error for t <= kMinTime.
Eigen::VectorXd cts_output(const ContinuousState& state, double t, double sigma,
                           const Eigen::VectorXd& eps_hat, bool periodic);

/// cts_output, except that for t <= kMinTime the prior mean (zero) is returned.
Eigen::VectorXd cts_estimate(const ContinuousState& state, double t, double sigma,
                             const Eigen::VectorXd& eps_hat, bool periodic);

/// Continuous-time loss integrand -ln(sigma) * |x - x_hat|^2 / sigma^(2t).
double cts_loss(const Eigen::VectorXd& x, const Eigen::VectorXd& x_hat, double t, double sigma);

/// As cts_loss, with the residual taken to its nearest periodic image.
double cts_loss_periodic(const Eigen::VectorXd& x, const Eigen::VectorXd& x_hat, double t,
                         double sigma);

/// Weight -ln(sigma) / sigma^(2t) multiplying the squared residual.
double cts_loss_weight(double t, double sigma);

}  // namespace symflow::bfn
