#include "symflow/bfn_continuous.hpp"

#include <cmath>
#include <stdexcept>

namespace symflow::bfn {
namespace {

void check_time(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("process time must lie in [0, 1]");
}

void check_sigma(double sigma) {
  if (!(sigma > 0.0 && sigma < 1.0)) throw std::domain_error("sigma must lie in (0, 1)");
}

}  // namespace

Accuracy cts_beta(double t, double sigma) {
  check_time(t);
  check_sigma(sigma);
  const double s2t = std::pow(sigma, 2.0 * t);
  return {1.0 / s2t - 1.0, 1.0 - s2t};
}

ContinuousState cts_bayes_update(const ContinuousState& state, const Eigen::VectorXd& y,
                                 double alpha) {
  if (y.size() != state.mean.size()) {
    throw std::invalid_argument("sender sample dimension does not match the state");
  }
  if (!(alpha > 0.0)) throw std::domain_error("accuracy must be positive");
  ContinuousState out;
  out.precision = state.precision + alpha;
  out.mean = (state.mean * state.precision + y * alpha) / out.precision;
  return out;
}

Eigen::VectorXd cts_sender_sample(const Eigen::VectorXd& x, double alpha, Rng& rng) {
  if (!(alpha > 0.0)) throw std::domain_error("accuracy must be positive");
  return x + standard_normal_vector(x.size(), rng) / std::sqrt(alpha);
}

ContinuousState cts_flow_from_noise(const Eigen::VectorXd& x, const Eigen::VectorXd& noise,
                                    double t, double sigma) {
  const Accuracy acc = cts_beta(t, sigma);
  ContinuousState out;
  out.mean = acc.gamma * x + std::sqrt(acc.gamma * (1.0 - acc.gamma)) * noise;
  out.precision = 1.0 + acc.beta;
  return out;
}

ContinuousState cts_flow_sample(const Eigen::VectorXd& x, double t, double sigma, Rng& rng) {
  return cts_flow_from_noise(x, standard_normal_vector(x.size(), rng), t, sigma);
}

Eigen::VectorXd cts_output(const ContinuousState& state, double t, double sigma,
                           const Eigen::VectorXd& eps_hat, bool periodic) {
  if (t <= kMinTime) throw std::domain_error("time too close to zero for a data estimate");
  if (eps_hat.size() != state.mean.size()) {
    throw std::invalid_argument("noise estimate dimension does not match the state");
  }
  const double gamma = cts_beta(t, sigma).gamma;
  Eigen::VectorXd x = state.mean / gamma - std::sqrt((1.0 - gamma) / gamma) * eps_hat;
  if (periodic) {
    x = x.array() - x.array().floor();
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (x[i] >= 1.0) x[i] = 0.0;
    }
  }
  return x;
}

Eigen::VectorXd cts_estimate(const ContinuousState& state, double t, double sigma,
                             const Eigen::VectorXd& eps_hat, bool periodic) {
  if (t <= kMinTime) return Eigen::VectorXd::Zero(state.mean.size());
  return cts_output(state, t, sigma, eps_hat, periodic);
}

double cts_loss_weight(double t, double sigma) {
  check_time(t);
  check_sigma(sigma);
  return -std::log(sigma) / std::pow(sigma, 2.0 * t);
}

double cts_loss(const Eigen::VectorXd& x, const Eigen::VectorXd& x_hat, double t, double sigma) {
  return cts_loss_weight(t, sigma) * (x - x_hat).squaredNorm();
}

double cts_loss_periodic(const Eigen::VectorXd& x, const Eigen::VectorXd& x_hat, double t,
                         double sigma) {
  const Eigen::ArrayXd d = (x - x_hat).array();
  return cts_loss_weight(t, sigma) * (d - d.round()).matrix().squaredNorm();
}

}  // namespace symflow::bfn
