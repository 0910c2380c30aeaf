#pragma once

#include <Eigen/Core>

#include "symflow/random.hpp"

/// Bayesian flow for categorical variables (atom types, site-symmetry
/// labels). Each row of a state is one variable's probability vector over
/// K classes; accuracy schedule beta(t) = t^2 beta(1).
namespace symflow::bfn {

inline constexpr double kAtomBeta1 = 0.75;
inline constexpr double kSiteBeta1 = 2.0;

struct DiscreteSchedule {
  double beta1 = kAtomBeta1;
};

struct DiscreteState {
  Eigen::MatrixXd probs;  // variables x classes

  static DiscreteState uniform(Eigen::Index variables, Eigen::Index classes) {
    return {Eigen::MatrixXd::Constant(variables, classes, 1.0 / static_cast<double>(classes))};
  }
  Eigen::Index variables() const { return probs.rows(); }
  Eigen::Index classes() const { return probs.cols(); }
};

double disc_beta(double t, double beta1);

/// y ~ N(alpha (K e_cls - 1), alpha K I); `cls` is a 0-based class index.
Eigen::VectorXd disc_sender_sample(int cls, double alpha, int num_classes, Rng& rng);

/// Row-wise theta' = exp(y) theta / sum_k exp(y_k) theta_k. `y` has the shape of `state.probs`.
DiscreteState disc_bayes_update(const DiscreteState& state, const Eigen::MatrixXd& y);

/// One variable's flow-distribution draw: softmax(y), y ~ N(beta (K e - 1), beta K I).
Eigen::VectorXd disc_flow_sample(int cls, double t, double beta1, int num_classes, Rng& rng);

/// Row-wise max-shifted softmax.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);

/// Output distribution from network logits.
DiscreteState disc_output(const Eigen::MatrixXd& logits);

/// Expected one-hot vectors under the output distribution, sum_k p(k) e_k.
Eigen::MatrixXd expected_onehots(const DiscreteState& output);

/// K beta(1) t |e - e_hat|^2 summed over all variables.
double disc_loss(const Eigen::MatrixXd& onehots, const Eigen::MatrixXd& expected, double t,
                 double beta1, int num_classes);

/// Draws a class index from a probability row.
int sample_class(const Eigen::Ref<const Eigen::RowVectorXd>& probs, Rng& rng);

Eigen::MatrixXd onehot_rows(const Eigen::VectorXi& classes, int num_classes);

}  // namespace symflow::bfn
