#include "symflow/bfn_discrete.hpp"

#include <cmath>
#include <stdexcept>

#include "symflow/error.hpp"

namespace symflow::bfn {

double disc_beta(double t, double beta1) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("process time must lie in [0, 1]");
  if (!(beta1 > 0.0)) throw std::domain_error("beta(1) must be positive");
  return t * t * beta1;
}

Eigen::VectorXd disc_sender_sample(int cls, double alpha, int num_classes, Rng& rng) {
  if (cls < 0 || cls >= num_classes) throw std::out_of_range("class index out of range");
  if (!(alpha >= 0.0)) throw std::domain_error("accuracy must be non-negative");
  const double k = num_classes;
  Eigen::VectorXd y = Eigen::VectorXd::Constant(num_classes, -alpha);
  y[cls] += alpha * k;
  if (alpha == 0.0) return y.setZero();
  const double sd = std::sqrt(alpha * k);
  for (int i = 0; i < num_classes; ++i) y[i] += sd * standard_normal(rng);
  return y;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    p.row(r) = (logits.row(r).array() - m).exp().matrix();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

DiscreteState disc_bayes_update(const DiscreteState& state, const Eigen::MatrixXd& y) {
  if (y.rows() != state.probs.rows() || y.cols() != state.probs.cols()) {
    throw std::invalid_argument("sender sample shape does not match the state");
  }
  // Working in log space keeps large accuracies from overflowing exp(y).
  Eigen::MatrixXd logits = y + state.probs.array().log().matrix();
  DiscreteState out{softmax_rows(logits)};
  for (Eigen::Index r = 0; r < out.probs.rows(); ++r) {
    const double s = out.probs.row(r).sum();
    if (!std::isfinite(s) || s <= 0.0) throw NumericalError("degenerate row in discrete update");
  }
  return out;
}

Eigen::VectorXd disc_flow_sample(int cls, double t, double beta1, int num_classes, Rng& rng) {
  const double beta = disc_beta(t, beta1);
  const Eigen::VectorXd y = disc_sender_sample(cls, beta, num_classes, rng);
  return softmax_rows(y.transpose()).transpose();
}

DiscreteState disc_output(const Eigen::MatrixXd& logits) { return {softmax_rows(logits)}; }

Eigen::MatrixXd expected_onehots(const DiscreteState& output) {
  const Eigen::Index k = output.classes();
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(output.variables(), k);
  for (Eigen::Index c = 0; c < k; ++c) {
    Eigen::RowVectorXd basis = Eigen::RowVectorXd::Zero(k);
    basis[c] = 1.0;
    e += output.probs.col(c) * basis;
  }
  return e;
}

double disc_loss(const Eigen::MatrixXd& onehots, const Eigen::MatrixXd& expected, double t,
                 double beta1, int num_classes) {
  if (onehots.rows() != expected.rows() || onehots.cols() != expected.cols()) {
    throw std::invalid_argument("one-hot and expectation shapes differ");
  }
  disc_beta(t, beta1);
  return num_classes * beta1 * t * (onehots - expected).squaredNorm();
}

int sample_class(const Eigen::Ref<const Eigen::RowVectorXd>& probs, Rng& rng) {
  const double u = uniform(rng) * probs.sum();
  double acc = 0.0;
  for (Eigen::Index c = 0; c < probs.size(); ++c) {
    acc += probs[c];
    if (u < acc) return static_cast<int>(c);
  }
  return static_cast<int>(probs.size() - 1);
}

Eigen::MatrixXd onehot_rows(const Eigen::VectorXi& classes, int num_classes) {
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(classes.size(), num_classes);
  for (Eigen::Index i = 0; i < classes.size(); ++i) e(i, classes[i]) = 1.0;
  return e;
}

}  // namespace symflow::bfn
