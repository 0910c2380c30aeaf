#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "symflow/bfn_continuous.hpp"
#include "symflow/bfn_discrete.hpp"
#include "stats.hpp"

using namespace symflow;
using namespace symflow::bfn;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST_SUITE("bfn_continuous") {
  TEST_CASE("accuracy schedule values") {
    CHECK(cts_beta(0.0, 0.02).beta == 0.0);
    CHECK(cts_beta(0.0, 0.02).gamma == 0.0);
    CHECK(cts_beta(1.0, 0.02).beta == doctest::Approx(2499.0).epsilon(1e-12));
    CHECK(cts_beta(1.0, 0.02).gamma == doctest::Approx(1.0 - 4e-4).epsilon(1e-12));
    CHECK(cts_beta(0.5, 0.02).beta == doctest::Approx(49.0).epsilon(1e-12));
    CHECK_THROWS_AS(cts_beta(-0.1, 0.02), std::domain_error);
    CHECK_THROWS_AS(cts_beta(1.1, 0.02), std::domain_error);
  }

  TEST_CASE("gamma is strictly increasing and bounded") {
    double prev = -1.0;
    for (int i = 0; i <= 1000; ++i) {
      const Accuracy a = cts_beta(i / 1000.0, 0.02);
      CHECK(a.gamma > prev);
      CHECK(a.gamma <= 1.0 - 0.02 * 0.02 + 1e-15);
      CHECK(a.gamma == doctest::Approx(a.beta / (1.0 + a.beta)));
      prev = a.gamma;
    }
  }

  TEST_CASE("bayes update examples") {
    const ContinuousState s = cts_bayes_update(ContinuousState::prior(1), vec({1.0}), 1.0);
    CHECK(s.mean[0] == 0.5);
    CHECK(s.precision == 2.0);

    const ContinuousState start{vec({0.3, -0.7}), 3.5};
    const ContinuousState tiny = cts_bayes_update(start, vec({5.0, 5.0}), 1e-14);
    CHECK(tiny.mean[0] == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(tiny.precision == doctest::Approx(3.5));

    const VectorXd y = vec({1.7, -0.4});
    const ContinuousState two = cts_bayes_update(cts_bayes_update(start, y, 0.8), y, 2.3);
    const ContinuousState one = cts_bayes_update(start, y, 3.1);
    CHECK((two.mean - one.mean).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(two.precision == doctest::Approx(one.precision).epsilon(1e-15));

    CHECK_THROWS_AS(cts_bayes_update(start, vec({1.0}), 1.0), std::invalid_argument);
    CHECK_THROWS_AS(cts_bayes_update(start, y, 0.0), std::domain_error);
  }

  TEST_CASE("precision bookkeeping") {
    Rng rng(1);
    ContinuousState s = ContinuousState::prior(4);
    double sum = 1.0;
    for (int i = 0; i < 50; ++i) {
      const double alpha = uniform(rng, 0.01, 3.0);
      s = cts_bayes_update(s, standard_normal_vector(4, rng), alpha);
      sum += alpha;
      CHECK(s.precision >= 1.0);
    }
    CHECK(s.precision == sum);
  }

  TEST_CASE("flow sample moments") {
    Rng rng(2);
    const ContinuousState zero = cts_flow_sample(vec({0.4, 2.0}), 0.0, 0.02, rng);
    CHECK(zero.mean.isZero());
    CHECK(zero.precision == 1.0);

    const double x = 0.8;
    for (double t : {0.3, 1.0}) {
      std::vector<double> draws;
      for (int i = 0; i < 100000; ++i) draws.push_back(cts_flow_sample(vec({x}), t, 0.02, rng).mean[0]);
      const auto m = test::moments(draws);
      const double g = cts_beta(t, 0.02).gamma;
      CHECK(std::abs(m.mean - g * x) < 3.0 * m.mean_se);
      CHECK(std::abs(m.variance - g * (1.0 - g)) < 3.0 * m.variance_se);
    }
  }

  TEST_CASE("output estimate") {
    const ContinuousState s{vec({0.3, 0.9}), 10.0};
    const double g = cts_beta(0.6, 0.02).gamma;
    const VectorXd plain = cts_output(s, 0.6, 0.02, VectorXd::Zero(2), false);
    CHECK((plain - s.mean / g).cwiseAbs().maxCoeff() < 1e-15);

    // A raw estimate of 1.25 wraps to 0.25.
    const ContinuousState w{vec({1.25 * g}), 1.0};
    CHECK(cts_output(w, 0.6, 0.02, VectorXd::Zero(1), true)[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(cts_output(w, 0.6, 0.02, VectorXd::Zero(1), false)[0] == doctest::Approx(1.25).epsilon(1e-12));

    const VectorXd x = vec({-1.2, 0.5, 3.3});
    const VectorXd eps = vec({0.7, -1.1, 0.2});
    const ContinuousState f = cts_flow_from_noise(x, eps, 0.4, 0.02);
    CHECK((cts_output(f, 0.4, 0.02, eps, false) - x).cwiseAbs().maxCoeff() < 1e-12);

    CHECK_THROWS_AS(cts_output(s, kMinTime, 0.02, VectorXd::Zero(2), false), std::domain_error);
    CHECK(cts_estimate(s, 0.0, 0.02, VectorXd::Zero(2), false).isZero());
  }

  TEST_CASE("loss values") {
    const VectorXd x = vec({0.1, 0.2});
    CHECK(cts_loss(x, x, 0.7, 0.02) == 0.0);
    const VectorXd off = x + vec({1.0, 0.0});
    CHECK(cts_loss(x, off, 0.0, 0.02) == doctest::Approx(-std::log(0.02)));
    CHECK(cts_loss(x, off, 0.0, 0.02) == doctest::Approx(3.912).epsilon(1e-4));
    CHECK(cts_loss(x, off, 1.0, 0.02) == doctest::Approx(-std::log(0.02) / 4e-4));
    CHECK(cts_loss(x, off, 1.0, 0.02) == doctest::Approx(9780.8).epsilon(1e-4));
    // Periodic variant measures the nearest image.
    CHECK(cts_loss_periodic(vec({0.95}), vec({0.05}), 0.0, 0.02) ==
          doctest::Approx(-std::log(0.02) * 0.01));
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
      const VectorXd a = standard_normal_vector(3, rng), b = standard_normal_vector(3, rng);
      CHECK(cts_loss(a, b, uniform(rng), 0.02) > 0.0);
    }
  }
}

TEST_SUITE("bfn_discrete") {
  TEST_CASE("accuracy schedule values") {
    CHECK(disc_beta(0.0, 0.75) == 0.0);
    CHECK(disc_beta(1.0, kAtomBeta1) == 0.75);
    CHECK(disc_beta(0.5, kSiteBeta1) == 0.5);
    CHECK(disc_beta(0.3, 2.0) < disc_beta(0.31, 2.0));
  }

  TEST_CASE("sender sample moments") {
    Rng rng(4);
    CHECK(disc_sender_sample(1, 0.0, 4, rng).isZero());
    std::vector<double> y0, y1;
    for (int i = 0; i < 100000; ++i) {
      const VectorXd y = disc_sender_sample(0, 1.0, 2, rng);
      y0.push_back(y[0]);
      y1.push_back(y[1]);
    }
    const auto a = test::moments(y0), b = test::moments(y1);
    CHECK(std::abs(a.mean - 1.0) < 3.0 * a.mean_se);
    CHECK(std::abs(b.mean + 1.0) < 3.0 * b.mean_se);
    CHECK(std::abs(a.variance - 2.0) < 3.0 * a.variance_se);
    CHECK(std::abs(b.variance - 2.0) < 3.0 * b.variance_se);
  }

  TEST_CASE("bayes update examples") {
    const DiscreteState u = DiscreteState::uniform(1, 2);
    const DiscreteState same = disc_bayes_update(u, MatrixXd::Zero(1, 2));
    CHECK(same.probs.isApprox(u.probs));
    MatrixXd y(1, 2);
    y << std::log(3.0), 0.0;
    const DiscreteState r = disc_bayes_update(u, y);
    CHECK(r.probs(0, 0) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(r.probs(0, 1) == doctest::Approx(0.25).epsilon(1e-15));
    const DiscreteState shifted = disc_bayes_update(u, (y.array() + 17.0).matrix());
    CHECK((shifted.probs - r.probs).cwiseAbs().maxCoeff() < 1e-15);
  }

  TEST_CASE("rows stay stochastic") {
    Rng rng(5);
    DiscreteState s = DiscreteState::uniform(6, 13);
    for (int i = 0; i < 100; ++i) {
      MatrixXd y(6, 13);
      for (int r = 0; r < 6; ++r) y.row(r) = disc_sender_sample(r, uniform(rng, 0, 5), 13, rng).transpose();
      s = disc_bayes_update(s, y);
      CHECK((s.probs.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-9);
      CHECK(s.probs.minCoeff() >= 0.0);
    }
  }

  TEST_CASE("flow sample") {
    Rng rng(6);
    const VectorXd at0 = disc_flow_sample(2, 0.0, 0.75, 5, rng);
    for (int k = 0; k < 5; ++k) CHECK(at0[k] == 0.2);
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) sum += disc_flow_sample(0, 1.0, 0.75, 2, rng)[0];
    CHECK(sum / 100000 > 0.5);
    CHECK(disc_flow_sample(1, 1.0, 1e4, 3, rng)[1] > 1.0 - 1e-12);
  }

  TEST_CASE("output distribution") {
    const DiscreteState u = disc_output(MatrixXd::Zero(2, 4));
    CHECK((u.probs.array() - 0.25).abs().maxCoeff() < 1e-15);
    MatrixXd l(1, 2);
    l << std::log(3.0), 0.0;
    CHECK(disc_output(l).probs(0, 0) == doctest::Approx(0.75));
    CHECK((disc_output((l.array() - 4.2).matrix()).probs - disc_output(l).probs).cwiseAbs().maxCoeff() < 1e-15);
    MatrixXd big(1, 3);
    big << 1000.0, 999.0, -1000.0;
    const DiscreteState stable = disc_output(big);
    CHECK(stable.probs.allFinite());
    Eigen::Index arg;
    stable.probs.row(0).maxCoeff(&arg);
    CHECK(arg == 0);
  }

  TEST_CASE("loss values") {
    MatrixXd e(1, 2), half(1, 2);
    e << 1.0, 0.0;
    half << 0.5, 0.5;
    CHECK(disc_loss(e, e, 0.8, 0.75, 2) == 0.0);
    CHECK(disc_loss(e, half, 1.0, 0.75, 2) == doctest::Approx(0.75));
    CHECK(disc_loss(e, half, 0.0, 0.75, 2) == 0.0);
  }

  TEST_CASE("loss is invariant under a consistent class permutation") {
    Rng rng(7);
    const MatrixXd p = softmax_rows(MatrixXd::Random(4, 5) * 3.0);
    Eigen::VectorXi cls(4);
    cls << 0, 3, 2, 4;
    const MatrixXd e = onehot_rows(cls, 5);
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(5);
    perm.indices() << 2, 4, 0, 1, 3;
    CHECK(disc_loss(e * perm, p * perm, 0.6, 2.0, 5) == doctest::Approx(disc_loss(e, p, 0.6, 2.0, 5)));
  }

  TEST_CASE("expected one-hots equal the probabilities") {
    const DiscreteState p = disc_output(MatrixXd::Random(3, 13));
    CHECK((expected_onehots(p) - p.probs).cwiseAbs().maxCoeff() < 1e-15);
  }
}
