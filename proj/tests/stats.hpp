#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "symflow/network.hpp"

namespace symflow::test {

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double mean_se = 0.0;
  double variance_se = 0.0;  // from the fourth central moment
};

inline Moments moments(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  Moments m;
  for (double x : v) m.mean += x;
  m.mean /= n;
  double m2 = 0.0, m4 = 0.0;
  for (double x : v) {
    const double d = (x - m.mean) * (x - m.mean);
    m2 += d;
    m4 += d * d;
  }
  m2 /= n;
  m4 /= n;
  m.variance = m2 * n / (n - 1.0);
  m.mean_se = std::sqrt(m.variance / n);
  m.variance_se = std::sqrt(std::max(m4 - m2 * m2, 0.0) / n);
  return m;
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r = 0.0;  // Pearson correlation
};

inline LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r = sxy / std::sqrt(sxx * syy);
  return f;
}

struct GradientCheck {
  double worst_relative = 0.0;
  std::string worst_name;
  std::size_t checked = 0;
  std::size_t below_noise = 0;  // components judged against the roundoff floor
  double noise = 0.0;           // absolute roundoff level of the central difference
};

/// Central differences over every parameter, relative error
/// |fd - g| / max(|fd|, |g|, noise / tol). `noise` is the roundoff level of
/// a central difference of a loss of size |L|, 10 eps |L| / step, so
/// components smaller than the difference can resolve are held to an
/// absolute error of `noise` instead.
inline GradientCheck finite_difference_check(const Network& net, const std::vector<double>& grad, double step,
                                             const std::function<double(const Network&)>& loss,
                                             double tol = 1e-4) {
  GradientCheck out;
  out.noise = 10.0 * std::numeric_limits<double>::epsilon() * std::abs(loss(net)) / step;
  const double floor = out.noise / tol;
  Network probe = net;
  for (const auto& b : net.blocks()) {
    for (std::size_t i = 0; i < b.size(); ++i) {
      const std::size_t k = b.offset + i;
      const double saved = probe.params()[k];
      probe.params()[k] = saved + step;
      const double up = loss(probe);
      probe.params()[k] = saved - step;
      const double down = loss(probe);
      probe.params()[k] = saved;
      const double fd = (up - down) / (2.0 * step);
      const double scale = std::max(std::abs(fd), std::abs(grad[k]));
      const double err = std::abs(fd - grad[k]) / std::max(scale, floor);
      ++out.checked;
      out.below_noise += scale < floor;
      if (err > out.worst_relative) {
        out.worst_relative = err;
        out.worst_name = b.name + "[" + std::to_string(i) + "] g=" + std::to_string(grad[k]) +
                         " fd=" + std::to_string(fd);
      }
    }
  }
  return out;
}

}  // namespace symflow::test
