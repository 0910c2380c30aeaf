#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

namespace symflow {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Coefficients of the symmetric-matrix basis B1..B6 (see lattice.hpp).
using KVector = std::array<double, 6>;

inline constexpr int kNumAxes = 15;
inline constexpr int kNumSiteLabels = 13;
inline constexpr int kNumSpaceGroups = 230;

/// One operation label (1..13) per canonical symmetry axis.
struct SiteSymmetryCode {
  std::array<std::uint8_t, kNumAxes> labels{};

  SiteSymmetryCode() { labels.fill(1); }
  static SiteSymmetryCode identity() { return {}; }

  bool operator==(const SiteSymmetryCode&) const = default;
  auto operator<=>(const SiteSymmetryCode&) const = default;
};

/// Full periodic unit cell. Lattice rows are the cell vectors in Angstrom;
/// Cartesian positions are frac^T * lattice.
struct Crystal {
  Mat3 lattice = Mat3::Identity();
  std::vector<int> numbers;
  std::vector<Vec3> frac;

  std::size_t size() const { return numbers.size(); }
  double volume() const { return std::abs(lattice.determinant()); }
  Vec3 cartesian(const Vec3& f) const { return lattice.transpose() * f; }
};

struct AsymmetricSite {
  int number = 1;
  Vec3 frac = Vec3::Zero();
  SiteSymmetryCode site;
};

/// Space group, lattice coefficients and one representative per orbit.
struct AsymmetricUnit {
  int sg = 1;
  KVector k{};
  std::vector<AsymmetricSite> sites;
};

/// Reduces every component into [0, 1).
inline Vec3 wrap_unit(const Vec3& x) {
  Vec3 y;
  for (int i = 0; i < 3; ++i) {
    y[i] = x[i] - std::floor(x[i]);
    if (y[i] >= 1.0) y[i] = 0.0;
  }
  return y;
}

/// Component-wise nearest periodic image of a fractional difference.
inline Vec3 min_image(const Vec3& d) {
  return d - d.array().round().matrix();
}

}  // namespace symflow
