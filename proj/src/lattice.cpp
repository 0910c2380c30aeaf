#include "symflow/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "symflow/error.hpp"

namespace symflow::lattice {
namespace {

// Exact values at the angles that occur in conventional cells.
double cos_degrees(double deg) {
  if (deg == 90.0) return 0.0;
  if (deg == 120.0) return -0.5;
  if (deg == 60.0) return 0.5;
  return std::cos(deg * std::numbers::pi / 180.0);
}

}  // namespace

const std::array<Mat3, 6>& basis_matrices() {
  static const std::array<Mat3, 6> basis = [] {
    std::array<Mat3, 6> b;
    b[0] << 0, 1, 0, 1, 0, 0, 0, 0, 0;
    b[1] << 0, 0, 1, 0, 0, 0, 1, 0, 0;
    b[2] << 0, 0, 0, 0, 0, 1, 0, 1, 0;
    b[3] << 1, 0, 0, 0, -1, 0, 0, 0, 0;
    b[4] << 1, 0, 0, 0, 1, 0, 0, 0, -2;
    b[5] << 1, 0, 0, 0, 1, 0, 0, 0, 1;
    return b;
  }();
  return basis;
}

double hexagonal_k1() { return -std::log(3.0) / 4.0; }

SymmetricEigen symmetric_eigen(const Mat3& s) {
  Mat3 a = 0.5 * (s + s.transpose());
  Mat3 v = Mat3::Identity();
  for (int sweep = 0; sweep < 64; ++sweep) {
    const double off = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
    if (off <= 1e-300 || off <= 1e-32 * a.squaredNorm()) break;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        Mat3 j = Mat3::Identity();
        j(p, p) = c;
        j(q, q) = c;
        j(p, q) = sn;
        j(q, p) = -sn;
        a = j.transpose() * a * j;
        a(p, q) = a(q, p) = 0.0;
        v = v * j;
      }
    }
  }
  return {a.diagonal(), v};
}

Mat3 symmetric_exp(const Mat3& s) {
  const SymmetricEigen e = symmetric_eigen(s);
  return e.vectors * e.values.array().exp().matrix().asDiagonal() * e.vectors.transpose();
}

Mat3 symmetric_log(const Mat3& s) {
  const SymmetricEigen e = symmetric_eigen(s);
  if ((e.values.array() <= 0.0).any()) {
    throw NumericalError("matrix logarithm needs a positive-definite argument");
  }
  return e.vectors * e.values.array().log().matrix().asDiagonal() * e.vectors.transpose();
}

Encoding encode_lattice(const Mat3& lattice) {
  const double det = lattice.determinant();
  if (!std::isfinite(det) || det <= 1e-12 * std::pow(lattice.norm(), 3)) {
    throw InputError("lattice must be non-singular and right-handed");
  }
  const Mat3 m = lattice.transpose();
  const Mat3 s = 0.5 * symmetric_log(m.transpose() * m);
  Encoding out;
  const auto& basis = basis_matrices();
  for (int i = 0; i < 6; ++i) {
    out.k[i] = s.cwiseProduct(basis[i]).sum() / basis[i].squaredNorm();
  }
  out.rotation = m * symmetric_exp(-s);
  return out;
}

Mat3 decode_lattice(const KVector& k) {
  Mat3 s = Mat3::Zero();
  const auto& basis = basis_matrices();
  for (int i = 0; i < 6; ++i) s += k[i] * basis[i];
  const Mat3 e = symmetric_exp(s);
  return 0.5 * (e + e.transpose());
}

std::array<bool, 6> free_components(int sg) {
  if (sg < 1 || sg > kNumSpaceGroups) throw InputError("space group number must be in 1..230");
  if (sg <= 2) return {true, true, true, true, true, true};
  if (sg <= 15) return {false, true, false, true, true, true};
  if (sg <= 74) return {false, false, false, true, true, true};
  if (sg <= 142) return {false, false, false, false, true, true};
  if (sg <= 194) return {false, false, false, false, true, true};
  return {false, false, false, false, false, true};
}

KVector mask_k(KVector k, int sg) {
  const auto free = free_components(sg);
  for (int i = 0; i < 6; ++i) {
    if (!free[i]) k[i] = 0.0;
  }
  if (sg >= 143 && sg <= 194) k[0] = hexagonal_k1();
  return k;
}

CellParameters cell_parameters(const Mat3& lattice) {
  const Vec3 a = lattice.row(0), b = lattice.row(1), c = lattice.row(2);
  auto angle = [](const Vec3& u, const Vec3& v) {
    const double cosv = std::clamp(u.dot(v) / (u.norm() * v.norm()), -1.0, 1.0);
    return std::acos(cosv) * 180.0 / std::numbers::pi;
  };
  return {a.norm(), b.norm(), c.norm(), angle(b, c), angle(a, c), angle(a, b)};
}

Mat3 lattice_from_parameters(const CellParameters& p) {
  if (!(p.a > 0 && p.b > 0 && p.c > 0)) throw InputError("cell lengths must be positive");
  for (double ang : {p.alpha, p.beta, p.gamma}) {
    if (!(ang > 0 && ang < 180)) throw InputError("cell angles must lie in (0, 180) degrees");
  }
  const double ca = cos_degrees(p.alpha), cb = cos_degrees(p.beta);
  const double cg = cos_degrees(p.gamma), sg = std::sqrt(1.0 - cg * cg);
  const double cx = cb;
  const double cy = (ca - cb * cg) / sg;
  const double cz2 = 1.0 - cx * cx - cy * cy;
  if (cz2 <= 0.0) throw InputError("cell angles do not describe a valid cell");
  Mat3 l;
  l << p.a, 0, 0,
       p.b * cg, p.b * sg, 0,
       p.c * cx, p.c * cy, p.c * std::sqrt(cz2);
  return l;
}

}  // namespace symflow::lattice
