#pragma once

#include <array>

#include "symflow/crystal.hpp"

/// Lattice <-> k-vector codec. A lattice with cell vectors as the columns of
/// M (M = L^T for our row-major lattice) is written M = Q exp(S) with Q
/// orthogonal and S = sum_i k_i B_i symmetric, so k is invariant under
/// rigid rotations of the cell.
namespace symflow::lattice {

/// B1..B6, pairwise orthogonal under the Frobenius inner product.
const std::array<Mat3, 6>& basis_matrices();

/// Fixed k1 for trigonal and hexagonal groups: -ln(3)/4 gives a 120 degree
/// angle between the first two cell vectors.
double hexagonal_k1();

struct Encoding {
  KVector k{};
  Mat3 rotation = Mat3::Identity();  // Q, det +1
};

/// Throws InputError for singular or left-handed lattices.
Encoding encode_lattice(const Mat3& lattice);

/// Canonical gauge Q = I: the result is symmetric positive definite.
Mat3 decode_lattice(const KVector& k);

/// Overwrites the components fixed by the space group's crystal family.
KVector mask_k(KVector k, int sg);

/// Which of k1..k6 are free for this space group.
std::array<bool, 6> free_components(int sg);

/// Symmetric eigendecomposition by cyclic Jacobi rotations:
/// s = vectors * diag(values) * vectors^T.
struct SymmetricEigen {
  Eigen::Vector3d values;
  Mat3 vectors;
};
SymmetricEigen symmetric_eigen(const Mat3& s);

Mat3 symmetric_exp(const Mat3& s);
/// Requires a symmetric positive-definite argument.
Mat3 symmetric_log(const Mat3& s);

/// a, b, c in Angstrom and alpha, beta, gamma in degrees.
struct CellParameters {
  double a = 1, b = 1, c = 1;
  double alpha = 90, beta = 90, gamma = 90;
};

CellParameters cell_parameters(const Mat3& lattice);

/// Standard orientation: first vector along x, second in the xy-plane.
Mat3 lattice_from_parameters(const CellParameters& p);

}  // namespace symflow::lattice
