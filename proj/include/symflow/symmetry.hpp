#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string_view>
#include <vector>

#include "symflow/crystal.hpp"

namespace symflow {

inline constexpr double kDefaultTolerance = 1e-3;

/// Affine operation x -> R x + t on fractional coordinates. Translations of
/// every conventional-setting operation are multiples of 1/24, so they are
/// stored exactly as numerators over 24, reduced into [0, 24).
struct SymOp {
  std::array<int, 9> rot{1, 0, 0, 0, 1, 0, 0, 0, 1};  // row-major
  std::array<int, 3> trans24{0, 0, 0};

  static constexpr int kDenominator = 24;

  static SymOp identity() { return {}; }

  int r(int i, int j) const { return rot[3 * i + j]; }
  Mat3 rotation() const;
  Vec3 translation() const;
  int determinant() const;
  int trace() const { return rot[0] + rot[4] + rot[8]; }

  Vec3 apply(const Vec3& x) const;
  /// (*this) o rhs, i.e. apply rhs first.
  SymOp compose(const SymOp& rhs) const;
  SymOp inverse() const;

  bool operator==(const SymOp&) const = default;
  auto operator<=>(const SymOp&) const = default;
};

/// Stabilizer subgroups of one space group that are conjugate to each other.
/// Each member subgroup comes with one of its fixed points and its code.
struct SiteClass {
  int index = 0;
  int order = 1;                              // |stabilizer|
  std::vector<std::vector<SymOp>> subgroups;  // distinct conjugates
  std::vector<Vec3> fixed_points;             // one per subgroup
  std::vector<SiteSymmetryCode> codes;        // one per subgroup
};

/// Operator lists (general positions of the conventional setting) for the
/// 230 space groups. Site-symmetry classes are derived lazily per group and
/// cached; the cache is safe to populate from several threads.
class SpaceGroupTable {
 public:
  /// Parses the text format of data/spacegroup_ops.txt and verifies that every
  /// list contains the identity and is closed under composition.
  static std::shared_ptr<const SpaceGroupTable> parse(std::string_view text,
                                                      std::string_view source);
  static std::shared_ptr<const SpaceGroupTable> load(const std::filesystem::path& path);
  /// The table compiled into the library.
  static const SpaceGroupTable& builtin();

  const std::vector<SymOp>& ops(int sg) const;
  /// Index of `op` in ops(sg), or -1.
  int index_of(int sg, const SymOp& op) const;
  const std::vector<SiteClass>& site_classes(int sg) const;

  SpaceGroupTable(const SpaceGroupTable&) = delete;
  SpaceGroupTable& operator=(const SpaceGroupTable&) = delete;

 private:
  SpaceGroupTable() = default;

  std::array<std::vector<SymOp>, kNumSpaceGroups + 1> ops_;
  std::array<std::map<SymOp, int>, kNumSpaceGroups + 1> index_;
  mutable std::array<std::once_flag, kNumSpaceGroups + 1> class_once_;
  mutable std::array<std::vector<SiteClass>, kNumSpaceGroups + 1> classes_;
};

const std::vector<SymOp>& spacegroup_ops(int sg);

/// True when `ops` is closed under composition, contains the identity and
/// every element's inverse.
bool is_group(std::span<const SymOp> ops);

/// Operations g with |g x - x| < tol (fractional, minimum image).
std::vector<SymOp> stabilizer(const Vec3& x, int sg, double tol = kDefaultTolerance,
                              const SpaceGroupTable& table = SpaceGroupTable::builtin());

/// Distinct images of x under the group, wrapped into [0, 1).
std::vector<Vec3> orbit(const Vec3& x, int sg, double tol = kDefaultTolerance,
                        const SpaceGroupTable& table = SpaceGroupTable::builtin());

/// Fractional minimum-image distance.
double periodic_distance(const Vec3& a, const Vec3& b);
/// Cartesian minimum-image distance (nearest of the 27 neighbouring images).
double periodic_distance(const Vec3& a, const Vec3& b, const Mat3& lattice);

// ---------------------------------------------------------------------------
// Site symmetry

/// Canonical axes and operation labels, read from data/site_symmetry_axes.txt.
struct SiteVocabulary {
  std::array<std::array<int, 3>, kNumAxes> axes{};
  std::array<std::string, kNumSiteLabels> symbols;

  static const SiteVocabulary& builtin();
  static SiteVocabulary parse(std::string_view text, std::string_view source);

  /// 1-based label of a symbol such as "m" or "4/m".
  int label(std::string_view symbol) const;
  /// 0-based axis index for a direction (either sign), or -1.
  int axis_index(const std::array<int, 3>& direction) const;
};

/// Per-axis operation labels of a site-symmetry group; only rotation parts
/// are used. Throws InputError for an operation about a non-canonical axis.
SiteSymmetryCode encode_site_symmetry(std::span<const SymOp> stab,
                                      const SiteVocabulary& vocab = SiteVocabulary::builtin());

/// Frobenius distance between the 15 x 13 one-hot encodings of two codes.
double code_distance(const SiteSymmetryCode& a, const SiteSymmetryCode& b);

/// Site classes realised in a space group, found by probing the stabilizers
/// of all rational points with denominators up to 12 plus the general position.
const std::vector<SiteClass>& site_classes(int sg,
                                           const SpaceGroupTable& table = SpaceGroupTable::builtin());

struct SiteMatch {
  int class_index = 0;
  double distance = 0.0;
  SiteSymmetryCode code;                 // matched code
  std::vector<std::size_t> candidates;   // subgroups of the class carrying `code`
};

/// Nearest realisable site symmetry. Ties: lowest distance, then highest
/// stabilizer order, then lowest class index.
SiteMatch match_site_symmetry(const SiteSymmetryCode& pred, int sg,
                              const SpaceGroupTable& table = SpaceGroupTable::builtin());

/// Group average of the nearest images of g x; the result is fixed by every
/// element of `stab`. Throws ReconstructionError if no fixed point is reached.
Vec3 project_to_wyckoff(const Vec3& x, std::span<const SymOp> stab);

/// Point fixed by every element of `stab` nearest to x in the periodic
/// Cartesian metric of `lattice`; `anchor` is any fixed point of `stab`.
/// Unlike project_to_wyckoff this never fails for a consistent anchor.
Vec3 nearest_fixed_point(const Vec3& x, std::span<const SymOp> stab, const Vec3& anchor,
                         const Mat3& lattice);

// ---------------------------------------------------------------------------
// Asymmetric unit <-> unit cell

/// Throws ReconstructionError when expanded orbits overlap.
Crystal reconstruct_unit_cell(const AsymmetricUnit& au, double tol = kDefaultTolerance,
                              const SpaceGroupTable& table = SpaceGroupTable::builtin());

/// Throws InputError when the sites are not closed under the group's operations.
AsymmetricUnit extract_asymmetric_unit(const Crystal& crystal, int sg,
                                       double tol = kDefaultTolerance,
                                       const SpaceGroupTable& table = SpaceGroupTable::builtin());

}  // namespace symflow
