#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "symflow/crystal.hpp"

/// Proxy metrics over sets of generated crystals. Charge neutrality and
/// structure matching are simplified stand-ins for external tooling; the
/// report says so in its `notes`.
namespace symflow::metrics {

inline constexpr double kMinDistance = 0.5;  // Angstrom

/// Smallest Cartesian distance between distinct sites over the 27
/// neighbouring images; +inf for a single site.
double min_pair_distance(const Crystal& crystal);
bool structural_validity(const Crystal& crystal, double threshold = kMinDistance);

/// Atomic number -> count.
std::map<int, int> composition(const Crystal& crystal);

enum class ChargeStatus { neutral, charged, indeterminate };
const char* to_string(ChargeStatus status);

/// Searches one common oxidation state per element for a neutral
/// assignment. Single-element compositions are neutral; elements without
/// oxidation-state data give `indeterminate`.
ChargeStatus charge_neutrality(const std::map<int, int>& composition);

/// Mass density in g/cm^3.
double density(const Crystal& crystal);
int num_elements(const Crystal& crystal);

/// Exact W1 between two empirical distributions (integral of |F_a - F_b|).
/// Throws InputError for an empty sample.
double wasserstein_1d(std::span<const double> a, std::span<const double> b);

/// Jensen-Shannon distance (square root of the divergence, base-2 logs) of
/// two space-group histograms; values in [0, 1]. Throws InputError when a
/// histogram has no mass.
double jsd_spacegroups(const std::map<int, double>& a, const std::map<int, double>& b);

struct MatcherSettings {
  double cutoff = 6.0;     // Angstrom
  double rel_tol = 0.1;
};

/// Largest relative deviation between the sorted minimum-image distance
/// lists of every species pair, and between the sorted cell lengths. +inf
/// when the site counts or compositions differ. Zero for identical cells.
double structure_distance(const Crystal& a, const Crystal& b, const MatcherSettings& s = {});
bool structure_match(const Crystal& a, const Crystal& b, const MatcherSettings& s = {});

/// 1 - duplicates / n, duplicates found by greedy first-match grouping.
double uniqueness(std::span<const Crystal> set, const MatcherSettings& s = {});
/// Fraction of `set` with no match in `reference`.
double novelty(std::span<const Crystal> set, std::span<const Crystal> reference,
               const MatcherSettings& s = {});

struct LabeledCrystal {
  std::string name;
  Crystal crystal;
  int sg = 1;
};

struct StructureFlags {
  std::string name;
  int sg = 1;
  bool structurally_valid = false;
  ChargeStatus charge = ChargeStatus::indeterminate;
  double density = 0.0;
  int num_elements = 0;
  bool novel = false;
};

struct MetricsReport {
  int num_generated = 0;
  int num_reference = 0;
  double structural_validity = 0.0;
  double compositional_validity = 0.0;  // neutral / all
  int num_charge_indeterminate = 0;
  int num_valid = 0;  // structurally and compositionally valid
  std::optional<double> wdist_density;       // g/cm^3, valid samples only
  std::optional<double> wdist_num_elements;  // valid samples only
  double jsd_spacegroup = 0.0;               // bits, distance
  double uniqueness = 0.0;
  double novelty = 0.0;
  std::vector<std::string> notes;
  std::vector<StructureFlags> structures;
};

/// Throws InputError when either set is empty.
MetricsReport evaluate(std::span<const LabeledCrystal> generated,
                       std::span<const LabeledCrystal> reference, const MatcherSettings& s = {});

}  // namespace symflow::metrics
