#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Geometry>

#include "symflow/cif.hpp"
#include "symflow/error.hpp"
#include "symflow/metrics.hpp"
#include "symflow/prototypes.hpp"
#include "symflow/random.hpp"

using namespace symflow;
using namespace symflow::metrics;

namespace {

std::vector<double> random_sample(Rng& rng, int n, double shift = 0.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = standard_normal(rng) + shift;
  return v;
}

// Integral of |F_a - F_b| by summing over the merged breakpoints.
double cdf_distance(std::vector<double> a, std::vector<double> b) {
  std::vector<double> all = a;
  all.insert(all.end(), b.begin(), b.end());
  std::sort(all.begin(), all.end());
  auto cdf = [](const std::vector<double>& s, double x) {
    return static_cast<double>(std::count_if(s.begin(), s.end(), [&](double v) { return v <= x; })) / s.size();
  };
  double w = 0.0;
  for (std::size_t i = 0; i + 1 < all.size(); ++i)
    w += std::abs(cdf(a, all[i]) - cdf(b, all[i])) * (all[i + 1] - all[i]);
  return w;
}

double entropy_bits(const std::vector<double>& p) {
  double h = 0.0;
  for (double x : p)
    if (x > 0) h -= x * std::log2(x);
  return h;
}

Crystal crystal_of(const char* name) {
  for (const auto& p : load_prototypes())
    if (p.name.find(name) != std::string::npos) return cif::parse_cif(p.cif).crystal;
  throw std::runtime_error(name);
}

double brute_min_distance(const Crystal& c) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < c.size(); ++i)
    for (std::size_t j = 0; j < c.size(); ++j)
      for (int u = -2; u <= 2; ++u)
        for (int v = -2; v <= 2; ++v)
          for (int w = -2; w <= 2; ++w) {
            if (i == j) continue;
            const Vec3 d = c.cartesian(c.frac[j] + Vec3(u, v, w) - c.frac[i]);
            best = std::min(best, d.norm());
          }
  return best;
}

}  // namespace

TEST_SUITE("evalsuite") {
  TEST_CASE("wasserstein examples") {
    const std::vector<double> z{0.0}, two{2.0}, a{0, 1}, b{1, 2};
    CHECK(wasserstein_1d(z, two) == 2.0);
    CHECK(wasserstein_1d(a, b) == 1.0);
    CHECK(wasserstein_1d(a, a) == 0.0);
    CHECK_THROWS_AS(wasserstein_1d(std::vector<double>{}, a), InputError);
  }

  TEST_CASE("wasserstein properties") {
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
      const auto x = random_sample(rng, 7 + trial);
      const auto y = random_sample(rng, 13, 0.5);
      const auto z = random_sample(rng, 5, -1.0);
      const double xy = wasserstein_1d(x, y);
      CHECK(xy >= 0.0);
      CHECK(xy == doctest::Approx(wasserstein_1d(y, x)));
      CHECK(xy == doctest::Approx(cdf_distance(x, y)));
      CHECK(xy <= wasserstein_1d(x, z) + wasserstein_1d(z, y) + 1e-12);
      auto p = x;
      std::shuffle(p.begin(), p.end(), rng);
      CHECK(wasserstein_1d(p, y) == doctest::Approx(xy));
      auto shifted = x;
      for (auto& v : shifted) v += 0.75;
      CHECK(wasserstein_1d(x, shifted) == doctest::Approx(0.75));
      // Equal sizes: the sorted coupling is optimal.
      auto s1 = random_sample(rng, 9), s2 = random_sample(rng, 9, 1.0);
      const double w = wasserstein_1d(s1, s2);
      std::sort(s1.begin(), s1.end());
      std::sort(s2.begin(), s2.end());
      double m = 0;
      for (int i = 0; i < 9; ++i) m += std::abs(s1[i] - s2[i]) / 9;
      CHECK(w == doctest::Approx(m));
    }
  }

  TEST_CASE("jensen-shannon distance") {
    const std::map<int, double> a{{225, 3}, {221, 1}}, b{{225, 1}, {136, 1}};
    const double d = jsd_spacegroups(a, b);
    // p = (3/4, 1/4, 0), q = (1/2, 0, 1/2) over (225, 221, 136).
    const std::vector<double> p{0.75, 0.25, 0}, q{0.5, 0, 0.5}, m{0.625, 0.125, 0.25};
    CHECK(d == doctest::Approx(std::sqrt(entropy_bits(m) - (entropy_bits(p) + entropy_bits(q)) / 2)));
    CHECK(d == doctest::Approx(jsd_spacegroups(b, a)));
    CHECK(jsd_spacegroups(a, a) == 0.0);
    CHECK(jsd_spacegroups(a, {{225, 30}, {221, 10}}) == doctest::Approx(0.0));
    CHECK(jsd_spacegroups({{1, 1}}, {{2, 1}}) == doctest::Approx(1.0));
    CHECK(d <= 1.0);
    CHECK_THROWS_AS(jsd_spacegroups({}, a), InputError);
    CHECK_THROWS_AS(jsd_spacegroups({{1, 0.0}}, a), InputError);
  }

  TEST_CASE("minimum distances and validity") {
    for (const auto& p : load_prototypes()) {
      const Crystal c = cif::parse_cif(p.cif).crystal;
      INFO(p.name);
      CHECK(min_pair_distance(c) == doctest::Approx(brute_min_distance(c)));
      CHECK(structural_validity(c));
    }
    Crystal pair;
    pair.lattice = 10.0 * Mat3::Identity();
    pair.numbers = {6, 6};
    pair.frac = {Vec3(0.01, 0.5, 0.5), Vec3(0.98, 0.5, 0.5)};  // 0.3 A across the boundary
    CHECK(min_pair_distance(pair) == doctest::Approx(0.3));
    CHECK_FALSE(structural_validity(pair));
    Crystal single;
    single.lattice = 0.2 * Mat3::Identity();
    single.numbers = {29};
    single.frac = {Vec3(0.5, 0.5, 0.5)};
    CHECK(std::isinf(min_pair_distance(single)));
    CHECK(structural_validity(single));
  }

  TEST_CASE("rotation and permutation leave distances unchanged") {
    const Crystal c = crystal_of("rutile");
    Crystal r = c;
    r.lattice = c.lattice * Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix().transpose();
    std::reverse(r.numbers.begin(), r.numbers.end());
    std::reverse(r.frac.begin(), r.frac.end());
    for (auto& f : r.frac) f = wrap_unit(f + Vec3(0.13, 0.29, 0.61));
    CHECK(min_pair_distance(r) == doctest::Approx(min_pair_distance(c)));
    CHECK(structure_distance(c, r) < 1e-9);
    CHECK(structure_match(c, r));
    CHECK(density(r) == doctest::Approx(density(c)));
  }

  TEST_CASE("density units") {
    const Crystal nacl = crystal_of("rocksalt");
    // 4 NaCl per cell; u -> g and A^3 -> cm^3.
    const double mass_g = 4 * (22.98976928 + 35.45) * 1.66053906660e-24;
    const double volume_cm3 = std::pow(5.64e-8, 3);
    CHECK(density(nacl) == doctest::Approx(mass_g / volume_cm3).epsilon(1e-3));
    CHECK(density(nacl) == doctest::Approx(2.165).epsilon(5e-3));
    Crystal doubled = nacl;
    doubled.lattice *= std::cbrt(2.0);
    CHECK(density(doubled) == doctest::Approx(density(nacl) / 2));
    CHECK(num_elements(nacl) == 2);
    CHECK(num_elements(crystal_of("perovskite")) == 3);
    CHECK(composition(nacl) == std::map<int, int>{{11, 4}, {17, 4}});
  }

  TEST_CASE("charge neutrality") {
    CHECK(charge_neutrality({{11, 1}, {17, 1}}) == ChargeStatus::neutral);
    CHECK(charge_neutrality({{29, 1}}) == ChargeStatus::neutral);
    CHECK(charge_neutrality({{11, 2}, {17, 1}}) == ChargeStatus::charged);
    CHECK(charge_neutrality({{26, 2}, {8, 3}}) == ChargeStatus::neutral);   // Fe2O3
    CHECK(charge_neutrality({{26, 1}, {8, 1}}) == ChargeStatus::neutral);   // FeO
    CHECK(charge_neutrality({{26, 3}, {8, 4}}) == ChargeStatus::charged);   // one state per element
    CHECK(charge_neutrality({{100, 1}, {8, 1}}) == ChargeStatus::indeterminate);
    CHECK(charge_neutrality({{11, 4}, {17, 4}}) == charge_neutrality({{11, 1}, {17, 1}}));
    for (const auto& p : load_prototypes())
      CHECK(charge_neutrality(composition(cif::parse_cif(p.cif).crystal)) == ChargeStatus::neutral);
  }

  TEST_CASE("uniqueness and novelty") {
    const Crystal a = crystal_of("rocksalt"), b = crystal_of("fluorite"), c = crystal_of("rutile");
    const std::vector<Crystal> set{a, a, b}, ref{a, c};
    CHECK(uniqueness(set) == doctest::Approx(2.0 / 3));
    CHECK(uniqueness(std::vector<Crystal>{a, b, c}) == 1.0);
    CHECK(novelty(set, ref) == doctest::Approx(1.0 / 3));
    CHECK(novelty(ref, ref) == 0.0);
    Crystal other = a;
    other.numbers[0] = 19;
    CHECK(std::isinf(structure_distance(a, other)));
    CHECK(std::isinf(structure_distance(a, b)));
  }

  TEST_CASE("evaluate") {
    std::vector<LabeledCrystal> gen, ref;
    for (const auto& p : load_prototypes()) ref.push_back({p.name, cif::parse_cif(p.cif).crystal, p.sg});
    Crystal bad;
    bad.lattice = 10.0 * Mat3::Identity();
    bad.numbers = {11, 17, 17};  // NaCl2, atoms 0.1 A apart
    bad.frac = {Vec3(0, 0, 0), Vec3(0.01, 0, 0), Vec3(0.5, 0.5, 0.5)};
    gen = {ref[0], {"bad", bad, 1}};
    const MetricsReport r = evaluate(gen, ref);
    CHECK(r.num_generated == 2);
    CHECK(r.num_reference == static_cast<int>(ref.size()));
    CHECK(r.structural_validity == 0.5);
    CHECK(r.compositional_validity == 0.5);
    CHECK(r.num_valid == 1);
    CHECK(r.novelty == 0.5);
    CHECK(r.uniqueness == 1.0);
    CHECK(r.jsd_spacegroup > 0.0);
    CHECK(r.jsd_spacegroup <= 1.0);
    REQUIRE(r.structures.size() == 2);
    CHECK(r.structures[0].structurally_valid);
    CHECK_FALSE(r.structures[1].structurally_valid);
    CHECK_FALSE(r.structures[0].novel);
    CHECK(r.structures[1].novel);
    CHECK_FALSE(r.notes.empty());
    CHECK_THROWS_AS(evaluate({}, ref), InputError);
  }
}
