#include <doctest.h>

#include <cmath>
#include <set>

#include "symflow/cif.hpp"
#include "symflow/error.hpp"
#include "symflow/lattice.hpp"
#include "symflow/metrics.hpp"
#include "symflow/prototypes.hpp"
#include "symflow/symmetry.hpp"

using namespace symflow;

namespace {

const PrototypeRecord& find(const std::string& prefix) {
  for (const auto& p : load_prototypes())
    if (p.name.rfind(prefix, 0) == 0) return p;
  throw std::runtime_error(prefix);
}

// Distinct images of x under the operators, modulo lattice translations.
int orbit_size(const Vec3& x, int sg) {
  std::vector<Vec3> seen;
  for (const auto& op : SpaceGroupTable::builtin().ops(sg)) {
    const Vec3 y = wrap_unit(op.apply(x));
    bool dup = false;
    for (const auto& s : seen) dup = dup || min_image(s - y).norm() < 1e-6;
    if (!dup) seen.push_back(y);
  }
  return static_cast<int>(seen.size());
}

}  // namespace

TEST_SUITE("proto_data") {
  TEST_CASE("required entries") {
    const auto& all = load_prototypes();
    std::set<std::pair<std::string, int>> have;
    for (const auto& p : all) have.insert({p.name, p.sg});
    CHECK(have.count({"rocksalt_NaCl", 225}));
    CHECK(have.count({"cesium_chloride_CsCl", 221}));
    CHECK(have.count({"perovskite_SrTiO3", 221}));
    CHECK(have.count({"fluorite_CaF2", 225}));
    CHECK(have.count({"rutile_TiO2", 136}));
    bool hexagonal = false;
    for (const auto& p : all) hexagonal = hexagonal || (p.sg >= 143 && p.sg <= 194);
    CHECK(hexagonal);
  }

  TEST_CASE("expected counts") {
    CHECK(find("rocksalt").asymmetric_unit_size == 2);
    CHECK(find("rocksalt").cell_atom_count == 8);
    CHECK(find("perovskite").asymmetric_unit_size == 3);
    CHECK(find("perovskite").cell_atom_count == 5);
    for (const auto& p : load_prototypes()) {
      INFO(p.name);
      const Crystal c = cif::parse_cif(p.cif).crystal;
      CHECK(static_cast<int>(c.size()) == p.cell_atom_count);
      const AsymmetricUnit au = extract_asymmetric_unit(c, p.sg);
      CHECK(static_cast<int>(au.sites.size()) == p.asymmetric_unit_size);
      int total = 0;
      for (const auto& s : au.sites) total += orbit_size(s.frac, p.sg);
      CHECK(total == p.cell_atom_count);
      const Crystal back = reconstruct_unit_cell(au);
      CHECK(static_cast<int>(back.size()) == p.cell_atom_count);
      CHECK(metrics::structure_distance(c, back) < 1e-9);
    }
  }

  TEST_CASE("hexagonal entry fixes k1") {
    for (const auto& p : load_prototypes()) {
      if (p.sg < 143 || p.sg > 194) continue;
      const auto k = lattice::encode_lattice(cif::parse_cif(p.cif).crystal.lattice).k;
      CHECK(std::abs(k[0] - (-std::log(3.0) / 4)) < 1e-6);
      CHECK(std::abs(k[0] - lattice::hexagonal_k1()) < 1e-6);
    }
  }

  TEST_CASE("validity and neutrality") {
    for (const auto& p : load_prototypes()) {
      INFO(p.name);
      const Crystal c = cif::parse_cif(p.cif).crystal;
      CHECK(metrics::structural_validity(c));
      CHECK(metrics::charge_neutrality(metrics::composition(c)) == metrics::ChargeStatus::neutral);
    }
  }

  TEST_CASE("corrupt index names the file") {
    try {
      parse_prototype_index("rocksalt_NaCl 225 rocksalt_NaCl.cif 2 8 yes\nbroken 999 x.cif\n", "index.txt");
      FAIL("expected an error");
    } catch (const InputError& e) {
      CHECK(std::string(e.what()).find("index.txt:2") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_prototype_index("# only a comment\n", "index.txt"), InputError);
    CHECK_THROWS_AS(parse_prototype_index("ghost 1 missing.cif 1 1 yes\n", "index.txt"), Error);
    CHECK(parse_prototype_index("rutile_TiO2 136 rutile_TiO2.cif 2 6 no\n", "i").front().training == false);
  }
}
