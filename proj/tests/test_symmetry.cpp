#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "symflow/cif.hpp"
#include "symflow/error.hpp"
#include "symflow/metrics.hpp"
#include "symflow/prototypes.hpp"
#include "symflow/random.hpp"
#include "symflow/symmetry.hpp"

using namespace symflow;

namespace {

SymOp op(std::array<int, 9> rot, std::array<int, 3> t24 = {0, 0, 0}) {
  SymOp o;
  o.rot = rot;
  o.trans24 = t24;
  return o;
}

const SymOp kMirrorZ = op({1, 0, 0, 0, 1, 0, 0, 0, -1});
const SymOp kInversion = op({-1, 0, 0, 0, -1, 0, 0, 0, -1});

int label(const char* s) { return SiteVocabulary::builtin().label(s); }

Crystal rocksalt() { return cif::parse_cif(load_prototypes().at(0).cif).crystal; }

}  // namespace

TEST_SUITE("symmetry_engine") {
  TEST_CASE("operator tables") {
    CHECK(spacegroup_ops(1).size() == 1);
    CHECK(spacegroup_ops(1)[0] == SymOp::identity());
    const auto& p1bar = spacegroup_ops(2);
    REQUIRE(p1bar.size() == 2);
    CHECK(std::find(p1bar.begin(), p1bar.end(), kInversion) != p1bar.end());
    CHECK(spacegroup_ops(225).size() == 192);
    CHECK(spacegroup_ops(221).size() == 48);
    CHECK(spacegroup_ops(194).size() == 24);
    CHECK_THROWS_AS(spacegroup_ops(0), InputError);
    CHECK_THROWS_AS(spacegroup_ops(231), InputError);
  }

  TEST_CASE("every table is a group") {
    for (int sg = 1; sg <= kNumSpaceGroups; ++sg) {
      const auto& ops = spacegroup_ops(sg);
      CHECK(is_group(ops));
      for (const SymOp& g : ops) {
        CHECK(std::abs(g.determinant()) == 1);
        CHECK(std::find(ops.begin(), ops.end(), g.inverse()) != ops.end());
      }
    }
  }

  TEST_CASE("general-position multiplicities") {
    // |G| in the conventional cell for a sample of groups.
    const std::vector<std::pair<int, std::size_t>> known = {
        {1, 1}, {2, 2}, {14, 4}, {15, 8}, {62, 8}, {70, 32}, {136, 16}, {139, 32},
        {166, 36}, {191, 24}, {194, 24}, {221, 48}, {225, 192}, {227, 192}, {229, 96}, {230, 96}};
    for (auto [sg, n] : known) CHECK(spacegroup_ops(sg).size() == n);
  }

  TEST_CASE("stabilizer examples") {
    CHECK(stabilizer(Vec3(0.123, 0.457, 0.891), 225).size() == 1);
    CHECK(stabilizer(Vec3::Zero(), 2).size() == 2);
    CHECK(stabilizer(Vec3::Zero(), 225).size() == 48);
    CHECK(is_group(stabilizer(Vec3(0.25, 0.25, 0.25), 227)));
  }

  TEST_CASE("orbit examples") {
    CHECK(orbit(Vec3::Zero(), 1).size() == 1);
    CHECK(orbit(Vec3::Zero(), 225).size() == 4);
    CHECK(orbit(Vec3(0.5, 0.5, 0.5), 225).size() == 4);
    CHECK(orbit(Vec3(0.25, 0.25, 0.25), 225).size() == 8);
    for (const Vec3& p : orbit(Vec3(0.1, 0.2, 0.3), 62)) {
      CHECK((p.array() >= 0.0).all());
      CHECK((p.array() < 1.0).all());
    }
  }

  TEST_CASE("orbit-stabilizer identity on random points") {
    Rng rng(21);
    for (int sg : {2, 10, 47, 99, 123, 148, 166, 187, 191, 200, 221, 229}) {
      for (int i = 0; i < 40; ++i) {
        Vec3 x;
        for (int c = 0; c < 3; ++c) x[c] = i % 2 ? uniform(rng) : std::floor(uniform(rng) * 8) / 8;
        CHECK(orbit(x, sg).size() * stabilizer(x, sg).size() == spacegroup_ops(sg).size());
      }
    }
  }

  TEST_CASE("site-symmetry encoding") {
    const SymOp id = SymOp::identity();
    const SiteSymmetryCode trivial = encode_site_symmetry(std::vector<SymOp>{id});
    CHECK(trivial == SiteSymmetryCode::identity());

    const SiteSymmetryCode mirror = encode_site_symmetry(std::vector<SymOp>{id, kMirrorZ});
    for (int a = 0; a < kNumAxes; ++a) CHECK(mirror.labels[a] == (a == 2 ? label("m") : label("1")));

    const SiteSymmetryCode inv = encode_site_symmetry(std::vector<SymOp>{id, kInversion});
    for (int a = 0; a < kNumAxes; ++a) CHECK(inv.labels[a] == label("-1"));

    // Full cubic site symmetry m-3m at the rocksalt cation site.
    const SiteSymmetryCode oh = encode_site_symmetry(stabilizer(Vec3::Zero(), 225));
    for (int a = 0; a < 3; ++a) CHECK(oh.labels[a] == label("4/m"));
    for (int a = 3; a < 9; ++a) CHECK(oh.labels[a] == label("2/m"));
    for (int a = 9; a < 13; ++a) CHECK(oh.labels[a] == label("-3"));

    // A two-fold rotation about [2 3 0].
    CHECK_THROWS_AS(encode_site_symmetry(std::vector<SymOp>{id, op({1, 0, 0, 3, -1, 0, 0, 0, -1})}), InputError);
  }

  TEST_CASE("codes agree along an orbit up to the matched class") {
    for (auto [sg, x] : std::vector<std::pair<int, Vec3>>{{225, Vec3(0.25, 0.25, 0.25)},
                                                          {136, Vec3(0.3, 0.3, 0.0)},
                                                          {194, Vec3(1.0 / 3, 2.0 / 3, 0.25)},
                                                          {62, Vec3(0.1, 0.25, 0.7)}}) {
      const int ref = match_site_symmetry(encode_site_symmetry(stabilizer(x, sg)), sg).class_index;
      for (const Vec3& p : orbit(x, sg)) {
        const SiteMatch m = match_site_symmetry(encode_site_symmetry(stabilizer(p, sg)), sg);
        CHECK(m.class_index == ref);
        CHECK(m.distance == 0.0);
      }
    }
  }

  TEST_CASE("matching") {
    const SiteMatch general = match_site_symmetry(SiteSymmetryCode::identity(), 225);
    const auto& classes = site_classes(225);
    CHECK(classes[general.class_index].order == 1);
    CHECK(general.distance == 0.0);

    // Wyckoff positions of Fm-3m are 4a..192l, but stabilizers are op sets
    // modulo lattice translations, so 4a/4b and 48h/48i give the same
    // subgroups and fall into one class each.
    std::vector<int> orders;
    for (const auto& cls : classes) orders.push_back(cls.order);
    std::sort(orders.begin(), orders.end());
    CHECK(orders == std::vector<int>{1, 2, 2, 4, 4, 6, 8, 8, 24, 48});

    for (const auto& cls : classes) {
      const SiteMatch m = match_site_symmetry(cls.codes.front(), 225);
      CHECK(m.distance == 0.0);
      CHECK(classes[m.class_index].order == cls.order);
    }

    // One axis away from the 4a code: brute force over every class code.
    SiteSymmetryCode near = encode_site_symmetry(stabilizer(Vec3::Zero(), 225));
    near.labels[14] = static_cast<std::uint8_t>(label("2"));
    double best = 1e9;
    int best_order = 0;
    for (const auto& cls : classes)
      for (const auto& c : cls.codes) {
        const double d = code_distance(near, c);
        if (d < best - 1e-12 || (std::abs(d - best) < 1e-12 && cls.order > best_order)) {
          best = d;
          best_order = cls.order;
        }
      }
    const SiteMatch m = match_site_symmetry(near, 225);
    CHECK(m.distance == doctest::Approx(best));
    CHECK(classes[m.class_index].order == best_order);
    CHECK(best_order == 48);
    CHECK(code_distance(near, SiteSymmetryCode::identity()) > 0.0);
  }

  TEST_CASE("projection onto fixed points") {
    const Vec3 fixed(0.1, 0.2, 0.0);
    const std::vector<SymOp> mz{SymOp::identity(), kMirrorZ};
    CHECK((project_to_wyckoff(fixed, mz) - fixed).norm() < 1e-12);
    const Vec3 p = project_to_wyckoff(Vec3(0.1, 0.2, 0.04), mz);
    CHECK((p - Vec3(0.1, 0.2, 0.0)).norm() < 1e-12);
    const std::vector<SymOp> trivial{SymOp::identity()};
    CHECK((project_to_wyckoff(Vec3(0.3, 0.6, 0.9), trivial) - Vec3(0.3, 0.6, 0.9)).norm() < 1e-12);
    CHECK((project_to_wyckoff(p, mz) - p).norm() < 1e-12);

    Rng rng(22);
    const auto stab = stabilizer(Vec3(0.25, 0.25, 0.25), 225);
    const Mat3 lattice = 5.0 * Mat3::Identity();
    for (int i = 0; i < 50; ++i) {
      const Vec3 x(uniform(rng), uniform(rng), uniform(rng));
      const Vec3 q = nearest_fixed_point(x, stab, Vec3(0.25, 0.25, 0.25), lattice);
      for (const SymOp& g : stab) CHECK(periodic_distance(g.apply(q), q) < 1e-8);
      CHECK((q.array() >= 0.0).all());
      CHECK((q.array() < 1.0).all());
      CHECK((nearest_fixed_point(q, stab, Vec3(0.25, 0.25, 0.25), lattice) - q).norm() < 1e-9);
      // The site of -43m symmetry lies on a lattice of isolated points, so
      // the result is the nearest one of them.
      double nearest = 1e9;
      for (double a : {0.25, 0.75})
        for (double b : {0.25, 0.75})
          for (double c : {0.25, 0.75}) {
            const Vec3 cand(a, b, c);
            bool fixed_by_all = true;
            for (const SymOp& g : stab) fixed_by_all &= periodic_distance(g.apply(cand), cand) < 1e-9;
            if (fixed_by_all) nearest = std::min(nearest, periodic_distance(x, cand, lattice));
          }
      CHECK(periodic_distance(x, q, lattice) <= nearest + 1e-9);
    }
  }

  TEST_CASE("reconstruction") {
    AsymmetricUnit p1;
    p1.sg = 1;
    p1.k = {0, 0, 0, 0, 0, std::log(4.0)};
    p1.sites = {{8, Vec3(0.1, 0.2, 0.3), {}}, {26, Vec3(0.6, 0.5, 0.4), {}}};
    const Crystal c1 = reconstruct_unit_cell(p1);
    CHECK(c1.size() == 2);
    CHECK((c1.lattice - 4.0 * Mat3::Identity()).norm() < 1e-12);

    const SiteSymmetryCode oh = encode_site_symmetry(stabilizer(Vec3::Zero(), 225));
    AsymmetricUnit nacl;
    nacl.sg = 225;
    nacl.k = {0, 0, 0, 0, 0, std::log(5.64)};
    nacl.sites = {{11, Vec3::Zero(), oh}, {17, Vec3(0.5, 0.5, 0.5), oh}};
    const Crystal c = reconstruct_unit_cell(nacl);
    CHECK(c.size() == 8);
    CHECK(std::count(c.numbers.begin(), c.numbers.end(), 11) == 4);
    CHECK(std::count(c.numbers.begin(), c.numbers.end(), 17) == 4);
    CHECK(metrics::structure_distance(c, rocksalt()) < 1e-9);

    // Both representatives collapse onto the same special position.
    AsymmetricUnit clash = nacl;
    clash.sites[1].frac = Vec3(0.02, 0.01, 0.0);
    CHECK_THROWS_AS(reconstruct_unit_cell(clash), ReconstructionError);
  }

  TEST_CASE("orbit multiplicities divide the group order") {
    Rng rng(23);
    for (int sg : {12, 63, 129, 166, 194, 225}) {
      for (int i = 0; i < 20; ++i) {
        Vec3 x;
        for (int c = 0; c < 3; ++c) x[c] = std::floor(uniform(rng) * 4) / 4;
        CHECK(spacegroup_ops(sg).size() % orbit(x, sg).size() == 0);
      }
    }
  }

  TEST_CASE("extraction") {
    Crystal p1;
    p1.lattice = 3.0 * Mat3::Identity();
    p1.numbers = {1, 1, 8};
    p1.frac = {Vec3(0.1, 0.1, 0.1), Vec3(0.5, 0.1, 0.1), Vec3(0.3, 0.6, 0.2)};
    CHECK(extract_asymmetric_unit(p1, 1).sites.size() == 3);

    const AsymmetricUnit au = extract_asymmetric_unit(rocksalt(), 225);
    CHECK(au.sites.size() == 2);

    Crystal broken = rocksalt();
    broken.frac[1] += Vec3(0.05, 0.0, 0.0);
    CHECK_THROWS_AS(extract_asymmetric_unit(broken, 225), InputError);

    for (const auto& rec : load_prototypes()) {
      const Crystal c = cif::parse_cif(rec.cif).crystal;
      const AsymmetricUnit a = extract_asymmetric_unit(c, rec.sg);
      CHECK(static_cast<int>(a.sites.size()) == rec.asymmetric_unit_size);
      const Crystal back = reconstruct_unit_cell(a);
      CHECK(static_cast<int>(back.size()) == rec.cell_atom_count);
      CHECK(metrics::structure_distance(c, back) < 1e-9);
    }
  }
}
