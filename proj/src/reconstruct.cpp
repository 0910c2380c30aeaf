#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "symflow/error.hpp"
#include "symflow/lattice.hpp"
#include "symflow/symmetry.hpp"

namespace symflow {
namespace {

std::string describe(const Vec3& x) {
  std::ostringstream s;
  s << "(" << x[0] << ", " << x[1] << ", " << x[2] << ")";
  return s.str();
}

bool lexicographically_less(const Vec3& a, const Vec3& b) {
  for (int i = 0; i < 3; ++i) {
    if (a[i] != b[i]) return a[i] < b[i];
  }
  return false;
}

}  // namespace

Crystal reconstruct_unit_cell(const AsymmetricUnit& au, double tol, const SpaceGroupTable& table) {
  if (au.sites.empty()) throw InputError("asymmetric unit has no sites");
  Crystal out;
  out.lattice = lattice::decode_lattice(lattice::mask_k(au.k, au.sg));
  std::vector<std::size_t> owner;  // representative index of every expanded site

  for (std::size_t r = 0; r < au.sites.size(); ++r) {
    const AsymmetricSite& site = au.sites[r];
    const SiteMatch match = match_site_symmetry(site.site, au.sg, table);
    const SiteClass& cls = table.site_classes(au.sg)[match.class_index];

    // Among the conjugate subgroups carrying the matched code, snap onto the
    // nearest fixed point.
    Vec3 best = Vec3::Zero();
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t idx : match.candidates) {
      const Vec3 p = nearest_fixed_point(site.frac, cls.subgroups[idx], cls.fixed_points[idx],
                                         out.lattice);
      const double d = periodic_distance(p, site.frac, out.lattice);
      if (d < best_dist) {
        best_dist = d;
        best = p;
      }
    }
    if (!std::isfinite(best_dist)) {
      throw ReconstructionError("representative " + std::to_string(r) + " at " +
                                describe(site.frac) + " has no admissible Wyckoff position");
    }
    for (const Vec3& y : orbit(best, au.sg, tol, table)) {
      out.numbers.push_back(site.number);
      out.frac.push_back(y);
      owner.push_back(r);
    }
  }

  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t j = i + 1; j < out.size(); ++j) {
      if (periodic_distance(out.frac[i], out.frac[j]) < tol) {
        throw ReconstructionError("orbits of representatives " + std::to_string(owner[i]) +
                                  " and " + std::to_string(owner[j]) + " overlap at " +
                                  describe(out.frac[i]));
      }
    }
  }
  return out;
}

AsymmetricUnit extract_asymmetric_unit(const Crystal& crystal, int sg, double tol,
                                       const SpaceGroupTable& table) {
  if (crystal.size() == 0) throw InputError("crystal has no sites");
  const auto& ops = table.ops(sg);
  AsymmetricUnit au;
  au.sg = sg;
  au.k = lattice::mask_k(lattice::encode_lattice(crystal.lattice).k, sg);

  std::vector<Vec3> frac(crystal.size());
  for (std::size_t i = 0; i < crystal.size(); ++i) frac[i] = wrap_unit(crystal.frac[i]);

  std::vector<bool> assigned(crystal.size(), false);
  for (std::size_t i = 0; i < crystal.size(); ++i) {
    if (assigned[i]) continue;
    std::vector<std::size_t> members;
    for (std::size_t o = 0; o < ops.size(); ++o) {
      const Vec3 image = ops[o].apply(frac[i]);
      std::size_t hit = crystal.size();
      for (std::size_t j = 0; j < crystal.size(); ++j) {
        if (crystal.numbers[j] == crystal.numbers[i] && periodic_distance(image, frac[j]) < tol) {
          hit = j;
          break;
        }
      }
      if (hit == crystal.size()) {
        throw InputError("site " + std::to_string(i) + " " + describe(frac[i]) +
                         " is not mapped onto a site of the same species by operation " +
                         std::to_string(o) + " of space group " + std::to_string(sg));
      }
      if (std::find(members.begin(), members.end(), hit) == members.end()) members.push_back(hit);
    }
    std::size_t rep = members.front();
    for (std::size_t m : members) {
      assigned[m] = true;
      if (lexicographically_less(frac[m], frac[rep])) rep = m;
    }
    const std::vector<SymOp> stab = stabilizer(frac[rep], sg, tol, table);
    AsymmetricSite site;
    site.number = crystal.numbers[rep];
    site.frac = project_to_wyckoff(frac[rep], stab);
    site.site = encode_site_symmetry(stab);
    au.sites.push_back(site);
  }
  return au;
}

}  // namespace symflow
