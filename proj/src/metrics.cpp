#include "symflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "symflow/elements.hpp"
#include "symflow/error.hpp"
#include "symflow/symmetry.hpp"

namespace symflow::metrics {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int gcd_all(const std::map<int, int>& comp) {
  int g = 0;
  for (const auto& [z, n] : comp) g = std::gcd(g, n);
  return g;
}

std::map<int, int> reduced(const std::map<int, int>& comp) {
  const int g = gcd_all(comp);
  std::map<int, int> out;
  for (const auto& [z, n] : comp) out[z] = n / g;
  return out;
}

double relative_deviation(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

/// Sorted minimum-image distances per species pair (z1 <= z2).
std::map<std::pair<int, int>, std::vector<double>> pair_distances(const Crystal& c) {
  std::map<std::pair<int, int>, std::vector<double>> out;
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (std::size_t j = i + 1; j < c.size(); ++j) {
      const auto key = std::minmax(c.numbers[i], c.numbers[j]);
      out[{key.first, key.second}].push_back(periodic_distance(c.frac[i], c.frac[j], c.lattice));
    }
  }
  for (auto& [key, list] : out) std::sort(list.begin(), list.end());
  return out;
}

}  // namespace

double min_pair_distance(const Crystal& c) {
  double best = kInf;
  for (std::size_t i = 0; i < c.size(); ++i)
    for (std::size_t j = i + 1; j < c.size(); ++j)
      best = std::min(best, periodic_distance(c.frac[i], c.frac[j], c.lattice));
  return best;
}

bool structural_validity(const Crystal& c, double threshold) {
  return min_pair_distance(c) >= threshold;
}

std::map<int, int> composition(const Crystal& c) {
  std::map<int, int> out;
  for (int z : c.numbers) ++out[z];
  return out;
}

const char* to_string(ChargeStatus status) {
  switch (status) {
    case ChargeStatus::neutral: return "neutral";
    case ChargeStatus::charged: return "charged";
    case ChargeStatus::indeterminate: return "indeterminate";
  }
  return "indeterminate";
}

ChargeStatus charge_neutrality(const std::map<int, int>& comp) {
  if (comp.empty()) throw InputError("charge_neutrality: empty composition");
  if (comp.size() == 1) return ChargeStatus::neutral;
  const std::map<int, int> red = reduced(comp);
  std::vector<std::pair<int, const std::vector<int>*>> terms;
  for (const auto& [z, n] : red) {
    const Element& el = element(z);
    if (!el.has_oxidation_data || el.oxidation_states.empty()) return ChargeStatus::indeterminate;
    terms.emplace_back(n, &el.oxidation_states);
  }
  std::function<bool(std::size_t, long)> search = [&](std::size_t i, long charge) {
    if (i == terms.size()) return charge == 0;
    for (int ox : *terms[i].second)
      if (search(i + 1, charge + static_cast<long>(ox) * terms[i].first)) return true;
    return false;
  };
  return search(0, 0) ? ChargeStatus::neutral : ChargeStatus::charged;
}

double density(const Crystal& c) {
  double mass = 0.0;
  for (int z : c.numbers) mass += element(z).mass;
  return mass * 1.66053906660 / c.volume();
}

int num_elements(const Crystal& c) { return static_cast<int>(composition(c).size()); }

double wasserstein_1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InputError("wasserstein_1d: empty sample");
  std::vector<double> xa(a.begin(), a.end()), xb(b.begin(), b.end());
  std::sort(xa.begin(), xa.end());
  std::sort(xb.begin(), xb.end());
  std::vector<double> all(xa);
  all.insert(all.end(), xb.begin(), xb.end());
  std::sort(all.begin(), all.end());
  const double na = static_cast<double>(xa.size()), nb = static_cast<double>(xb.size());
  double total = 0.0;
  std::size_t ia = 0, ib = 0;
  for (std::size_t k = 0; k + 1 < all.size(); ++k) {
    while (ia < xa.size() && xa[ia] <= all[k]) ++ia;
    while (ib < xb.size() && xb[ib] <= all[k]) ++ib;
    total += std::abs(ia / na - ib / nb) * (all[k + 1] - all[k]);
  }
  return total;
}

double jsd_spacegroups(const std::map<int, double>& a, const std::map<int, double>& b) {
  auto total = [](const std::map<int, double>& h) {
    double s = 0.0;
    for (const auto& [sg, w] : h) {
      if (w < 0.0 || !std::isfinite(w)) throw InputError("jsd: histogram weights must be finite and >= 0");
      s += w;
    }
    if (s <= 0.0) throw InputError("jsd: empty histogram");
    return s;
  };
  const double sa = total(a), sb = total(b);
  std::map<int, std::pair<double, double>> joint;
  for (const auto& [sg, w] : a) joint[sg].first = w / sa;
  for (const auto& [sg, w] : b) joint[sg].second = w / sb;
  double js = 0.0;
  for (const auto& [sg, pq] : joint) {
    const auto [p, q] = pq;
    const double m = 0.5 * (p + q);
    if (p > 0) js += 0.5 * p * std::log2(p / m);
    if (q > 0) js += 0.5 * q * std::log2(q / m);
  }
  return std::sqrt(std::clamp(js, 0.0, 1.0));
}

double structure_distance(const Crystal& a, const Crystal& b, const MatcherSettings& s) {
  if (a.size() != b.size()) return kInf;
  if (reduced(composition(a)) != reduced(composition(b))) return kInf;
  double worst = 0.0;
  std::array<double, 3> la, lb;
  for (int i = 0; i < 3; ++i) {
    la[i] = a.lattice.row(i).norm();
    lb[i] = b.lattice.row(i).norm();
  }
  std::sort(la.begin(), la.end());
  std::sort(lb.begin(), lb.end());
  for (int i = 0; i < 3; ++i) worst = std::max(worst, relative_deviation(la[i], lb[i]));

  const auto da = pair_distances(a), db = pair_distances(b);
  if (da.size() != db.size()) return kInf;
  for (const auto& [key, list_a] : da) {
    auto it = db.find(key);
    if (it == db.end() || it->second.size() != list_a.size()) return kInf;
    const auto& list_b = it->second;
    for (std::size_t i = 0; i < list_a.size(); ++i) {
      if (list_a[i] > s.cutoff && list_b[i] > s.cutoff) continue;
      worst = std::max(worst, relative_deviation(list_a[i], list_b[i]));
    }
  }
  return worst;
}

bool structure_match(const Crystal& a, const Crystal& b, const MatcherSettings& s) {
  return structure_distance(a, b, s) <= s.rel_tol;
}

double uniqueness(std::span<const Crystal> set, const MatcherSettings& s) {
  if (set.empty()) throw InputError("uniqueness: empty set");
  std::vector<const Crystal*> groups;
  int duplicates = 0;
  for (const auto& c : set) {
    const bool seen = std::any_of(groups.begin(), groups.end(),
                                  [&](const Crystal* g) { return structure_match(c, *g, s); });
    if (seen) {
      ++duplicates;
    } else {
      groups.push_back(&c);
    }
  }
  return 1.0 - static_cast<double>(duplicates) / static_cast<double>(set.size());
}

double novelty(std::span<const Crystal> set, std::span<const Crystal> reference,
               const MatcherSettings& s) {
  if (set.empty()) throw InputError("novelty: empty set");
  int novel = 0;
  for (const auto& c : set) {
    const bool known = std::any_of(reference.begin(), reference.end(),
                                   [&](const Crystal& r) { return structure_match(c, r, s); });
    if (!known) ++novel;
  }
  return static_cast<double>(novel) / static_cast<double>(set.size());
}

MetricsReport evaluate(std::span<const LabeledCrystal> generated,
                       std::span<const LabeledCrystal> reference, const MatcherSettings& s) {
  if (generated.empty()) throw InputError("evaluate: no generated structures");
  if (reference.empty()) throw InputError("evaluate: no reference structures");
  MetricsReport r;
  r.num_generated = static_cast<int>(generated.size());
  r.num_reference = static_cast<int>(reference.size());
  r.notes = {
      "charge neutrality: one common oxidation state per element, not the full SMACT rules",
      "structure matcher: sorted minimum-image distances per species pair and cell lengths, "
      "relative tolerance " + std::to_string(s.rel_tol),
      "space groups of generated samples are their conditioning labels, not detected",
      "wasserstein distances use structurally and compositionally valid samples only",
      "not comparable to published benchmark tables"};

  std::vector<Crystal> gen_cells, ref_cells;
  for (const auto& g : generated) gen_cells.push_back(g.crystal);
  for (const auto& ref : reference) ref_cells.push_back(ref.crystal);

  std::vector<double> rho_gen, nel_gen, rho_ref, nel_ref;
  int structural = 0, neutral = 0;
  for (const auto& g : generated) {
    StructureFlags f;
    f.name = g.name;
    f.sg = g.sg;
    f.structurally_valid = structural_validity(g.crystal);
    f.charge = charge_neutrality(composition(g.crystal));
    f.density = density(g.crystal);
    f.num_elements = num_elements(g.crystal);
    f.novel = std::none_of(ref_cells.begin(), ref_cells.end(),
                           [&](const Crystal& ref) { return structure_match(g.crystal, ref, s); });
    structural += f.structurally_valid;
    neutral += f.charge == ChargeStatus::neutral;
    r.num_charge_indeterminate += f.charge == ChargeStatus::indeterminate;
    if (f.structurally_valid && f.charge == ChargeStatus::neutral) {
      ++r.num_valid;
      rho_gen.push_back(f.density);
      nel_gen.push_back(f.num_elements);
    }
    r.structures.push_back(std::move(f));
  }
  for (const auto& ref : reference) {
    rho_ref.push_back(density(ref.crystal));
    nel_ref.push_back(num_elements(ref.crystal));
  }
  const double n = static_cast<double>(generated.size());
  r.structural_validity = structural / n;
  r.compositional_validity = neutral / n;
  if (!rho_gen.empty()) {
    r.wdist_density = wasserstein_1d(rho_gen, rho_ref);
    r.wdist_num_elements = wasserstein_1d(nel_gen, nel_ref);
  }
  std::map<int, double> hg, hr;
  for (const auto& g : generated) hg[g.sg] += 1.0;
  for (const auto& ref : reference) hr[ref.sg] += 1.0;
  r.jsd_spacegroup = jsd_spacegroups(hg, hr);
  r.uniqueness = uniqueness(gen_cells, s);
  int novel = 0;
  for (const auto& f : r.structures) novel += f.novel;
  r.novelty = novel / n;
  return r;
}

}  // namespace symflow::metrics
