#include <algorithm>
#include <map>
#include <mutex>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "symflow/embedded_data.hpp"
#include "symflow/error.hpp"
#include "symflow/symmetry.hpp"

namespace symflow {
namespace {

using Direction = std::array<int, 3>;

Direction normalize_direction(Direction d) {
  const int g = std::gcd(std::gcd(std::abs(d[0]), std::abs(d[1])), std::abs(d[2]));
  if (g == 0) return d;
  for (auto& v : d) v /= g;
  for (int v : d) {
    if (v != 0) {
      if (v < 0)
        for (auto& w : d) w = -w;
      break;
    }
  }
  return d;
}

// Fixed direction of a proper rotation (null space of P - I).
Direction rotation_axis(const SymOp& proper) {
  std::array<Direction, 3> rows;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) rows[i][j] = proper.r(i, j) - (i == j ? 1 : 0);
  for (int a = 0; a < 3; ++a) {
    for (int b = a + 1; b < 3; ++b) {
      const Direction& u = rows[a];
      const Direction& v = rows[b];
      Direction c{u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]};
      if (c[0] != 0 || c[1] != 0 || c[2] != 0) return normalize_direction(c);
    }
  }
  throw InputError("rotation has no unique axis");
}

int rotation_order(int trace) {
  switch (trace) {
    case -1: return 2;
    case 0: return 3;
    case 1: return 4;
    case 2: return 6;
    default: throw InputError("non-crystallographic rotation (trace " + std::to_string(trace) + ")");
  }
}

// Denominators 1..12 on a common grid; every space-group translation (a
// multiple of 1/24) is exactly representable too.
constexpr int kGrid = 27720;

std::vector<int> probe_values() {
  std::set<int> values;
  for (int d = 1; d <= 12; ++d)
    for (int n = 0; n < d; ++n) values.insert(n * (kGrid / d));
  return {values.begin(), values.end()};
}

std::vector<SiteClass> build_site_classes(const SpaceGroupTable& table, int sg) {
  const auto& ops = table.ops(sg);
  const int n_ops = static_cast<int>(ops.size());
  constexpr int kScale = kGrid / SymOp::kDenominator;

  // Distinct stabilizers (as sorted op indices) in order of first appearance.
  std::map<std::vector<int>, std::size_t> seen;
  std::vector<std::pair<std::vector<int>, Vec3>> found;
  auto record = [&](std::vector<int> key, const Vec3& point) {
    if (seen.emplace(key, found.size()).second) found.emplace_back(std::move(key), point);
  };

  const std::vector<int> values = probe_values();
  std::vector<int> members;
  members.reserve(n_ops);
  for (int a : values) {
    for (int b : values) {
      for (int c : values) {
        const int x[3] = {a, b, c};
        members.clear();
        for (int o = 0; o < n_ops; ++o) {
          const SymOp& op = ops[o];
          bool fixed = true;
          for (int i = 0; i < 3 && fixed; ++i) {
            long y = static_cast<long>(op.trans24[i]) * kScale - x[i];
            for (int j = 0; j < 3; ++j) y += static_cast<long>(op.r(i, j)) * x[j];
            fixed = (y % kGrid) == 0;
          }
          if (fixed) members.push_back(o);
        }
        if (seen.find(members) == seen.end()) {
          record(members, Vec3(a, b, c) / static_cast<double>(kGrid));
        }
      }
    }
  }
  const int identity = table.index_of(sg, SymOp::identity());
  record({identity}, Vec3(0.1234, 0.4567, 0.8912));

  std::vector<SiteClass> classes;
  std::set<std::vector<int>> assigned;
  for (const auto& [key, point] : found) {
    if (assigned.count(key)) continue;
    SiteClass cls;
    cls.index = static_cast<int>(classes.size());
    cls.order = static_cast<int>(key.size());
    std::set<std::vector<int>> conjugates;
    for (const SymOp& g : ops) {
      const SymOp g_inv = g.inverse();
      std::vector<int> conj;
      conj.reserve(key.size());
      for (int s : key) {
        const int idx = table.index_of(sg, g.compose(ops[s]).compose(g_inv));
        if (idx < 0) throw Error("operator table is not closed under conjugation");
        conj.push_back(idx);
      }
      std::sort(conj.begin(), conj.end());
      if (!conjugates.insert(conj).second) continue;
      assigned.insert(conj);
      std::vector<SymOp> sub;
      sub.reserve(conj.size());
      for (int idx : conj) sub.push_back(ops[idx]);
      cls.codes.push_back(encode_site_symmetry(sub));
      cls.subgroups.push_back(std::move(sub));
      cls.fixed_points.push_back(wrap_unit(g.apply(point)));
    }
    classes.push_back(std::move(cls));
  }
  return classes;
}

}  // namespace

const std::vector<SiteClass>& SpaceGroupTable::site_classes(int sg) const {
  ops(sg);
  std::call_once(class_once_[sg], [&] { classes_[sg] = build_site_classes(*this, sg); });
  return classes_[sg];
}

const std::vector<SiteClass>& site_classes(int sg, const SpaceGroupTable& table) {
  return table.site_classes(sg);
}

SiteVocabulary SiteVocabulary::parse(std::string_view text, std::string_view source) {
  SiteVocabulary vocab;
  std::array<bool, kNumAxes> have_axis{};
  std::array<bool, kNumSiteLabels> have_label{};
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& msg) {
    throw InputError(std::string(source) + ":" + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string kind;
    if (!(fields >> kind) || kind[0] == '#') continue;
    int index = 0;
    if (!(fields >> index)) fail("missing index");
    if (kind == "axis") {
      Direction d{};
      if (!(fields >> d[0] >> d[1] >> d[2])) fail("axis needs three integer components");
      if (index < 1 || index > kNumAxes) fail("axis index out of range");
      vocab.axes[index - 1] = normalize_direction(d);
      have_axis[index - 1] = true;
    } else if (kind == "label") {
      std::string symbol;
      if (!(fields >> symbol)) fail("label needs a symbol");
      if (index < 1 || index > kNumSiteLabels) fail("label index out of range");
      vocab.symbols[index - 1] = symbol;
      have_label[index - 1] = true;
    } else {
      fail("unknown record '" + kind + "'");
    }
  }
  if (std::find(have_axis.begin(), have_axis.end(), false) != have_axis.end() ||
      std::find(have_label.begin(), have_label.end(), false) != have_label.end()) {
    throw InputError(std::string(source) + ": vocabulary must define 15 axes and 13 labels");
  }
  for (const char* required : {"1", "2", "3", "4", "6", "-1", "m", "-3", "-4", "-6", "2/m", "4/m", "6/m"}) {
    vocab.label(required);
  }
  return vocab;
}

const SiteVocabulary& SiteVocabulary::builtin() {
  static const SiteVocabulary vocab =
      parse(embedded::file("site_symmetry_axes.txt"), "site_symmetry_axes.txt");
  return vocab;
}

int SiteVocabulary::label(std::string_view symbol) const {
  for (int i = 0; i < kNumSiteLabels; ++i) {
    if (symbols[i] == symbol) return i + 1;
  }
  throw InputError("site-symmetry vocabulary has no label '" + std::string(symbol) + "'");
}

int SiteVocabulary::axis_index(const std::array<int, 3>& direction) const {
  const Direction d = normalize_direction(direction);
  for (int i = 0; i < kNumAxes; ++i) {
    if (axes[i] == d) return i;
  }
  return -1;
}

SiteSymmetryCode encode_site_symmetry(std::span<const SymOp> stab, const SiteVocabulary& vocab) {
  struct AxisContent {
    int proper_order = 1;
    bool mirror = false, bar4 = false, bar6 = false;
  };
  std::array<AxisContent, kNumAxes> content{};
  bool inversion = false;
  for (const SymOp& op : stab) {
    const int det = op.determinant();
    SymOp proper = op;
    if (det < 0)
      for (auto& v : proper.rot) v = -v;
    if (proper.rot == SymOp::identity().rot) {
      if (det < 0) inversion = true;
      continue;
    }
    const int order = rotation_order(proper.trace());
    const Direction axis = rotation_axis(proper);
    const int slot = vocab.axis_index(axis);
    if (slot < 0) {
      throw InputError("operation axis [" + std::to_string(axis[0]) + " " +
                       std::to_string(axis[1]) + " " + std::to_string(axis[2]) +
                       "] is not one of the canonical axes");
    }
    AxisContent& c = content[slot];
    if (det > 0) {
      c.proper_order = std::max(c.proper_order, order);
    } else if (order == 2) {
      c.mirror = true;
    } else if (order == 4) {
      c.bar4 = true;
    } else if (order == 6) {
      c.bar6 = true;
    }
    // -3 always comes with the inversion and is labelled through it.
  }
  SiteSymmetryCode code;
  for (int a = 0; a < kNumAxes; ++a) {
    const AxisContent& c = content[a];
    std::string_view symbol;
    if (inversion) {
      switch (c.proper_order) {
        case 1: symbol = "-1"; break;
        case 2: symbol = "2/m"; break;
        case 3: symbol = "-3"; break;
        case 4: symbol = "4/m"; break;
        default: symbol = "6/m"; break;
      }
    } else if (c.bar6 || (c.mirror && c.proper_order == 3)) {
      symbol = "-6";
    } else if (c.bar4) {
      symbol = "-4";
    } else if (c.mirror) {
      symbol = "m";
    } else {
      switch (c.proper_order) {
        case 1: symbol = "1"; break;
        case 2: symbol = "2"; break;
        case 3: symbol = "3"; break;
        case 4: symbol = "4"; break;
        default: symbol = "6"; break;
      }
    }
    code.labels[a] = static_cast<std::uint8_t>(vocab.label(symbol));
  }
  return code;
}

double code_distance(const SiteSymmetryCode& a, const SiteSymmetryCode& b) {
  int mismatches = 0;
  for (int i = 0; i < kNumAxes; ++i) mismatches += a.labels[i] != b.labels[i];
  return std::sqrt(2.0 * mismatches);
}

SiteMatch match_site_symmetry(const SiteSymmetryCode& pred, int sg, const SpaceGroupTable& table) {
  const auto& classes = table.site_classes(sg);
  SiteMatch best;
  int best_order = -1;
  best.distance = std::numeric_limits<double>::infinity();
  for (const SiteClass& cls : classes) {
    for (const SiteSymmetryCode& code : cls.codes) {
      const double d = code_distance(pred, code);
      const bool better = d < best.distance || (d == best.distance && cls.order > best_order);
      if (better) {
        best.class_index = cls.index;
        best.distance = d;
        best.code = code;
        best_order = cls.order;
      }
    }
  }
  const SiteClass& cls = classes[best.class_index];
  for (std::size_t i = 0; i < cls.codes.size(); ++i) {
    if (cls.codes[i] == best.code) best.candidates.push_back(i);
  }
  return best;
}

Vec3 project_to_wyckoff(const Vec3& x, std::span<const SymOp> stab) {
  if (stab.empty()) throw ReconstructionError("empty stabilizer");
  auto is_fixed = [&](const Vec3& p) {
    for (const SymOp& g : stab) {
      if (min_image(g.apply(p) - p).norm() > 1e-8) return false;
    }
    return true;
  };
  Vec3 p = x;
  for (int iter = 0; iter < 4; ++iter) {
    if (is_fixed(p)) return wrap_unit(p);
    Vec3 shift = Vec3::Zero();
    for (const SymOp& g : stab) shift += min_image(g.apply(p) - p);
    p += shift / static_cast<double>(stab.size());
  }
  if (is_fixed(p)) return wrap_unit(p);
  throw ReconstructionError("averaging over the site-symmetry group did not reach a fixed point");
}

namespace {

/// Offsets s (mod V, the common fixed subspace) with (R - I) s integral for
/// every rotation R, i.e. the distinct fixed-point sets of one point group.
/// Crystallographic offsets have denominators dividing 12.
std::vector<Vec3> fixed_offsets(const std::vector<std::array<int, 9>>& rots, const Mat3& complement) {
  constexpr int N = 12;
  std::vector<Vec3> out;
  std::set<std::array<long, 3>> seen;
  for (int a = 0; a < N; ++a) {
    for (int b = 0; b < N; ++b) {
      for (int c = 0; c < N; ++c) {
        const int n[3] = {a, b, c};
        bool ok = true;
        for (const auto& r : rots) {
          for (int i = 0; i < 3 && ok; ++i) {
            const int v = r[3 * i] * n[0] + r[3 * i + 1] * n[1] + r[3 * i + 2] * n[2] - n[i];
            ok = v % N == 0;
          }
          if (!ok) break;
        }
        if (!ok) continue;
        const Vec3 s(double(a) / N, double(b) / N, double(c) / N);
        const Vec3 q = wrap_unit(complement * s);
        std::array<long, 3> key;
        for (int i = 0; i < 3; ++i) key[i] = std::lround(q[i] * 1e6) % 1000000;
        if (seen.insert(key).second) out.push_back(s);
      }
    }
  }
  return out;
}

}  // namespace

Vec3 nearest_fixed_point(const Vec3& x, std::span<const SymOp> stab, const Vec3& anchor,
                         const Mat3& lattice) {
  if (stab.empty()) throw ReconstructionError("empty stabilizer");
  if (stab.size() == 1) return wrap_unit(x);

  std::vector<std::array<int, 9>> rots;
  Mat3 proj = Mat3::Zero();
  for (const SymOp& g : stab) {
    rots.push_back(g.rot);
    proj += g.rotation();
  }
  proj /= static_cast<double>(stab.size());
  std::sort(rots.begin(), rots.end());

  static std::mutex mutex;
  static std::map<std::vector<std::array<int, 9>>, std::vector<Vec3>> cache;
  const std::vector<Vec3>* offsets = nullptr;
  {
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(rots);
    if (it == cache.end()) {
      it = cache.emplace(rots, fixed_offsets(rots, Mat3::Identity() - proj)).first;
    }
    offsets = &it->second;  // std::map nodes are stable
  }

  Vec3 best = anchor;
  double best_dist = std::numeric_limits<double>::infinity();
  for (const Vec3& s : *offsets) {
    const Vec3 base = anchor + s;
    const Vec3 d = min_image(x - base);
    for (int i = -1; i <= 1; ++i) {
      for (int j = -1; j <= 1; ++j) {
        for (int k = -1; k <= 1; ++k) {
          const Vec3 p = wrap_unit(base + proj * (d + Vec3(i, j, k)));
          const double dist = periodic_distance(p, x, lattice);
          if (dist < best_dist - 1e-12) {
            best_dist = dist;
            best = p;
          }
        }
      }
    }
  }
  return best;
}

}  // namespace symflow
