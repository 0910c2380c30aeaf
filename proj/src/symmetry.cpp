#include "symflow/symmetry.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "symflow/embedded_data.hpp"
#include "symflow/error.hpp"

namespace symflow {
namespace {

int mod24(int v) {
  const int m = v % SymOp::kDenominator;
  return m < 0 ? m + SymOp::kDenominator : m;
}

void check_sg(int sg) {
  if (sg < 1 || sg > kNumSpaceGroups) {
    throw InputError("space group number must be in 1..230, got " + std::to_string(sg));
  }
}

// "n/d" or an integer, as a numerator over 24.
int parse_translation(const std::string& token, std::string_view source, int line) {
  const auto slash = token.find('/');
  long num = 0, den = 1;
  try {
    if (slash == std::string::npos) {
      num = std::stol(token);
    } else {
      num = std::stol(token.substr(0, slash));
      den = std::stol(token.substr(slash + 1));
    }
  } catch (const std::exception&) {
    den = 0;
  }
  if (den <= 0 || SymOp::kDenominator % den != 0) {
    throw InputError(std::string(source) + ":" + std::to_string(line) +
                     ": translation '" + token + "' is not a multiple of 1/24");
  }
  return mod24(static_cast<int>(num * (SymOp::kDenominator / den)));
}

}  // namespace

Mat3 SymOp::rotation() const {
  Mat3 m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = r(i, j);
  return m;
}

Vec3 SymOp::translation() const {
  return Vec3(trans24[0], trans24[1], trans24[2]) / static_cast<double>(kDenominator);
}

int SymOp::determinant() const {
  return r(0, 0) * (r(1, 1) * r(2, 2) - r(1, 2) * r(2, 1)) -
         r(0, 1) * (r(1, 0) * r(2, 2) - r(1, 2) * r(2, 0)) +
         r(0, 2) * (r(1, 0) * r(2, 1) - r(1, 1) * r(2, 0));
}

Vec3 SymOp::apply(const Vec3& x) const {
  Vec3 y;
  for (int i = 0; i < 3; ++i) {
    y[i] = r(i, 0) * x[0] + r(i, 1) * x[1] + r(i, 2) * x[2] +
           trans24[i] / static_cast<double>(kDenominator);
  }
  return y;
}

SymOp SymOp::compose(const SymOp& rhs) const {
  SymOp out;
  for (int i = 0; i < 3; ++i) {
    int t = trans24[i];
    for (int j = 0; j < 3; ++j) {
      int v = 0;
      for (int k = 0; k < 3; ++k) v += r(i, k) * rhs.r(k, j);
      out.rot[3 * i + j] = v;
      t += r(i, j) * rhs.trans24[j];
    }
    out.trans24[i] = mod24(t);
  }
  return out;
}

SymOp SymOp::inverse() const {
  const int det = determinant();
  SymOp out;
  // Adjugate over the determinant; det is +-1 for crystallographic operations.
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const int a = (j + 1) % 3, b = (j + 2) % 3, c = (i + 1) % 3, d = (i + 2) % 3;
      out.rot[3 * i + j] = (r(a, c) * r(b, d) - r(a, d) * r(b, c)) * det;
    }
  }
  for (int i = 0; i < 3; ++i) {
    int t = 0;
    for (int j = 0; j < 3; ++j) t -= out.r(i, j) * trans24[j];
    out.trans24[i] = mod24(t);
  }
  return out;
}

bool is_group(std::span<const SymOp> ops) {
  std::map<SymOp, int> present;
  for (const auto& op : ops) present[op] = 1;
  if (!present.count(SymOp::identity())) return false;
  for (const auto& a : ops) {
    if (!present.count(a.inverse())) return false;
    for (const auto& b : ops) {
      if (!present.count(a.compose(b))) return false;
    }
  }
  return true;
}

std::shared_ptr<const SpaceGroupTable> SpaceGroupTable::parse(std::string_view text,
                                                              std::string_view source) {
  std::shared_ptr<SpaceGroupTable> table(new SpaceGroupTable());
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  int current = 0;
  std::size_t expected = 0;
  auto finish_block = [&](int at_line) {
    if (current == 0) return;
    if (table->ops_[current].size() != expected) {
      throw InputError(std::string(source) + ":" + std::to_string(at_line) + ": space group " +
                       std::to_string(current) + " lists " +
                       std::to_string(table->ops_[current].size()) + " operations, header says " +
                       std::to_string(expected));
    }
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string head;
    if (!(fields >> head) || head[0] == '#') continue;
    if (head == "spacegroup") {
      finish_block(line_no);
      if (!(fields >> current >> expected) || current < 1 || current > kNumSpaceGroups) {
        throw InputError(std::string(source) + ":" + std::to_string(line_no) +
                         ": malformed space group header");
      }
      if (!table->ops_[current].empty()) {
        throw InputError(std::string(source) + ":" + std::to_string(line_no) +
                         ": duplicate space group " + std::to_string(current));
      }
      continue;
    }
    if (current == 0) {
      throw InputError(std::string(source) + ":" + std::to_string(line_no) +
                       ": operation before any space group header");
    }
    std::vector<std::string> tokens{head};
    for (std::string tok; fields >> tok;) tokens.push_back(tok);
    if (tokens.size() != 12) {
      throw InputError(std::string(source) + ":" + std::to_string(line_no) +
                       ": expected 12 fields per operation");
    }
    SymOp op;
    try {
      for (int i = 0; i < 9; ++i) op.rot[i] = std::stoi(tokens[i]);
    } catch (const std::exception&) {
      throw InputError(std::string(source) + ":" + std::to_string(line_no) +
                       ": rotation entries must be integers");
    }
    for (int i = 0; i < 3; ++i) op.trans24[i] = parse_translation(tokens[9 + i], source, line_no);
    if (std::abs(op.determinant()) != 1) {
      throw InputError(std::string(source) + ":" + std::to_string(line_no) +
                       ": rotation part must have determinant +-1");
    }
    table->ops_[current].push_back(op);
  }
  finish_block(line_no);
  for (int sg = 1; sg <= kNumSpaceGroups; ++sg) {
    const auto& ops = table->ops_[sg];
    if (ops.empty()) {
      throw InputError(std::string(source) + ": space group " + std::to_string(sg) + " missing");
    }
    for (std::size_t i = 0; i < ops.size(); ++i) table->index_[sg][ops[i]] = static_cast<int>(i);
    if (table->index_[sg].size() != ops.size()) {
      throw InputError(std::string(source) + ": repeated operation in space group " +
                       std::to_string(sg));
    }
    if (!table->index_[sg].count(SymOp::identity())) {
      throw InputError(std::string(source) + ": space group " + std::to_string(sg) +
                       " lacks the identity");
    }
  }
  return table;
}

std::shared_ptr<const SpaceGroupTable> SpaceGroupTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open operator table " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

const SpaceGroupTable& SpaceGroupTable::builtin() {
  static const std::shared_ptr<const SpaceGroupTable> table =
      parse(embedded::file("spacegroup_ops.txt"), "spacegroup_ops.txt");
  return *table;
}

const std::vector<SymOp>& SpaceGroupTable::ops(int sg) const {
  check_sg(sg);
  return ops_[sg];
}

int SpaceGroupTable::index_of(int sg, const SymOp& op) const {
  check_sg(sg);
  auto it = index_[sg].find(op);
  return it == index_[sg].end() ? -1 : it->second;
}

const std::vector<SymOp>& spacegroup_ops(int sg) { return SpaceGroupTable::builtin().ops(sg); }

double periodic_distance(const Vec3& a, const Vec3& b) { return min_image(a - b).norm(); }

double periodic_distance(const Vec3& a, const Vec3& b, const Mat3& lattice) {
  const Vec3 d = min_image(a - b);
  double best = std::numeric_limits<double>::infinity();
  for (int i = -1; i <= 1; ++i)
    for (int j = -1; j <= 1; ++j)
      for (int k = -1; k <= 1; ++k) {
        const Vec3 shifted = d + Vec3(i, j, k);
        best = std::min(best, (lattice.transpose() * shifted).norm());
      }
  return best;
}

std::vector<SymOp> stabilizer(const Vec3& x, int sg, double tol, const SpaceGroupTable& table) {
  std::vector<SymOp> out;
  for (const auto& op : table.ops(sg)) {
    if (periodic_distance(op.apply(x), x) < tol) out.push_back(op);
  }
  return out;
}

std::vector<Vec3> orbit(const Vec3& x, int sg, double tol, const SpaceGroupTable& table) {
  std::vector<Vec3> out;
  for (const auto& op : table.ops(sg)) {
    const Vec3 y = wrap_unit(op.apply(x));
    bool seen = false;
    for (const auto& z : out) {
      if (periodic_distance(y, z) < tol) {
        seen = true;
        break;
      }
    }
    if (!seen) out.push_back(y);
  }
  return out;
}

}  // namespace symflow
