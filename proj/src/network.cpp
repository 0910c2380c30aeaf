#include "symflow/network.hpp"

#include <cmath>
#include <numbers>

#include "symflow/error.hpp"
#include "symflow/random.hpp"

namespace symflow {
namespace {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using CMap = Eigen::Map<const MatrixXd>;
using GMap = Eigen::Map<MatrixXd>;

struct Linear {
  std::size_t w = 0, b = 0;
  int in = 0, out = 0;
  bool bias = true;
};

struct Mlp {
  Linear l[3];
};

struct Arch {
  Linear atom, coord, sym, k;
  std::size_t sg_table = 0;
  Mlp init;
  std::vector<Mlp> msg, upd;
  Mlp head_k, head_x, head_a, head_s;
};

class LayoutBuilder {
 public:
  std::vector<ParamBlock> blocks;

  std::size_t add(const std::string& name, int rows, int cols) {
    blocks.push_back({name, rows, cols, offset_});
    const std::size_t at = offset_;
    offset_ += static_cast<std::size_t>(rows) * cols;
    return at;
  }
  Linear linear(const std::string& name, int in, int out, bool bias = true) {
    Linear l;
    l.in = in;
    l.out = out;
    l.bias = bias;
    l.w = add(name + ".weight", in, out);
    if (bias) l.b = add(name + ".bias", 1, out);
    return l;
  }
  Mlp mlp(const std::string& name, int in, int hidden, int out) {
    return {{linear(name + ".0", in, hidden), linear(name + ".1", hidden, hidden),
             linear(name + ".2", hidden, out)}};
  }

 private:
  std::size_t offset_ = 0;
};

Arch build_arch(const NetConfig& c, std::vector<ParamBlock>* blocks) {
  LayoutBuilder b;
  Arch a;
  const int H = c.hidden_dim, E = c.embed_dim, F6 = 6 * c.fourier_order;
  a.atom = b.linear("f_atom", c.num_classes, E, false);
  a.coord = b.linear("f_coord", F6, E);
  a.sym = b.linear("f_sym", kSiteOutputs, E, false);
  a.sg_table = b.add("f_sg", kNumSpaceGroups, E);
  a.k = b.linear("f_k", 6, E);
  const int init_in = (c.conditioned ? 6 : 5) * E;
  a.init = b.mlp("psi_0", init_in, H, H);
  for (int n = 0; n < c.num_layers; ++n) {
    a.msg.push_back(b.mlp("layer" + std::to_string(n) + ".psi_m", 2 * H + E + F6, H, H));
    a.upd.push_back(b.mlp("layer" + std::to_string(n) + ".psi_h", 2 * H, H, H));
  }
  a.head_k = b.mlp("psi_k", H, H, 6);
  a.head_x = b.mlp("psi_x", H, H, 3);
  a.head_a = b.mlp("psi_a", H, H, c.num_classes);
  a.head_s = b.mlp("psi_S", H, H, kSiteOutputs);
  if (blocks) *blocks = std::move(b.blocks);
  return a;
}

CMap weight(const double* p, const Linear& l) { return CMap(p + l.w, l.in, l.out); }
Eigen::Map<const RowVectorXd> bias(const double* p, const Linear& l) {
  return Eigen::Map<const RowVectorXd>(p + l.b, l.out);
}
GMap weight_grad(double* g, const Linear& l) { return GMap(g + l.w, l.in, l.out); }
Eigen::Map<RowVectorXd> bias_grad(double* g, const Linear& l) {
  return Eigen::Map<RowVectorXd>(g + l.b, l.out);
}

MatrixXd apply(const double* p, const Linear& l, const MatrixXd& x) {
  MatrixXd z = x * weight(p, l);
  if (l.bias) z.rowwise() += bias(p, l);
  return z;
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

MatrixXd silu(const MatrixXd& z) {
  return z.unaryExpr([](double v) { return v * sigmoid(v); });
}

MatrixXd silu_grad(const MatrixXd& z, const MatrixXd& dy) {
  return dy.cwiseProduct(z.unaryExpr([](double v) {
    const double s = sigmoid(v);
    return s * (1.0 + v * (1.0 - s));
  }));
}

struct MlpCache {
  MatrixXd x, z1, z2, a1, a2;
};

MatrixXd mlp_from_z1(const double* p, const Mlp& m, MatrixXd z1, MlpCache* cache) {
  MatrixXd a1 = silu(z1);
  MatrixXd z2 = apply(p, m.l[1], a1);
  MatrixXd a2 = silu(z2);
  MatrixXd y = apply(p, m.l[2], a2);
  if (cache) {
    cache->z1 = std::move(z1);
    cache->a1 = std::move(a1);
    cache->z2 = std::move(z2);
    cache->a2 = std::move(a2);
  }
  return y;
}

MatrixXd mlp(const double* p, const Mlp& m, const MatrixXd& x, MlpCache* cache) {
  if (cache) cache->x = x;
  return mlp_from_z1(p, m, apply(p, m.l[0], x), cache);
}

void accumulate_linear(double* g, const Linear& l, const MatrixXd& x, const MatrixXd& dz) {
  weight_grad(g, l).noalias() += x.transpose() * dz;
  if (l.bias) bias_grad(g, l) += dz.colwise().sum();
}

/// Gradients of the second and third layers; returns d loss / d z1.
MatrixXd mlp_back_to_z1(const double* p, const Mlp& m, const MlpCache& c, const MatrixXd& dy,
                        double* g) {
  accumulate_linear(g, m.l[2], c.a2, dy);
  MatrixXd dz2 = silu_grad(c.z2, dy * weight(p, m.l[2]).transpose());
  accumulate_linear(g, m.l[1], c.a1, dz2);
  return silu_grad(c.z1, dz2 * weight(p, m.l[1]).transpose());
}

/// Full backward pass; returns d loss / d x.
MatrixXd mlp_back(const double* p, const Mlp& m, const MlpCache& c, const MatrixXd& dy,
                  double* g) {
  MatrixXd dz1 = mlp_back_to_z1(p, m, c, dy, g);
  accumulate_linear(g, m.l[0], c.x, dz1);
  return dz1 * weight(p, m.l[0]).transpose();
}

void check_finite(const MatrixXd& m, const std::string& stage) {
  if (!m.allFinite()) throw NumericalError("non-finite activation in " + stage);
}

}  // namespace

struct Network::Tape::Data {
  Arch arch;
  int D = 0;
  MatrixXd theta_a, theta_s, fourier_x;
  RowVectorXd mu_k, fk;
  int sg = 1;
  MlpCache init;
  std::vector<int> src, dst;
  MatrixXd pair_features;
  std::vector<MatrixXd> h_in;  // node features entering each layer
  std::vector<MlpCache> msg, upd;
  MatrixXd h_final;
  MlpCache head_k, head_x, head_a, head_s;
};

Network::Tape::Tape() : data_(std::make_unique<Data>()) {}
Network::Tape::~Tape() = default;
Network::Tape::Tape(Tape&&) noexcept = default;
Network::Tape& Network::Tape::operator=(Tape&&) noexcept = default;

NetConfig NetConfig::desk(int num_classes) {
  NetConfig c;
  c.num_classes = num_classes;
  return c;
}

NetConfig NetConfig::full(int num_classes) {
  NetConfig c;
  c.hidden_dim = 512;
  c.embed_dim = 128;
  c.num_layers = 6;
  c.num_classes = num_classes;
  return c;
}

void NetConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) throw InputError(std::string("network config: ") + name + " must be positive");
  };
  positive(hidden_dim, "hidden_dim");
  positive(embed_dim, "embed_dim");
  positive(num_layers, "num_layers");
  positive(fourier_order, "fourier_order");
  positive(num_classes, "num_classes");
  if (embed_dim % 2 != 0) throw InputError("network config: embed_dim must be even");
}

Eigen::RowVectorXd fourier_features(const Eigen::Vector3d& delta, int order) {
  RowVectorXd out(6 * order);
  for (int c = 0; c < 3; ++c) {
    const double d = delta[c] - std::floor(delta[c]);
    for (int n = 1; n <= order; ++n) {
      const double arg = 2.0 * std::numbers::pi * n * d;
      const int at = (c * order + n - 1) * 2;
      out[at] = std::sin(arg);
      out[at + 1] = std::cos(arg);
    }
  }
  return out;
}

Eigen::RowVectorXd sinusoidal_encoding(double v, int dim) {
  RowVectorXd out(dim);
  for (int i = 0; i < dim / 2; ++i) {
    const double freq = std::pow(10000.0, -2.0 * i / dim);
    out[2 * i] = std::sin(v * freq);
    out[2 * i + 1] = std::cos(v * freq);
  }
  return out;
}

const char* to_string(LatticeHead head) {
  return head == LatticeHead::noise ? "noise" : "data";
}

LatticeHead lattice_head_from_string(const std::string& name) {
  if (name == "noise") return LatticeHead::noise;
  if (name == "data") return LatticeHead::data;
  throw InputError("unknown lattice head '" + name + "' (expected noise or data)");
}

std::vector<ParamBlock> parameter_layout(const NetConfig& config) {
  std::vector<ParamBlock> blocks;
  build_arch(config, &blocks);
  return blocks;
}

Network::Network(const NetConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  const Arch arch = build_arch(config_, &blocks_);
  params_.assign(blocks_.back().offset + blocks_.back().size(), 0.0);
  Rng rng(seed);
  for (const auto& block : blocks_) {
    double* p = params_.data() + block.offset;
    if (block.name == "f_sg") {
      for (std::size_t i = 0; i < block.size(); ++i) p[i] = standard_normal(rng);
      continue;
    }
    // Biases share the fan-in of their weight, whose block precedes them.
    int fan_in = block.rows;
    if (block.name.ends_with(".bias")) {
      const auto& w = *(&block - 1);
      fan_in = w.rows;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < block.size(); ++i) p[i] = uniform(rng, -bound, bound);
  }
  (void)arch;
}

Network::Network(const NetConfig& config, std::vector<double> params)
    : config_(config), params_(std::move(params)) {
  config_.validate();
  build_arch(config_, &blocks_);
  const std::size_t expected = blocks_.back().offset + blocks_.back().size();
  if (params_.size() != expected) {
    throw InputError("network parameters: expected " + std::to_string(expected) + " values, got " +
                     std::to_string(params_.size()));
  }
}

NetOutput Network::forward(const NetInput& in) const {
  Tape tape;
  return forward(in, tape);
}

NetOutput Network::forward(const NetInput& in, Tape& tape) const {
  const NetConfig& c = config_;
  const int D = static_cast<int>(in.mu_x.rows());
  const int E = c.embed_dim, H = c.hidden_dim, F = c.fourier_order;
  if (D < 1) throw InputError("network input: at least one node required");
  if (in.mu_x.cols() != 3 || in.theta_a.rows() != D || in.theta_a.cols() != c.num_classes ||
      in.theta_s.rows() != D || in.theta_s.cols() != kSiteOutputs || in.mu_k.size() != 6) {
    throw InputError("network input: inconsistent shapes");
  }
  if (in.sg < 1 || in.sg > kNumSpaceGroups) throw InputError("network input: invalid space group");
  if (c.conditioned != in.property.has_value()) {
    throw InputError(c.conditioned ? "network input: conditioned network needs a property value"
                                   : "network input: property given to an unconditioned network");
  }

  auto& T = *tape.data_;
  T = Tape::Data{};
  T.arch = build_arch(c, nullptr);
  const Arch& a = T.arch;
  const double* p = params_.data();
  T.D = D;
  T.sg = in.sg;
  T.theta_a = in.theta_a;
  T.theta_s = in.theta_s;
  T.mu_k = in.mu_k.transpose();

  T.fourier_x.resize(D, 6 * F);
  for (int d = 0; d < D; ++d) T.fourier_x.row(d) = fourier_features(in.mu_x.row(d).transpose(), F);

  MatrixXd x0(D, (c.conditioned ? 6 : 5) * E);
  x0.middleCols(0, E) = apply(p, a.atom, in.theta_a);
  x0.middleCols(E, E) = apply(p, a.coord, T.fourier_x);
  x0.middleCols(2 * E, E) = apply(p, a.sym, in.theta_s);
  x0.middleCols(3 * E, E).rowwise() = sinusoidal_encoding(1000.0 * in.t, E);
  x0.middleCols(4 * E, E).rowwise() = CMap(p + a.sg_table, kNumSpaceGroups, E).row(in.sg - 1);
  if (c.conditioned) x0.middleCols(5 * E, E).rowwise() = sinusoidal_encoding(10.0 * *in.property, E);
  MatrixXd h = mlp(p, a.init, x0, &T.init);
  check_finite(h, "node initialisation");

  T.fk = apply(p, a.k, T.mu_k);
  for (int i = 0; i < D; ++i) {
    for (int j = 0; j < D; ++j) {
      if (i == j) continue;
      T.src.push_back(i);
      T.dst.push_back(j);
    }
  }
  const int P = static_cast<int>(T.src.size());
  T.pair_features.resize(P, 6 * F);
  for (int q = 0; q < P; ++q) {
    const Eigen::Vector3d delta = (in.mu_x.row(T.dst[q]) - in.mu_x.row(T.src[q])).transpose();
    T.pair_features.row(q) = fourier_features(delta, F);
  }

  T.msg.resize(c.num_layers);
  T.upd.resize(c.num_layers);
  for (int n = 0; n < c.num_layers; ++n) {
    T.h_in.push_back(h);
    const Linear& first = a.msg[n].l[0];
    const CMap W = weight(p, first);
    MatrixXd m = MatrixXd::Zero(D, H);
    if (P > 0) {
      const MatrixXd hi = h * W.topRows(H);
      const MatrixXd hj = h * W.middleRows(H, H);
      const RowVectorXd shared = T.fk * W.middleRows(2 * H, E) + bias(p, first);
      MatrixXd z1 = T.pair_features * W.bottomRows(6 * F);
      for (int q = 0; q < P; ++q) z1.row(q) += hi.row(T.src[q]) + hj.row(T.dst[q]) + shared;
      const MatrixXd out = mlp_from_z1(p, a.msg[n], std::move(z1), &T.msg[n]);
      for (int q = 0; q < P; ++q) m.row(T.src[q]) += out.row(q);
    }
    MatrixXd u(D, 2 * H);
    u << h, m;
    h += mlp(p, a.upd[n], u, &T.upd[n]);
    check_finite(h, "message-passing layer " + std::to_string(n));
  }
  T.h_final = h;

  NetOutput out;
  out.eps_k = mlp(p, a.head_k, h.colwise().mean(), &T.head_k).transpose();
  out.eps_x = in.mu_x + mlp(p, a.head_x, h, &T.head_x);
  out.logits_a = mlp(p, a.head_a, h, &T.head_a);
  out.logits_s = mlp(p, a.head_s, h, &T.head_s);
  check_finite(out.eps_k, "output head k");
  check_finite(out.eps_x, "output head x");
  check_finite(out.logits_a, "output head a");
  check_finite(out.logits_s, "output head S");
  return out;
}

void Network::backward(const Tape& tape, const NetOutput& d_out, std::span<double> grad) const {
  if (grad.size() != params_.size()) throw InputError("gradient buffer has the wrong size");
  const auto& T = *tape.data_;
  const Arch& a = T.arch;
  const NetConfig& c = config_;
  const int D = T.D, E = c.embed_dim, H = c.hidden_dim, F = c.fourier_order;
  const double* p = params_.data();
  double* g = grad.data();

  const MatrixXd d_pool = mlp_back(p, a.head_k, T.head_k, d_out.eps_k.transpose(), g);
  MatrixXd dh = mlp_back(p, a.head_x, T.head_x, d_out.eps_x, g);
  dh += mlp_back(p, a.head_a, T.head_a, d_out.logits_a, g);
  dh += mlp_back(p, a.head_s, T.head_s, d_out.logits_s, g);
  dh.rowwise() += d_pool.row(0) / static_cast<double>(D);

  RowVectorXd d_fk = RowVectorXd::Zero(E);
  const int P = static_cast<int>(T.src.size());
  for (int n = c.num_layers - 1; n >= 0; --n) {
    const MatrixXd& h = T.h_in[n];
    const MatrixXd du = mlp_back(p, a.upd[n], T.upd[n], dh, g);
    dh += du.leftCols(H);
    if (P == 0) continue;
    const MatrixXd dm = du.rightCols(H);
    MatrixXd d_out_pairs(P, H);
    for (int q = 0; q < P; ++q) d_out_pairs.row(q) = dm.row(T.src[q]);
    const MatrixXd dz1 = mlp_back_to_z1(p, a.msg[n], T.msg[n], d_out_pairs, g);

    const Linear& first = a.msg[n].l[0];
    const CMap W = weight(p, first);
    GMap dW = weight_grad(g, first);
    MatrixXd ds = MatrixXd::Zero(D, H), dt = MatrixXd::Zero(D, H);
    for (int q = 0; q < P; ++q) {
      ds.row(T.src[q]) += dz1.row(q);
      dt.row(T.dst[q]) += dz1.row(q);
    }
    const RowVectorXd dsum = dz1.colwise().sum();
    dW.topRows(H).noalias() += h.transpose() * ds;
    dW.middleRows(H, H).noalias() += h.transpose() * dt;
    dW.middleRows(2 * H, E).noalias() += T.fk.transpose() * dsum;
    dW.bottomRows(6 * F).noalias() += T.pair_features.transpose() * dz1;
    bias_grad(g, first) += dsum;
    d_fk += dsum * W.middleRows(2 * H, E).transpose();
    dh.noalias() += ds * W.topRows(H).transpose() + dt * W.middleRows(H, H).transpose();
  }
  accumulate_linear(g, a.k, T.mu_k, d_fk);

  const MatrixXd dx0 = mlp_back(p, a.init, T.init, dh, g);
  accumulate_linear(g, a.atom, T.theta_a, dx0.middleCols(0, E));
  accumulate_linear(g, a.coord, T.fourier_x, dx0.middleCols(E, E));
  accumulate_linear(g, a.sym, T.theta_s, dx0.middleCols(2 * E, E));
  GMap(g + a.sg_table, kNumSpaceGroups, E).row(T.sg - 1) += dx0.middleCols(4 * E, E).colwise().sum();
}

}  // namespace symflow
