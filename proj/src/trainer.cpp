#include "symflow/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "symflow/cif.hpp"
#include "symflow/error.hpp"
#include "symflow/lattice.hpp"
#include "symflow/metrics.hpp"
#include "symflow/prototypes.hpp"
#include "symflow/symmetry.hpp"

namespace symflow {
namespace {

constexpr double kDivergence = 1e6;

/// Gradient of sum_rows c |e - softmax(z)|^2 with respect to z, rows of `probs`
/// being softmax(z).
Eigen::MatrixXd simplex_loss_grad(const Eigen::MatrixXd& onehots, const Eigen::MatrixXd& probs,
                                  double c) {
  const Eigen::MatrixXd dp = -2.0 * c * (onehots - probs);
  const Eigen::VectorXd inner = dp.cwiseProduct(probs).rowwise().sum();
  return probs.cwiseProduct(dp.colwise() - inner);
}

void check_term(double v, const char* term, std::size_t example) {
  if (!std::isfinite(v)) {
    throw NumericalError(std::string("non-finite loss term ") + term + " in example " +
                         std::to_string(example));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Dataset

void DatasetManifest::refresh() {
  num_classes = 0;
  histogram.clear();
  for (const auto& e : entries) {
    for (const auto& site : e.unit.sites) num_classes = std::max(num_classes, site.number);
    ++histogram[{e.unit.sg, static_cast<int>(e.unit.sites.size())}];
  }
}

DatasetManifest ingest(std::span<const IngestSource> sources, const IngestOptions& options) {
  if (sources.empty()) throw InputError("ingest: no input structures");
  if (!options.property.empty() && options.property != "density") {
    throw InputError("ingest: unknown property '" + options.property + "'");
  }
  DatasetManifest m;
  bool any_property = false;
  for (const auto& src : sources) {
    try {
      const cif::Structure s = cif::parse_cif(src.cif_text, src.name);
      const std::optional<int> sg = src.sg ? src.sg : s.sg;
      if (!sg) throw InputError("no space-group label");
      ManifestEntry e;
      e.name = src.name;
      e.unit = extract_asymmetric_unit(s.crystal, *sg, options.tol);
      if (options.property == "density") {
        e.property = metrics::density(s.crystal);
      } else {
        e.property = src.property;
      }
      any_property = any_property || e.property.has_value();
      m.entries.push_back(std::move(e));
    } catch (const Error& err) {
      m.skipped.push_back(src.name + ": " + err.what());
    }
  }
  if (m.entries.empty()) {
    std::string why = "ingest: no usable structures";
    for (const auto& s : m.skipped) why += "\n  " + s;
    throw InputError(why);
  }
  if (!options.property.empty()) {
    m.property_name = options.property;
  } else if (any_property) {
    m.property_name = "property";
  }
  m.refresh();
  return m;
}

DatasetManifest ingest_prototypes(const IngestOptions& options, bool training_only) {
  std::vector<IngestSource> sources;
  for (const auto& p : load_prototypes()) {
    if (training_only && !p.training) continue;
    sources.push_back({p.name, p.cif, p.sg, std::nullopt});
  }
  return ingest(sources, options);
}

DatasetManifest jitter_manifest(const DatasetManifest& manifest, int copies, double spread,
                                std::uint64_t seed) {
  if (copies < 1) throw InputError("jitter: copies must be >= 1");
  if (!(spread >= 0.0 && spread < 1.0)) throw InputError("jitter: spread must be in [0, 1)");
  DatasetManifest out;
  out.property_name = "density";
  Rng rng(seed);
  for (const auto& e : manifest.entries) {
    for (int c = 0; c < copies; ++c) {
      ManifestEntry j = e;
      j.name = e.name + "#" + std::to_string(c);
      // exp(S + ln(s) I) = s exp(S): an isotropic rescaling by s.
      j.unit.k[5] += std::log(uniform(rng, 1.0 - spread, 1.0 + spread));
      j.property = metrics::density(reconstruct_unit_cell(j.unit));
      out.entries.push_back(std::move(j));
    }
  }
  out.refresh();
  return out;
}

// ---------------------------------------------------------------------------
// Configuration

void TrainConfig::apply_profile(const std::string& name) {
  if (name == "desk") {
    hidden_dim = 64;
    embed_dim = 32;
    num_layers = 3;
    fourier_order = 8;
  } else if (name == "full") {
    hidden_dim = 512;
    embed_dim = 128;
    num_layers = 6;
    fourier_order = 8;
    batch_size = 256;
    epochs = 2000;
  } else {
    throw InputError("unknown profile '" + name + "' (expected desk or full)");
  }
  profile = name;
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* key, const char* what) {
    if (!ok) throw InputError(std::string("config key ") + key + ": " + what);
  };
  require(batch_size >= 1, "batch_size", "must be >= 1");
  require(epochs >= 1, "epochs", "must be >= 1");
  require(learning_rate > 0, "learning_rate", "must be > 0");
  require(plateau_factor > 0 && plateau_factor < 1, "plateau_factor", "must be in (0, 1)");
  require(plateau_patience >= 0, "plateau_patience", "must be >= 0");
  require(min_learning_rate >= 0, "min_learning_rate", "must be >= 0");
  require(weights.x >= 0, "lambda_x", "must be >= 0");
  require(weights.s >= 0, "lambda_s", "must be >= 0");
  require(weights.a >= 0, "lambda_a", "must be >= 0");
  require(weights.k >= 0, "lambda_k", "must be >= 0");
  require(sigma_x > 0 && sigma_x < 1, "sigma_x", "must be in (0, 1)");
  require(sigma_k > 0 && sigma_k < 1, "sigma_k", "must be in (0, 1)");
  require(beta_a > 0, "beta_a", "must be > 0");
  require(beta_s > 0, "beta_s", "must be > 0");
  require(threads >= 1, "threads", "must be >= 1");
  require(lattice_head == "noise" || lattice_head == "data", "lattice_head", "must be noise or data");
}

// ---------------------------------------------------------------------------
// Losses

TrainingExample make_example(const ManifestEntry& entry, const std::optional<PropertyScaler>& scaler) {
  const auto& u = entry.unit;
  const int D = static_cast<int>(u.sites.size());
  if (D < 1) throw InputError(entry.name + ": empty asymmetric unit");
  TrainingExample ex;
  ex.sg = u.sg;
  const KVector k = lattice::mask_k(u.k, u.sg);
  ex.k = Eigen::Map<const Eigen::VectorXd>(k.data(), 6);
  ex.x.resize(D, 3);
  ex.atoms.resize(D);
  ex.sites.resize(D, kNumAxes);
  for (int d = 0; d < D; ++d) {
    ex.x.row(d) = u.sites[d].frac.transpose();
    ex.atoms[d] = u.sites[d].number - 1;
    for (int a = 0; a < kNumAxes; ++a) ex.sites(d, a) = u.sites[d].site.labels[a] - 1;
  }
  if (scaler) {
    if (!entry.property) throw InputError(entry.name + ": missing property value");
    ex.property = scaler->standardize(*entry.property);
  }
  return ex;
}

FlowDraw draw_flow(const TrainingExample& ex, double t, const TrainConfig& cfg, int num_classes,
                   Rng& rng) {
  const int D = static_cast<int>(ex.x.rows());
  if (ex.atoms.maxCoeff() >= num_classes) throw InputError("atom type exceeds the class count");
  FlowDraw f;
  f.t = t;
  f.eps_x.resize(D, 3);
  for (int d = 0; d < D; ++d)
    for (int c = 0; c < 3; ++c) f.eps_x(d, c) = standard_normal(rng);
  f.eps_k = standard_normal_vector(6, rng);

  const double gx = bfn::cts_beta(t, cfg.sigma_x).gamma;
  const double gk = bfn::cts_beta(t, cfg.sigma_k).gamma;
  NetInput& in = f.input;
  in.mu_x = gx * ex.x + std::sqrt(gx * (1.0 - gx)) * f.eps_x;
  in.mu_k = gk * ex.k + std::sqrt(gk * (1.0 - gk)) * f.eps_k;
  in.theta_a.resize(D, num_classes);
  in.theta_s.resize(D, kSiteOutputs);
  for (int d = 0; d < D; ++d) {
    in.theta_a.row(d) = bfn::disc_flow_sample(ex.atoms[d], t, cfg.beta_a, num_classes, rng).transpose();
    for (int a = 0; a < kNumAxes; ++a) {
      in.theta_s.block(d, a * kNumSiteLabels, 1, kNumSiteLabels) =
          bfn::disc_flow_sample(ex.sites(d, a), t, cfg.beta_s, kNumSiteLabels, rng).transpose();
    }
  }
  in.t = t;
  in.sg = ex.sg;
  in.property = ex.property;
  return f;
}

FlowDraw draw_flow(const TrainingExample& ex, const TrainConfig& cfg, int num_classes, Rng& rng) {
  const double t = uniform(rng, bfn::kMinTime, 1.0);
  return draw_flow(ex, t, cfg, num_classes, rng);
}

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
  total += o.total;
  x += o.x;
  k += o.k;
  a += o.a;
  s += o.s;
  return *this;
}

LossBreakdown LossBreakdown::scaled(double f) const {
  return {total * f, x * f, k * f, a * f, s * f};
}

LossBreakdown output_loss(const TrainingExample& ex, const FlowDraw& draw, const NetOutput& out,
                          const TrainConfig& cfg, NetOutput* d_out) {
  const LatticeHead net_head = lattice_head_from_string(cfg.lattice_head);
  const double t = draw.t;
  const int D = static_cast<int>(ex.x.rows());
  const int K = static_cast<int>(out.logits_a.cols());
  LossBreakdown L;

  // Coordinates.
  const double gx = bfn::cts_beta(t, cfg.sigma_x).gamma;
  const double cx = std::sqrt((1.0 - gx) / gx);
  const double wx = bfn::cts_loss_weight(t, cfg.sigma_x);
  Eigen::MatrixXd rx(D, 3);
  for (int d = 0; d < D; ++d) {
    const Vec3 xhat = (draw.input.mu_x.row(d) / gx - cx * out.eps_x.row(d)).transpose();
    rx.row(d) = min_image(ex.x.row(d).transpose() - xhat).transpose();
  }
  L.x = cfg.weights.x * wx * rx.squaredNorm();

  // Lattice: the estimate is masked, so fixed components carry no gradient.
  const double gk = bfn::cts_beta(t, cfg.sigma_k).gamma;
  const double ck = std::sqrt((1.0 - gk) / gk);
  const double wk = bfn::cts_loss_weight(t, cfg.sigma_k);
  KVector khat;
  const bool data_head = net_head == LatticeHead::data;
  for (int i = 0; i < 6; ++i)
    khat[i] = data_head ? out.eps_k[i] : draw.input.mu_k[i] / gk - ck * out.eps_k[i];
  khat = lattice::mask_k(khat, ex.sg);
  const auto free = lattice::free_components(ex.sg);
  Eigen::VectorXd rk(6);
  for (int i = 0; i < 6; ++i) rk[i] = ex.k[i] - khat[i];
  L.k = cfg.weights.k * wk * rk.squaredNorm();

  // Atom types.
  const Eigen::MatrixXd pa = bfn::softmax_rows(out.logits_a);
  const Eigen::MatrixXd ea = bfn::onehot_rows(ex.atoms, K);
  L.a = cfg.weights.a * bfn::disc_loss(ea, pa, t, cfg.beta_a, K);

  // Site symmetries, one 13-way variable per axis.
  Eigen::MatrixXd ps(D * kNumAxes, kNumSiteLabels), zs(D * kNumAxes, kNumSiteLabels);
  Eigen::VectorXi sites(D * kNumAxes);
  for (int d = 0; d < D; ++d) {
    for (int a = 0; a < kNumAxes; ++a) {
      zs.row(d * kNumAxes + a) = out.logits_s.block(d, a * kNumSiteLabels, 1, kNumSiteLabels);
      sites[d * kNumAxes + a] = ex.sites(d, a);
    }
  }
  ps = bfn::softmax_rows(zs);
  const Eigen::MatrixXd es = bfn::onehot_rows(sites, kNumSiteLabels);
  L.s = cfg.weights.s * bfn::disc_loss(es, ps, t, cfg.beta_s, kNumSiteLabels);
  L.total = L.x + L.k + L.a + L.s;

  if (d_out) {
    d_out->eps_x = (2.0 * cfg.weights.x * wx * cx) * rx;
    d_out->eps_k = Eigen::VectorXd::Zero(6);
    for (int i = 0; i < 6; ++i)
      if (free[i]) d_out->eps_k[i] = 2.0 * cfg.weights.k * wk * (data_head ? -1.0 : ck) * rk[i];
    d_out->logits_a = simplex_loss_grad(ea, pa, cfg.weights.a * K * cfg.beta_a * t);
    const Eigen::MatrixXd dzs = simplex_loss_grad(es, ps, cfg.weights.s * kNumSiteLabels * cfg.beta_s * t);
    d_out->logits_s.resize(D, kSiteOutputs);
    for (int d = 0; d < D; ++d)
      for (int a = 0; a < kNumAxes; ++a)
        d_out->logits_s.block(d, a * kNumSiteLabels, 1, kNumSiteLabels) = dzs.row(d * kNumAxes + a);
  }
  return L;
}

LossBreakdown loss_and_gradient(const Network& net, std::span<const TrainingExample> examples,
                                std::span<const FlowDraw> draws, const TrainConfig& cfg,
                                std::span<double> grad, int threads) {
  if (examples.size() != draws.size()) throw InputError("loss: examples and draws differ in length");
  const bool want_grad = !grad.empty();
  const std::size_t n = examples.size();

  // Every example's gradient goes to a zeroed buffer first and is merged in
  // example order, so the summation order is the same for any thread count.
  auto run_one = [&](std::size_t i, std::span<double> g) {
    Network::Tape tape;
    const NetOutput out = net.forward(draws[i].input, tape);
    NetOutput d_out;
    const LossBreakdown L = output_loss(examples[i], draws[i], out, cfg, want_grad ? &d_out : nullptr);
    check_term(L.x, "x", i);
    check_term(L.k, "k", i);
    check_term(L.a, "a", i);
    check_term(L.s, "s", i);
    if (want_grad) {
      std::fill(g.begin(), g.end(), 0.0);
      net.backward(tape, d_out, g);
    }
    return L;
  };

  const std::size_t workers = std::min<std::size_t>(std::max(threads, 1), std::max<std::size_t>(n, 1));
  std::vector<std::vector<double>> buffers(workers, std::vector<double>(want_grad ? grad.size() : 0));
  std::vector<LossBreakdown> losses(workers);
  std::vector<std::exception_ptr> errors(workers);
  LossBreakdown sum;
  for (std::size_t lo = 0; lo < n; lo += workers) {
    const std::size_t m = std::min(workers, n - lo);
    if (m == 1) {
      losses[0] = run_one(lo, buffers[0]);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < m; ++w) {
        pool.emplace_back([&, w] {
          try {
            losses[w] = run_one(lo + w, buffers[w]);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
      for (auto& th : pool) th.join();
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    }
    for (std::size_t w = 0; w < m; ++w) {
      sum += losses[w];
      if (want_grad)
        for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += buffers[w][j];
    }
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Optimisation

void Adam::step(std::span<double> params, std::span<const double> grad, double lr) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ++step_;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * grad[i];
    v_[i] = b2 * v_[i] + (1.0 - b2) * grad[i] * grad[i];
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps);
  }
}

double PlateauScheduler::step(double loss) {
  if (loss < best_ * (1.0 - 1e-4)) {
    best_ = loss;
    bad_epochs_ = 0;
  } else {
    ++bad_epochs_;
  }
  if (bad_epochs_ > patience_) {
    const double next = std::max(lr_ * factor_, min_lr_);
    if (lr_ - next > 1e-8) lr_ = next;
    bad_epochs_ = 0;
  }
  return lr_;
}

TrainResult train(const TrainConfig& cfg, const DatasetManifest& manifest,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  if (manifest.entries.empty()) throw InputError("train: empty manifest");
  if (manifest.num_classes < 1) throw InputError("train: manifest has no atom classes");

  TrainResult result;
  Checkpoint& ck = result.checkpoint;
  ck.train = cfg;
  ck.histogram = manifest.histogram;
  if (cfg.condition) {
    std::vector<double> values;
    for (const auto& e : manifest.entries) {
      if (!e.property) throw InputError("train: condition = true but entry " + e.name + " has no property");
      values.push_back(*e.property);
    }
    PropertyScaler s;
    s.name = manifest.property_name.empty() ? "property" : manifest.property_name;
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
    double var = 0.0;
    for (double v : values) var += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(var / values.size());
    if (!(s.std > 0.0)) s.std = 1.0;
    ck.property = s;
  }

  ck.net.hidden_dim = cfg.hidden_dim;
  ck.net.embed_dim = cfg.embed_dim;
  ck.net.num_layers = cfg.num_layers;
  ck.net.fourier_order = cfg.fourier_order;
  ck.net.num_classes = manifest.num_classes;
  ck.net.conditioned = cfg.condition;
  ck.net.lattice_head = lattice_head_from_string(cfg.lattice_head);

  std::vector<TrainingExample> examples;
  for (const auto& e : manifest.entries) examples.push_back(make_example(e, ck.property));

  Network net(ck.net, derive_seed(cfg.seed, 0));
  Adam adam(net.params().size());
  PlateauScheduler scheduler(cfg.learning_rate, cfg.plateau_factor, cfg.plateau_patience,
                             cfg.min_learning_rate);
  std::vector<double> grad(net.params().size());
  const std::size_t n = examples.size();
  std::vector<std::size_t> order(n);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng order_rng(derive_seed(cfg.seed, 2 * static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), order_rng);
    const std::uint64_t draw_seed = derive_seed(cfg.seed, 2 * static_cast<std::uint64_t>(epoch) + 1);

    const double lr = scheduler.lr();
    LossBreakdown epoch_sum;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      std::vector<TrainingExample> batch;
      std::vector<FlowDraw> draws;
      for (std::size_t pos = start; pos < end; ++pos) {
        Rng rng(derive_seed(draw_seed, pos));
        batch.push_back(examples[order[pos]]);
        draws.push_back(draw_flow(batch.back(), cfg, ck.net.num_classes, rng));
      }
      std::fill(grad.begin(), grad.end(), 0.0);
      const LossBreakdown sum = loss_and_gradient(net, batch, draws, cfg, grad, cfg.threads);
      const double inv = 1.0 / static_cast<double>(batch.size());
      if (sum.total * inv > kDivergence) {
        throw NumericalError("training diverged in epoch " + std::to_string(epoch) +
                             ": batch loss " + std::to_string(sum.total * inv) + " (x " +
                             std::to_string(sum.x * inv) + ", k " + std::to_string(sum.k * inv) +
                             ", a " + std::to_string(sum.a * inv) + ", s " +
                             std::to_string(sum.s * inv) + ")");
      }
      for (double& g : grad) g *= inv;
      adam.step(net.params(), grad, lr);
      epoch_sum += sum;
    }
    EpochRecord rec{epoch, epoch_sum.scaled(1.0 / static_cast<double>(n)), lr};
    result.curve.push_back(rec);
    scheduler.step(rec.loss.total);
    if (on_epoch) on_epoch(rec);
  }
  ck.params = net.params();
  return result;
}

}  // namespace symflow
