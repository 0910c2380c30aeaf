#include "symflow/sampler.hpp"

#include <atomic>
#include <chrono>
#include <thread>

#include "symflow/bfn_continuous.hpp"
#include "symflow/bfn_discrete.hpp"
#include "symflow/error.hpp"
#include "symflow/lattice.hpp"

namespace symflow {
namespace {

// alpha_i = beta(t_i) - (alpha_1 + ... + alpha_{i-1}), so that the running
// sum lands on beta(1) itself rather than on a rounded telescoping sum.
struct AccuracySum {
  double total = 0.0;
  double advance(double beta_next) {
    const double alpha = beta_next - total;
    total += alpha;
    return alpha;
  }
};

using Eigen::MatrixXd;
using Eigen::VectorXd;

int draw_weighted(const std::vector<std::pair<int, int>>& items, Rng& rng) {
  long total = 0;
  for (const auto& item : items) total += item.second;
  long r = std::uniform_int_distribution<long>(0, total - 1)(rng);
  for (const auto& [value, weight] : items) {
    if (r < weight) return value;
    r -= weight;
  }
  return items.back().first;
}

void check_target(const Checkpoint& ck, const SampleConfig& config) {
  if (config.target && !ck.net.conditioned) {
    throw InputError("a target property was given but the checkpoint is unconditioned");
  }
  if (!config.target && ck.net.conditioned) {
    throw InputError("the checkpoint is conditioned on '" +
                     (ck.property ? ck.property->name : std::string("property")) +
                     "'; a target value is required");
  }
}

/// Site-symmetry rows are kept as (D * 15) x 13 for the Bayesian updates;
/// the network sees them as D x 195.
MatrixXd sites_to_network(const MatrixXd& rows, int D) {
  MatrixXd out(D, kSiteOutputs);
  for (int d = 0; d < D; ++d)
    for (int a = 0; a < kNumAxes; ++a)
      out.block(d, a * kNumSiteLabels, 1, kNumSiteLabels) = rows.row(d * kNumAxes + a);
  return out;
}

MatrixXd sites_from_network(const MatrixXd& logits, int D) {
  MatrixXd out(D * kNumAxes, kNumSiteLabels);
  for (int d = 0; d < D; ++d)
    for (int a = 0; a < kNumAxes; ++a)
      out.row(d * kNumAxes + a) = logits.block(d, a * kNumSiteLabels, 1, kNumSiteLabels);
  return out;
}

VectorXd flatten(const MatrixXd& m) {
  VectorXd v(m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) v[r * m.cols() + c] = m(r, c);
  return v;
}

MatrixXd unflatten(const VectorXd& v, Eigen::Index cols) {
  MatrixXd m(v.size() / cols, cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = v[r * cols + c];
  return m;
}

}  // namespace

void SampleConfig::validate() const {
  if (n_steps < 1) throw InputError("sample: steps must be >= 1");
  if (count < 1) throw InputError("sample: count must be >= 1");
  if (threads < 1) throw InputError("sample: threads must be >= 1");
  if (sg && (*sg < 1 || *sg > kNumSpaceGroups)) throw InputError("sample: sg must be in 1..230");
  if (!(tol > 0)) throw InputError("sample: tolerance must be > 0");
}

std::pair<int, int> sample_sg_and_count(const SgCountHistogram& histogram, std::optional<int> sg,
                                        Rng& rng) {
  if (histogram.empty()) throw InputError("empty (space group, size) histogram");
  int group = 0;
  if (sg) {
    group = *sg;
  } else {
    std::vector<std::pair<int, int>> marginal;
    for (const auto& [key, n] : histogram) {
      if (marginal.empty() || marginal.back().first != key.first) marginal.emplace_back(key.first, 0);
      marginal.back().second += n;
    }
    group = draw_weighted(marginal, rng);
  }
  std::vector<std::pair<int, int>> sizes;
  for (const auto& [key, n] : histogram)
    if (key.first == group) sizes.emplace_back(key.second, n);
  if (sizes.empty()) {
    std::map<int, int> all;
    for (const auto& [key, n] : histogram) all[key.second] += n;
    sizes.assign(all.begin(), all.end());
  }
  return {group, draw_weighted(sizes, rng)};
}

SampleResult generate_one(const Network& net, const Checkpoint& ck, const SampleConfig& config,
                          int index, SampleTrace* trace) {
  config.validate();
  check_target(ck, config);
  const auto start = std::chrono::steady_clock::now();
  const TrainConfig& tc = ck.train;
  const int K = net.config().num_classes;
  const int n = config.n_steps;

  Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(index)));
  SampleResult res;
  res.index = index;
  res.n_steps = n;
  const auto [sg, D] = sample_sg_and_count(ck.histogram, config.sg, rng);
  res.sg = sg;
  res.num_sites = D;

  std::optional<double> z;
  if (config.target) z = ck.property->standardize(*config.target);

  bfn::ContinuousState sx = bfn::ContinuousState::prior(3 * D);
  bfn::ContinuousState sk = bfn::ContinuousState::prior(6);
  bfn::DiscreteState sa = bfn::DiscreteState::uniform(D, K);
  bfn::DiscreteState ss = bfn::DiscreteState::uniform(D * kNumAxes, kNumSiteLabels);
  if (trace) *trace = SampleTrace{};

  auto run_network = [&](double t) {
    NetInput in;
    in.mu_k = sk.mean;
    in.mu_x = unflatten(sx.mean, 3);
    in.theta_a = sa.probs;
    in.theta_s = sites_to_network(ss.probs, D);
    in.t = t;
    in.sg = sg;
    in.property = z;
    if (trace) {
      trace->times.push_back(t);
      ++trace->network_calls;
    }
    return net.forward(in);
  };
  auto x_estimate = [&](const NetOutput& out, double t) {
    return bfn::cts_estimate(sx, t, tc.sigma_x, flatten(out.eps_x), true);
  };
  auto k_estimate = [&](const NetOutput& out, double t) {
    const VectorXd raw = net.config().lattice_head == LatticeHead::data
                             ? out.eps_k
                             : bfn::cts_estimate(sk, t, tc.sigma_k, out.eps_k, false);
    KVector k;
    for (int i = 0; i < 6; ++i) k[i] = raw[i];
    return lattice::mask_k(k, sg);
  };

  AccuracySum cum_x, cum_k, cum_a, cum_s;
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / n;
    const double t_next = static_cast<double>(i + 1) / n;
    const NetOutput out = run_network(t);
    const VectorXd x_hat = x_estimate(out, t);
    const KVector k_hat = k_estimate(out, t);
    const MatrixXd pa = bfn::softmax_rows(out.logits_a);
    const MatrixXd ps = bfn::softmax_rows(sites_from_network(out.logits_s, D));

    const double ax = cum_x.advance(bfn::cts_beta(t_next, tc.sigma_x).beta);
    const double ak = cum_k.advance(bfn::cts_beta(t_next, tc.sigma_k).beta);
    const double aa = cum_a.advance(bfn::disc_beta(t_next, tc.beta_a));
    const double as = cum_s.advance(bfn::disc_beta(t_next, tc.beta_s));
    if (trace) {
      trace->alpha_x += ax;
      trace->alpha_k += ak;
      trace->alpha_a += aa;
      trace->alpha_s += as;
    }

    sx = bfn::cts_bayes_update(sx, bfn::cts_sender_sample(x_hat, ax, rng), ax);
    const VectorXd k_vec = Eigen::Map<const VectorXd>(k_hat.data(), 6);
    sk = bfn::cts_bayes_update(sk, bfn::cts_sender_sample(k_vec, ak, rng), ak);

    MatrixXd ya(D, K);
    for (int d = 0; d < D; ++d)
      ya.row(d) = bfn::disc_sender_sample(bfn::sample_class(pa.row(d), rng), aa, K, rng).transpose();
    sa = bfn::disc_bayes_update(sa, ya);
    MatrixXd ys(D * kNumAxes, kNumSiteLabels);
    for (int r = 0; r < D * kNumAxes; ++r)
      ys.row(r) = bfn::disc_sender_sample(bfn::sample_class(ps.row(r), rng), as, kNumSiteLabels, rng)
                      .transpose();
    ss = bfn::disc_bayes_update(ss, ys);
  }

  const NetOutput out = run_network(1.0);
  const MatrixXd x_final = unflatten(x_estimate(out, 1.0), 3);
  const MatrixXd pa = bfn::softmax_rows(out.logits_a);
  const MatrixXd ps = bfn::softmax_rows(sites_from_network(out.logits_s, D));
  res.unit.sg = sg;
  res.unit.k = k_estimate(out, 1.0);
  for (int d = 0; d < D; ++d) {
    AsymmetricSite site;
    site.number = bfn::sample_class(pa.row(d), rng) + 1;
    site.frac = wrap_unit(x_final.row(d).transpose());
    for (int a = 0; a < kNumAxes; ++a)
      site.site.labels[a] = static_cast<std::uint8_t>(bfn::sample_class(ps.row(d * kNumAxes + a), rng) + 1);
    res.unit.sites.push_back(site);
  }

  try {
    res.crystal = reconstruct_unit_cell(res.unit, config.tol);
  } catch (const Error& e) {
    res.error = e.what();
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

std::vector<SampleResult> generate(const Checkpoint& checkpoint, const SampleConfig& config) {
  config.validate();
  check_target(checkpoint, config);
  const Network net(checkpoint.net, checkpoint.params);
  std::vector<SampleResult> results(config.count);
  const int workers = std::min(config.threads, config.count);
  if (workers <= 1) {
    for (int i = 0; i < config.count; ++i) results[i] = generate_one(net, checkpoint, config, i);
    return results;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = next++; i < config.count; i = next++)
          results[i] = generate_one(net, checkpoint, config, i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

}  // namespace symflow
