#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "symflow/bfn_continuous.hpp"
#include "symflow/bfn_discrete.hpp"
#include "symflow/crystal.hpp"
#include "symflow/network.hpp"

namespace symflow {

/// (space group, asymmetric-unit size) -> number of entries.
using SgCountHistogram = std::map<std::pair<int, int>, int>;

struct ManifestEntry {
  std::string name;
  AsymmetricUnit unit;
  std::optional<double> property;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  int num_classes = 0;        // K: largest atomic number present
  std::string property_name;  // empty when entries carry no property
  SgCountHistogram histogram;
  std::vector<std::string> skipped;  // "name: reason"

  /// Recomputes K and the histogram from the entries.
  void refresh();
};

struct IngestSource {
  std::string name;
  std::string cif_text;
  std::optional<int> sg;  // overrides the label inside the CIF
  std::optional<double> property;
};

struct IngestOptions {
  double tol = 1e-3;
  /// "density" computes the property from each structure; empty keeps the
  /// per-source values (if any).
  std::string property;
};

/// Extracts asymmetric units; structures inconsistent with their label are
/// skipped and listed. Throws InputError when nothing usable remains.
DatasetManifest ingest(std::span<const IngestSource> sources, const IngestOptions& options = {});

/// Bundled prototypes; by default only those marked for training.
DatasetManifest ingest_prototypes(const IngestOptions& options = {}, bool training_only = true);

/// `copies` isotropically rescaled variants of every entry with scale
/// factors uniform in [1 - spread, 1 + spread]; density is recorded as the
/// property of every copy.
DatasetManifest jitter_manifest(const DatasetManifest& manifest, int copies, double spread,
                                std::uint64_t seed);

struct LossWeights {
  double x = 1.0;
  double s = 10.0;
  double a = 3.0;
  double k = 0.1;
};

struct TrainConfig {
  int batch_size = 8;
  int epochs = 500;
  double learning_rate = 1e-3;
  double plateau_factor = 0.6;
  int plateau_patience = 100;
  double min_learning_rate = 1e-4;
  LossWeights weights;
  double sigma_x = bfn::kDefaultSigma;
  double sigma_k = bfn::kDefaultSigma;
  double beta_a = bfn::kAtomBeta1;
  double beta_s = bfn::kSiteBeta1;
  std::uint64_t seed = 0;
  int threads = 1;
  bool condition = false;  // train with the manifest property as target
  std::string profile = "desk";
  int hidden_dim = 64;
  int embed_dim = 32;
  int num_layers = 3;
  int fourier_order = 8;
  std::string lattice_head = "data";  // see LatticeHead

  /// Selects "desk" or "full" network sizes and, for "full", batch 256
  /// and 2000 epochs.
  void apply_profile(const std::string& name);
  void validate() const;
};

struct PropertyScaler {
  std::string name;
  double mean = 0.0;
  double std = 1.0;
  double standardize(double v) const { return (v - mean) / std; }
};

struct Checkpoint {
  NetConfig net;
  TrainConfig train;
  std::vector<double> params;
  SgCountHistogram histogram;
  std::optional<PropertyScaler> property;  // present iff net.conditioned
};

/// One manifest entry in network-ready form.
struct TrainingExample {
  int sg = 1;
  Eigen::VectorXd k;          // 6, masked
  Eigen::MatrixXd x;          // D x 3
  Eigen::VectorXi atoms;      // D, class index Z - 1
  Eigen::MatrixXi sites;      // D x 15, label - 1
  std::optional<double> property;  // standardized
};

TrainingExample make_example(const ManifestEntry& entry, const std::optional<PropertyScaler>& scaler);

/// Noisy network inputs at time t plus the noise used to make them.
struct FlowDraw {
  double t = 0.0;
  Eigen::VectorXd eps_k;
  Eigen::MatrixXd eps_x;
  NetInput input;
};

FlowDraw draw_flow(const TrainingExample& ex, double t, const TrainConfig& cfg, int num_classes,
                   Rng& rng);
/// t ~ U(t_min, 1) followed by draw_flow.
FlowDraw draw_flow(const TrainingExample& ex, const TrainConfig& cfg, int num_classes, Rng& rng);

/// Weighted loss terms; total = x + k + a + s.
struct LossBreakdown {
  double total = 0.0, x = 0.0, k = 0.0, a = 0.0, s = 0.0;
  LossBreakdown& operator+=(const LossBreakdown& o);
  LossBreakdown scaled(double f) const;
};

/// Loss of one example given network outputs. The coordinate residual is
/// taken to its nearest periodic image and the k estimate is masked before
/// comparison. The lattice output is read according to cfg.lattice_head. With `d_out`, fills d loss / d outputs.
LossBreakdown output_loss(const TrainingExample& ex, const FlowDraw& draw, const NetOutput& out,
                          const TrainConfig& cfg, NetOutput* d_out = nullptr);

/// Sum over examples of their losses; gradients (if `grad` is non-empty)
/// are added to `grad` in example order, so results do not depend on
/// `threads`. Throws NumericalError naming the term for a non-finite loss.
LossBreakdown loss_and_gradient(const Network& net, std::span<const TrainingExample> examples,
                                std::span<const FlowDraw> draws, const TrainConfig& cfg,
                                std::span<double> grad, int threads = 1);

/// Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8).
class Adam {
 public:
  explicit Adam(std::size_t size) : m_(size, 0.0), v_(size, 0.0) {}
  void step(std::span<double> params, std::span<const double> grad, double lr);

 private:
  std::vector<double> m_, v_;
  long step_ = 0;
};

/// Reduce-on-plateau in "min" mode with relative threshold 1e-4 and no cooldown.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, double factor, int patience, double min_lr)
      : lr_(lr), factor_(factor), patience_(patience), min_lr_(min_lr) {}
  /// Returns the learning rate for the next epoch.
  double step(double loss);
  double lr() const { return lr_; }

 private:
  double lr_, factor_;
  int patience_;
  double min_lr_;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_epochs_ = 0;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  LossBreakdown loss;  // mean over the epoch's examples
  double lr = 0.0;     // rate used during the epoch
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochRecord> curve;
};

/// Throws InputError for an empty manifest or a conditioned run without
/// property values, NumericalError on divergence (loss > 1e6).
TrainResult train(const TrainConfig& cfg, const DatasetManifest& manifest,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

}  // namespace symflow
