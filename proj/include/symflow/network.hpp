#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "symflow/crystal.hpp"

/// Message-passing network on the fully connected graph of asymmetric-unit
/// sites. Every MLP is Linear-SiLU-Linear-SiLU-Linear. All parameters live in
/// one flat array so that optimisers, checkpoints and finite-difference
/// checks can treat them uniformly.
namespace symflow {

inline constexpr int kSiteOutputs = kNumAxes * kNumSiteLabels;  // 195

/// What the lattice head predicts. `noise`: the Gaussian noise behind mu_k,
/// as for the coordinates. `data`: the lattice vector itself; the noise
/// estimate is then (mu_k - gamma k_hat) / sqrt(gamma (1 - gamma)), which
/// leaves the loss unchanged but is far easier to fit on small corpora.
enum class LatticeHead { noise, data };

struct NetConfig {
  int hidden_dim = 64;
  int embed_dim = 32;  // must be even (sinusoidal encodings)
  int num_layers = 3;
  int fourier_order = 8;
  int num_classes = 1;  // K, atom types 1..K
  bool conditioned = false;
  LatticeHead lattice_head = LatticeHead::data;

  static NetConfig desk(int num_classes);
  static NetConfig full(int num_classes);
  /// Throws InputError naming the offending field.
  void validate() const;
  bool operator==(const NetConfig&) const = default;
};

struct NetInput {
  Eigen::VectorXd mu_k;     // 6
  Eigen::MatrixXd mu_x;     // D x 3
  Eigen::MatrixXd theta_a;  // D x K
  Eigen::MatrixXd theta_s;  // D x 195, column axis * 13 + (label - 1)
  double t = 0.0;
  int sg = 1;
  std::optional<double> property;  // standardized target, conditioned nets only
};

struct NetOutput {
  Eigen::VectorXd eps_k;     // 6; the lattice estimate itself for LatticeHead::data
  Eigen::MatrixXd eps_x;     // D x 3
  Eigen::MatrixXd logits_a;  // D x K
  Eigen::MatrixXd logits_s;  // D x 195
};

/// (sin 2 pi n d_c, cos 2 pi n d_c) for c = 0..2, n = 1..F at index
/// (c F + n - 1) * 2 + {0, 1}; d is reduced by floor first.
Eigen::RowVectorXd fourier_features(const Eigen::Vector3d& delta, int order);

/// Transformer-style encoding: channel pair i holds sin, cos of v / 10000^(2i/dim).
Eigen::RowVectorXd sinusoidal_encoding(double v, int dim);

struct ParamBlock {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

class Network {
 public:
  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation from `seed`.
  Network(const NetConfig& config, std::uint64_t seed);
  /// Adopts existing parameters; throws InputError on a size mismatch.
  Network(const NetConfig& config, std::vector<double> params);

  const NetConfig& config() const { return config_; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  /// Activations kept by forward() for the backward pass.
  class Tape;

  /// Throws NumericalError when an activation becomes non-finite, naming
  /// the stage.
  NetOutput forward(const NetInput& in) const;
  NetOutput forward(const NetInput& in, Tape& tape) const;

  /// Adds d loss / d params into `grad` given d loss / d outputs.
  void backward(const Tape& tape, const NetOutput& d_out, std::span<double> grad) const;

 private:
  NetConfig config_;
  std::vector<ParamBlock> blocks_;
  std::vector<double> params_;
};

class Network::Tape {
 public:
  Tape();
  ~Tape();
  Tape(Tape&&) noexcept;
  Tape& operator=(Tape&&) noexcept;

 private:
  friend class Network;
  struct Data;
  std::unique_ptr<Data> data_;
};

const char* to_string(LatticeHead head);
/// Throws InputError for anything but "noise" or "data".
LatticeHead lattice_head_from_string(const std::string& name);

/// Layout of the parameter array for a configuration.
std::vector<ParamBlock> parameter_layout(const NetConfig& config);

}  // namespace symflow
