#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "symflow/crystal.hpp"
#include "symflow/random.hpp"
#include "symflow/symmetry.hpp"
#include "symflow/trainer.hpp"

namespace symflow {

struct SampleConfig {
  int n_steps = 100;
  int count = 1;
  std::optional<int> sg;
  std::optional<double> target;  // raw property value
  std::uint64_t seed = 0;
  int threads = 1;
  double tol = kDefaultTolerance;

  void validate() const;
};

/// Space group from the histogram marginal (unless fixed), then the
/// asymmetric-unit size conditional on it. A fixed group absent from the
/// histogram falls back to the size marginal.
std::pair<int, int> sample_sg_and_count(const SgCountHistogram& histogram, std::optional<int> sg,
                                        Rng& rng);

/// Per-step bookkeeping, for tests and diagnostics.
struct SampleTrace {
  std::vector<double> times;  // t_i of each network call, final call included
  double alpha_x = 0.0, alpha_k = 0.0, alpha_a = 0.0, alpha_s = 0.0;  // sums of accuracies
  int network_calls = 0;
};

struct SampleResult {
  int index = 0;
  int sg = 1;
  int num_sites = 0;  // asymmetric-unit size D
  int n_steps = 0;
  AsymmetricUnit unit;
  std::optional<Crystal> crystal;  // empty when reconstruction failed
  std::string error;
  double seconds = 0.0;
};

/// Generates sample `index`; its random stream depends only on (seed, index).
/// Throws InputError when the target does not fit the checkpoint
/// (target on an unconditioned model or none on a conditioned one).
SampleResult generate_one(const Network& net, const Checkpoint& checkpoint,
                          const SampleConfig& config, int index, SampleTrace* trace = nullptr);

/// config.count samples, in index order regardless of config.threads.
std::vector<SampleResult> generate(const Checkpoint& checkpoint, const SampleConfig& config);

}  // namespace symflow
