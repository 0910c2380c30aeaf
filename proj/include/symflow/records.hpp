#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "symflow/metrics.hpp"
#include "symflow/sampler.hpp"
#include "symflow/trainer.hpp"

/// File formats: manifests and diagnostics as JSON Lines, training configs
/// as `key = value` text, loss curves as CSV, checkpoints as a binary
/// container with a JSON header. Every record carries format_version.
namespace symflow::records {

inline constexpr int kFormatVersion = 1;

/// UTC time, ISO 8601.
std::string timestamp();

// Manifest -------------------------------------------------------------------

/// A header line followed by one line per entry. `created` is the only
/// field that differs between runs on the same inputs.
void write_manifest(std::ostream& out, const DatasetManifest& manifest, std::string_view created);
DatasetManifest read_manifest(std::istream& in, std::string_view source = "<manifest>");
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::filesystem::path& path);

// Training config -----------------------------------------------------------

/// Keys accepted in config files, in file order.
const std::vector<std::string>& train_config_keys();
/// Throws InputError naming the key when it is unknown or the value is malformed.
void set_train_config_value(TrainConfig& cfg, const std::string& key, const std::string& value);
std::string get_train_config_value(const TrainConfig& cfg, const std::string& key);
/// `key = value` lines; '#' starts a comment. A `profile` line is applied
/// before every other key regardless of position.
TrainConfig parse_train_config(std::string_view text, std::string_view source = "<config>",
                               TrainConfig base = {});
TrainConfig load_train_config(const std::filesystem::path& path);
std::string format_train_config(const TrainConfig& cfg);

// Loss curve ------------------------------------------------------------------

/// Header `epoch,total,x,k,a,s,lr`; values printed with 17 significant digits.
std::string format_loss_csv(const std::vector<EpochRecord>& curve);

// Checkpoint ------------------------------------------------------------------

/// "SYMFLOWC", uint32 version, uint64 header length, JSON header, uint64
/// parameter count, little-endian float64 parameters.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Sampling diagnostics ------------------------------------------------------

/// One JSON line; `file` is empty for failed samples.
std::string diagnostics_line(const SampleResult& r, std::string_view file);

// Evaluation ------------------------------------------------------------------

std::string report_json(const metrics::MetricsReport& report);
/// One JSON line per structure with its validity flags.
std::string structure_flags_jsonl(const metrics::MetricsReport& report);

// Run metadata ----------------------------------------------------------------

struct RunMetadata {
  std::string command;
  std::vector<std::string> arguments;
  std::map<std::string, std::string> config;
  std::uint64_t seed = 0;
  std::string started;
  std::string finished;
};

std::string metadata_json(const RunMetadata& meta);
void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

}  // namespace symflow::records
