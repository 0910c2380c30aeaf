// symflow: ingest, train, sample, eval and roundtrip commands.
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "symflow/cif.hpp"
#include "symflow/error.hpp"
#include "symflow/metrics.hpp"
#include "symflow/records.hpp"
#include "symflow/sampler.hpp"
#include "symflow/symmetry.hpp"
#include "symflow/trainer.hpp"

namespace fs = std::filesystem;
using namespace symflow;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct Context {
  std::vector<std::string> argv;
  std::string started;
};

std::string meta_path_for(const fs::path& file) { return file.string() + ".meta.json"; }

void write_metadata(const fs::path& where, const Context& ctx, const std::string& command,
                    std::map<std::string, std::string> config, std::uint64_t seed) {
  records::RunMetadata meta;
  meta.command = command;
  meta.arguments = ctx.argv;
  meta.config = std::move(config);
  meta.seed = seed;
  meta.started = ctx.started;
  meta.finished = records::timestamp();
  records::write_text(where, records::metadata_json(meta));
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<fs::path> cif_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InputError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".cif") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

// ingest ---------------------------------------------------------------------

struct IngestArgs {
  bool prototypes = false;
  std::string input;
  std::string output;
  std::string property;
  int jitter = 0;
  double jitter_spread = 0.1;
  double tol = 1e-3;
  std::uint64_t seed = 0;
};

int run_ingest(const IngestArgs& a, const Context& ctx) {
  IngestOptions opt;
  opt.tol = a.tol;
  opt.property = a.property;
  DatasetManifest m;
  if (a.prototypes) {
    m = ingest_prototypes(opt);
  } else {
    std::vector<IngestSource> sources;
    for (const auto& f : cif_files(a.input)) sources.push_back({f.filename().string(), records::read_text(f), {}, {}});
    if (sources.empty()) throw InputError("no .cif files in " + a.input);
    m = ingest(sources, opt);
  }
  for (const auto& s : m.skipped) std::cerr << "skipped " << s << "\n";
  if (a.jitter > 0) m = jitter_manifest(m, a.jitter, a.jitter_spread, a.seed);
  records::save_manifest(a.output, m);
  write_metadata(meta_path_for(a.output), ctx, "ingest",
                 {{"source", a.prototypes ? "prototypes" : a.input},
                  {"property", a.property},
                  {"jitter", std::to_string(a.jitter)},
                  {"jitter_spread", fmt(a.jitter_spread)},
                  {"tol", fmt(a.tol)}},
                 a.seed);
  std::cout << "entries: " << m.entries.size() << "\nnum_classes: " << m.num_classes << "\n";
  return 0;
}

// train ----------------------------------------------------------------------

struct TrainArgs {
  std::string manifest;
  std::string config;
  std::string output;
  std::map<std::string, std::string> overrides;  // filled from flags
  bool quiet = false;
};

int run_train(const TrainArgs& a, const Context& ctx) {
  TrainConfig cfg = a.config.empty() ? TrainConfig{} : records::load_train_config(a.config);
  if (auto p = a.overrides.find("profile"); p != a.overrides.end()) records::set_train_config_value(cfg, "profile", p->second);
  for (const auto& [k, v] : a.overrides)
    if (k != "profile") records::set_train_config_value(cfg, k, v);
  cfg.validate();
  const DatasetManifest m = records::load_manifest(a.manifest);
  fs::create_directories(a.output);
  const fs::path out(a.output);

  const TrainResult result = train(cfg, m, [&](const EpochRecord& r) {
    if (!a.quiet && (r.epoch == 1 || r.epoch % 50 == 0 || r.epoch == cfg.epochs)) {
      std::cerr << "epoch " << r.epoch << " loss " << r.loss.total << " lr " << r.lr << "\n";
    }
  });
  records::save_checkpoint(out / "checkpoint.bin", result.checkpoint);
  records::write_text(out / "loss.csv", records::format_loss_csv(result.curve));
  records::write_text(out / "config.txt", records::format_train_config(cfg));
  std::map<std::string, std::string> snapshot;
  for (const auto& k : records::train_config_keys()) snapshot[k] = records::get_train_config_value(cfg, k);
  snapshot["manifest"] = a.manifest;
  write_metadata(out / "run_metadata.json", ctx, "train", snapshot, cfg.seed);
  std::cout << "epochs: " << result.curve.size() << "\nfinal_loss: " << result.curve.back().loss.total << "\n";
  return 0;
}

// sample ---------------------------------------------------------------------

struct SampleArgs {
  std::string checkpoint;
  std::string output;
  SampleConfig cfg;
  std::optional<int> sg;
  std::optional<double> target;
};

int run_sample(SampleArgs a, const Context& ctx) {
  a.cfg.sg = a.sg;
  a.cfg.target = a.target;
  a.cfg.validate();
  const Checkpoint ck = records::load_checkpoint(a.checkpoint);
  fs::create_directories(a.output);
  const fs::path out(a.output);
  const auto results = generate(ck, a.cfg);

  std::string diag;
  int ok = 0;
  for (const auto& r : results) {
    std::string file;
    if (r.crystal) {
      char name[32];
      std::snprintf(name, sizeof name, "sample_%05d.cif", r.index);
      file = name;
      records::write_text(out / file, cif::write_cif(*r.crystal, r.sg, fs::path(file).stem().string()));
      ++ok;
    }
    diag += records::diagnostics_line(r, file) + "\n";
  }
  records::write_text(out / "diagnostics.jsonl", diag);
  std::map<std::string, std::string> snapshot = {{"checkpoint", a.checkpoint},
                                                 {"steps", std::to_string(a.cfg.n_steps)},
                                                 {"count", std::to_string(a.cfg.count)},
                                                 {"threads", std::to_string(a.cfg.threads)},
                                                 {"tol", fmt(a.cfg.tol)}};
  if (a.sg) snapshot["sg"] = std::to_string(*a.sg);
  if (a.target) snapshot["target"] = fmt(*a.target);
  write_metadata(out / "run_metadata.json", ctx, "sample", snapshot, a.cfg.seed);
  std::cout << "samples: " << results.size() << "\nreconstructed: " << ok << "\n";
  return 0;
}

// eval -----------------------------------------------------------------------

struct EvalArgs {
  std::string generated;
  std::string reference;
  std::string report;
  double tol = 1e-3;
  std::uint64_t seed = 0;
};

std::vector<metrics::LabeledCrystal> read_cif_dir(const std::string& dir) {
  std::vector<metrics::LabeledCrystal> out;
  for (const auto& f : cif_files(dir)) {
    const cif::Structure s = cif::read_cif(f);
    out.push_back({f.filename().string(), s.crystal, s.sg.value_or(1)});
  }
  if (out.empty()) throw Error("no structures in " + dir);
  return out;
}

int run_eval(const EvalArgs& a, const Context& ctx) {
  const auto gen = read_cif_dir(a.generated);
  // The reference is either a manifest or another directory of CIFs.
  std::vector<metrics::LabeledCrystal> ref;
  if (fs::is_directory(a.reference)) {
    ref = read_cif_dir(a.reference);
  } else {
    const DatasetManifest m = records::load_manifest(a.reference);
    for (const auto& e : m.entries) ref.push_back({e.name, reconstruct_unit_cell(e.unit, a.tol), e.unit.sg});
  }
  const auto report = metrics::evaluate(gen, ref);
  const fs::path path(a.report);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  records::write_text(path, records::report_json(report));
  records::write_text(path.string() + ".structures.jsonl", records::structure_flags_jsonl(report));
  write_metadata(meta_path_for(path), ctx, "eval",
                 {{"generated", a.generated}, {"reference", a.reference}, {"tol", fmt(a.tol)}}, a.seed);
  std::cout << records::report_json(report);
  return 0;
}

// roundtrip ------------------------------------------------------------------

struct RoundtripArgs {
  std::string cif;
  std::optional<int> sg;
  std::string output;
  double tol = 1e-3;
  std::uint64_t seed = 0;
};

int run_roundtrip(const RoundtripArgs& a, const Context& ctx) {
  const cif::Structure s = cif::read_cif(a.cif);
  const std::optional<int> sg = a.sg ? a.sg : s.sg;
  if (!sg) throw InputError(a.cif + ": no space group given and none recorded in the file");
  const AsymmetricUnit au = extract_asymmetric_unit(s.crystal, *sg, a.tol);
  const Crystal rebuilt = reconstruct_unit_cell(au, a.tol);
  const double d = metrics::structure_distance(s.crystal, rebuilt);
  const bool match = d <= metrics::MatcherSettings{}.rel_tol;
  std::cout << "sg: " << *sg << "\nasymmetric_unit: " << au.sites.size() << "\ncell_atoms: " << rebuilt.size()
            << "\ndistance: " << d << "\nmatch: " << (match ? "true" : "false") << "\n";
  if (!a.output.empty()) {
    records::write_text(a.output, cif::write_cif(rebuilt, *sg, s.name));
    write_metadata(meta_path_for(a.output), ctx, "roundtrip",
                   {{"cif", a.cif}, {"sg", std::to_string(*sg)}, {"tol", fmt(a.tol)}}, a.seed);
  }
  return match ? 0 : kExitRuntime;
}

std::string hyphenated(std::string s) {
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  Context ctx{{argv, argv + argc}, records::timestamp()};
  CLI::App app{"Symmetry-aware Bayesian flow crystal generator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(SYMFLOW_VERSION));

  IngestArgs ia;
  auto* ingest_cmd = app.add_subcommand("ingest", "Build a training manifest from CIF files");
  auto* src = ingest_cmd->add_option_group("source");
  src->add_flag("--prototypes", ia.prototypes, "Use the bundled prototype corpus");
  src->add_option("--input", ia.input, "Directory of .cif files")->check(CLI::ExistingDirectory);
  src->require_option(1);
  ingest_cmd->add_option("--output,-o", ia.output, "Manifest path (.jsonl)")->required();
  ingest_cmd->add_option("--property", ia.property, "Per-entry property to record")->check(CLI::IsMember({"density"}));
  ingest_cmd->add_option("--jitter", ia.jitter, "Number of volume-jittered copies per entry")->check(CLI::NonNegativeNumber);
  ingest_cmd->add_option("--jitter-spread,--jitter_spread", ia.jitter_spread, "Half-width of the uniform cell scale factor");
  ingest_cmd->add_option("--tol", ia.tol, "Fractional coordinate tolerance");
  ingest_cmd->add_option("--seed", ia.seed);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a manifest");
  train_cmd->add_option("--manifest,-m", ta.manifest)->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--config,-c", ta.config, "key = value file")->check(CLI::ExistingFile);
  train_cmd->add_option("--output,-o", ta.output, "Output directory")->required();
  train_cmd->add_flag("--quiet,-q", ta.quiet);
  std::map<std::string, std::string> flag_values;
  for (const auto& key : records::train_config_keys()) {
    std::string names = "--" + key;
    if (hyphenated(key) != key) names += ",--" + hyphenated(key);
    train_cmd->add_option(names, flag_values[key], "Overrides config key " + key);
  }

  SampleArgs sa;
  auto* sample_cmd = app.add_subcommand("sample", "Generate crystals from a checkpoint");
  sample_cmd->add_option("--checkpoint", sa.checkpoint)->required()->check(CLI::ExistingFile);
  sample_cmd->add_option("--output,-o", sa.output, "Output directory")->required();
  sample_cmd->add_option("--steps", sa.cfg.n_steps, "Number of sampling steps")->capture_default_str();
  sample_cmd->add_option("--count", sa.cfg.count)->capture_default_str();
  sample_cmd->add_option("--sg", sa.sg, "Fix the space group");
  sample_cmd->add_option("--target", sa.target, "Property target for a conditioned checkpoint");
  sample_cmd->add_option("--seed", sa.cfg.seed);
  sample_cmd->add_option("--threads", sa.cfg.threads)->capture_default_str();
  sample_cmd->add_option("--tol", sa.cfg.tol);

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Compute metrics for generated CIFs");
  eval_cmd->add_option("--generated,-g", ea.generated)->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--reference,-r", ea.reference, "Reference manifest or CIF directory")
      ->required()
      ->check(CLI::ExistingPath);
  eval_cmd->add_option("--report", ea.report, "Report path (.json)")->required();
  eval_cmd->add_option("--tol", ea.tol);
  eval_cmd->add_option("--seed", ea.seed);

  RoundtripArgs ra;
  auto* rt_cmd = app.add_subcommand("roundtrip", "Extract and rebuild a CIF under its space group");
  rt_cmd->add_option("--cif", ra.cif)->required()->check(CLI::ExistingFile);
  rt_cmd->add_option("--sg", ra.sg)->check(CLI::Range(1, kNumSpaceGroups));
  rt_cmd->add_option("--output,-o", ra.output, "Write the rebuilt cell as CIF");
  rt_cmd->add_option("--tol", ra.tol);
  rt_cmd->add_option("--seed", ra.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (ingest_cmd->parsed()) return run_ingest(ia, ctx);
    if (train_cmd->parsed()) {
      for (const auto& [key, value] : flag_values)
        if (train_cmd->count("--" + key) > 0) ta.overrides[key] = value;
      return run_train(ta, ctx);
    }
    if (sample_cmd->parsed()) return run_sample(sa, ctx);
    if (eval_cmd->parsed()) return run_eval(ea, ctx);
    if (rt_cmd->parsed()) return run_roundtrip(ra, ctx);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
