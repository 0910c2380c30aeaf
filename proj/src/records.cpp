#include "symflow/records.hpp"

#include <bit>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "symflow/error.hpp"

namespace symflow::records {
namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'S', 'Y', 'M', 'F', 'L', 'O', 'W', 'C'};

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json histogram_json(const SgCountHistogram& h) {
  json out = json::array();
  for (const auto& [key, n] : h) out.push_back({{"sg", key.first}, {"num_sites", key.second}, {"count", n}});
  return out;
}

SgCountHistogram histogram_from(const json& j) {
  SgCountHistogram h;
  for (const auto& e : j) h[{e.at("sg").get<int>(), e.at("num_sites").get<int>()}] = e.at("count").get<int>();
  return h;
}

void check_version(const json& j, std::string_view source) {
  if (!j.contains("format_version") || j.at("format_version").get<int>() != kFormatVersion) {
    throw InputError(std::string(source) + ": unsupported or missing format_version");
  }
}

template <typename T>
std::string to_text(const T& v) {
  if constexpr (std::is_same_v<T, std::string>) {
    return v;
  } else if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_floating_point_v<T>) {
    return fmt17(v);
  } else {
    return std::to_string(v);
  }
}

template <typename T>
T from_text(const std::string& key, const std::string& value) {
  auto bad = [&] { return InputError("config key " + key + ": malformed value '" + value + "'"); };
  if constexpr (std::is_same_v<T, std::string>) {
    return value;
  } else if constexpr (std::is_same_v<T, bool>) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw bad();
  } else {
    std::istringstream in(value);
    T v{};
    if (!(in >> v)) throw bad();
    in >> std::ws;
    if (!in.eof()) throw bad();
    return v;
  }
}

struct ConfigField {
  std::string key;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

template <typename T>
ConfigField field(std::string key, T TrainConfig::*member) {
  return {key, [member](const TrainConfig& c) { return to_text(c.*member); },
          [key, member](TrainConfig& c, const std::string& v) { c.*member = from_text<T>(key, v); }};
}

ConfigField weight_field(std::string key, double LossWeights::*member) {
  return {key, [member](const TrainConfig& c) { return to_text(c.weights.*member); },
          [key, member](TrainConfig& c, const std::string& v) {
            c.weights.*member = from_text<double>(key, v);
          }};
}

const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = {
      {"profile", [](const TrainConfig& c) { return c.profile; },
       [](TrainConfig& c, const std::string& v) { c.apply_profile(v); }},
      field("batch_size", &TrainConfig::batch_size),
      field("epochs", &TrainConfig::epochs),
      field("learning_rate", &TrainConfig::learning_rate),
      field("plateau_factor", &TrainConfig::plateau_factor),
      field("plateau_patience", &TrainConfig::plateau_patience),
      field("min_learning_rate", &TrainConfig::min_learning_rate),
      weight_field("lambda_x", &LossWeights::x),
      weight_field("lambda_s", &LossWeights::s),
      weight_field("lambda_a", &LossWeights::a),
      weight_field("lambda_k", &LossWeights::k),
      field("sigma_x", &TrainConfig::sigma_x),
      field("sigma_k", &TrainConfig::sigma_k),
      field("beta_a", &TrainConfig::beta_a),
      field("beta_s", &TrainConfig::beta_s),
      field("seed", &TrainConfig::seed),
      field("threads", &TrainConfig::threads),
      field("condition", &TrainConfig::condition),
      field("hidden_dim", &TrainConfig::hidden_dim),
      field("embed_dim", &TrainConfig::embed_dim),
      field("num_layers", &TrainConfig::num_layers),
      field("fourier_order", &TrainConfig::fourier_order),
      field("lattice_head", &TrainConfig::lattice_head),
  };
  return fields;
}

const ConfigField& find_field(const std::string& key) {
  for (const auto& f : config_fields())
    if (f.key == key) return f;
  throw InputError("unknown config key '" + key + "'");
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Manifest -------------------------------------------------------------------

void write_manifest(std::ostream& out, const DatasetManifest& m, std::string_view created) {
  json header = {{"format_version", kFormatVersion},
                 {"record", "header"},
                 {"created", created},
                 {"num_classes", m.num_classes},
                 {"num_entries", m.entries.size()},
                 {"property", m.property_name.empty() ? json(nullptr) : json(m.property_name)},
                 {"histogram", histogram_json(m.histogram)},
                 {"skipped", m.skipped}};
  out << header.dump() << "\n";
  for (const auto& e : m.entries) {
    json sites = json::array();
    for (const auto& s : e.unit.sites) {
      std::vector<int> code(s.site.labels.begin(), s.site.labels.end());
      sites.push_back({{"Z", s.number}, {"frac", {s.frac[0], s.frac[1], s.frac[2]}}, {"site_symmetry", code}});
    }
    json entry = {{"format_version", kFormatVersion},
                  {"record", "entry"},
                  {"name", e.name},
                  {"sg", e.unit.sg},
                  {"k", e.unit.k},
                  {"sites", sites},
                  {"property", e.property ? json(*e.property) : json(nullptr)}};
    out << entry.dump() << "\n";
  }
}

DatasetManifest read_manifest(std::istream& in, std::string_view source) {
  DatasetManifest m;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  int header_classes = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = std::string(source) + ":" + std::to_string(line_no);
    try {
      const json j = json::parse(line);
      check_version(j, where);
      const std::string kind = j.at("record").get<std::string>();
      if (kind == "header") {
        have_header = true;
        header_classes = j.at("num_classes").get<int>();
        if (!j.at("property").is_null()) m.property_name = j.at("property").get<std::string>();
        m.skipped = j.value("skipped", std::vector<std::string>{});
      } else if (kind == "entry") {
        ManifestEntry e;
        e.name = j.at("name").get<std::string>();
        e.unit.sg = j.at("sg").get<int>();
        if (e.unit.sg < 1 || e.unit.sg > kNumSpaceGroups) throw InputError("sg out of range");
        e.unit.k = j.at("k").get<KVector>();
        for (const auto& s : j.at("sites")) {
          AsymmetricSite site;
          site.number = s.at("Z").get<int>();
          const auto f = s.at("frac").get<std::array<double, 3>>();
          site.frac = Vec3(f[0], f[1], f[2]);
          const auto code = s.at("site_symmetry").get<std::array<int, kNumAxes>>();
          for (int a = 0; a < kNumAxes; ++a) {
            if (code[a] < 1 || code[a] > kNumSiteLabels) throw InputError("site-symmetry label out of range");
            site.site.labels[a] = static_cast<std::uint8_t>(code[a]);
          }
          e.unit.sites.push_back(site);
        }
        if (e.unit.sites.empty()) throw InputError("entry without sites");
        if (!j.at("property").is_null()) e.property = j.at("property").get<double>();
        m.entries.push_back(std::move(e));
      } else {
        throw InputError("unknown record type '" + kind + "'");
      }
    } catch (const json::exception& e) {
      throw InputError(where + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError(where + ": " + e.what());
    }
  }
  if (!have_header) throw InputError(std::string(source) + ": missing header record");
  m.refresh();
  m.num_classes = std::max(m.num_classes, header_classes);
  return m;
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  std::ostringstream out;
  write_manifest(out, manifest, timestamp());
  write_text(path, out.str());
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open manifest " + path.string());
  return read_manifest(in, path.string());
}

// Training config -----------------------------------------------------------

const std::vector<std::string>& train_config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : config_fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

void set_train_config_value(TrainConfig& cfg, const std::string& key, const std::string& value) {
  find_field(key).set(cfg, value);
}

std::string get_train_config_value(const TrainConfig& cfg, const std::string& key) {
  return find_field(key).get(cfg);
}

TrainConfig parse_train_config(std::string_view text, std::string_view source, TrainConfig base) {
  struct Item {
    std::string key, value;
    int line;
  };
  std::vector<Item> items;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InputError(std::string(source) + ":" + std::to_string(line_no) + ": expected key = value");
    }
    items.push_back({trim(line.substr(0, eq)), trim(line.substr(eq + 1)), line_no});
  }
  auto apply = [&](const Item& it) {
    try {
      set_train_config_value(base, it.key, it.value);
    } catch (const InputError& e) {
      throw InputError(std::string(source) + ":" + std::to_string(it.line) + ": " + e.what());
    }
  };
  for (const auto& it : items)
    if (it.key == "profile") apply(it);
  for (const auto& it : items)
    if (it.key != "profile") apply(it);
  return base;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  return parse_train_config(read_text(path), path.string());
}

std::string format_train_config(const TrainConfig& cfg) {
  std::string out;
  for (const auto& f : config_fields()) out += f.key + " = " + f.get(cfg) + "\n";
  return out;
}

// Loss curve ------------------------------------------------------------------

std::string format_loss_csv(const std::vector<EpochRecord>& curve) {
  std::string out = "epoch,total,x,k,a,s,lr\n";
  for (const auto& r : curve) {
    out += std::to_string(r.epoch) + "," + fmt17(r.loss.total) + "," + fmt17(r.loss.x) + "," +
           fmt17(r.loss.k) + "," + fmt17(r.loss.a) + "," + fmt17(r.loss.s) + "," + fmt17(r.lr) + "\n";
  }
  return out;
}

// Checkpoint ------------------------------------------------------------------

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little endian");
  json blocks = json::array();
  for (const auto& b : parameter_layout(ck.net)) blocks.push_back({{"name", b.name}, {"rows", b.rows}, {"cols", b.cols}});
  json train = json::object();
  for (const auto& f : config_fields()) train[f.key] = f.get(ck.train);
  json header = {
      {"format_version", kFormatVersion},
      {"network",
       {{"hidden_dim", ck.net.hidden_dim},
        {"embed_dim", ck.net.embed_dim},
        {"num_layers", ck.net.num_layers},
        {"fourier_order", ck.net.fourier_order},
        {"num_classes", ck.net.num_classes},
        {"conditioned", ck.net.conditioned},
        {"lattice_head", to_string(ck.net.lattice_head)}}},
      {"train", train},
      {"histogram", histogram_json(ck.histogram)},
      {"property", ck.property ? json{{"name", ck.property->name}, {"mean", ck.property->mean}, {"std", ck.property->std}}
                               : json(nullptr)},
      {"blocks", blocks},
      {"num_params", ck.params.size()}};
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  const std::uint32_t version = kFormatVersion;
  const std::uint64_t header_len = text.size(), count = ck.params.size();
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(&header_len), sizeof header_len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(reinterpret_cast<const char*>(&count), sizeof count);
  out.write(reinterpret_cast<const char*>(ck.params.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path.string());
  const std::string where = path.string();
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t header_len = 0, count = 0;
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw InputError(where + ": not a checkpoint");
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&header_len), sizeof header_len);
  if (!in || version != kFormatVersion) throw InputError(where + ": unsupported checkpoint version");
  if (header_len > (1u << 26)) throw InputError(where + ": corrupt header length");
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  in.read(reinterpret_cast<char*>(&count), sizeof count);
  if (!in) throw InputError(where + ": truncated checkpoint");

  Checkpoint ck;
  try {
    const json h = json::parse(text);
    check_version(h, where);
    const json& n = h.at("network");
    ck.net.hidden_dim = n.at("hidden_dim").get<int>();
    ck.net.embed_dim = n.at("embed_dim").get<int>();
    ck.net.num_layers = n.at("num_layers").get<int>();
    ck.net.fourier_order = n.at("fourier_order").get<int>();
    ck.net.num_classes = n.at("num_classes").get<int>();
    ck.net.conditioned = n.at("conditioned").get<bool>();
    ck.net.lattice_head = lattice_head_from_string(n.at("lattice_head").get<std::string>());
    ck.net.validate();
    for (const auto& [key, value] : h.at("train").items()) {
      if (key == "profile") {
        ck.train.profile = value.get<std::string>();
        continue;
      }
      set_train_config_value(ck.train, key, value.get<std::string>());
    }
    ck.histogram = histogram_from(h.at("histogram"));
    if (!h.at("property").is_null()) {
      const json& p = h.at("property");
      ck.property = PropertyScaler{p.at("name").get<std::string>(), p.at("mean").get<double>(),
                                   p.at("std").get<double>()};
    }
    if (h.at("num_params").get<std::uint64_t>() != count) throw InputError("parameter count mismatch");
  } catch (const json::exception& e) {
    throw InputError(where + ": " + e.what());
  }
  const auto layout = parameter_layout(ck.net);
  if (count != layout.back().offset + layout.back().size()) {
    throw InputError(where + ": parameter count does not match the network configuration");
  }
  ck.params.resize(count);
  in.read(reinterpret_cast<char*>(ck.params.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw InputError(where + ": truncated parameter block");
  if (ck.net.conditioned != ck.property.has_value()) {
    throw InputError(where + ": conditioning flag and property scaler disagree");
  }
  return ck;
}

// Sampling diagnostics ------------------------------------------------------

std::string diagnostics_line(const SampleResult& r, std::string_view file) {
  json sites = json::array();
  for (const auto& s : r.unit.sites) {
    std::vector<int> code(s.site.labels.begin(), s.site.labels.end());
    sites.push_back({{"Z", s.number}, {"frac", {s.frac[0], s.frac[1], s.frac[2]}}, {"site_symmetry", code}});
  }
  json j = {{"format_version", kFormatVersion},
            {"index", r.index},
            {"sg", r.sg},
            {"num_sites", r.num_sites},
            {"n_steps", r.n_steps},
            {"status", r.crystal ? "ok" : "reconstruction_failed"},
            {"error", r.error.empty() ? json(nullptr) : json(r.error)},
            {"cell_atoms", r.crystal ? json(r.crystal->size()) : json(nullptr)},
            {"k", r.unit.k},
            {"sites", sites},
            {"file", file.empty() ? json(nullptr) : json(std::string(file))},
            {"seconds", r.seconds}};
  return j.dump();
}

// Evaluation ------------------------------------------------------------------

std::string report_json(const metrics::MetricsReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j = {{"format_version", kFormatVersion},
            {"num_generated", r.num_generated},
            {"num_reference", r.num_reference},
            {"structural_validity", r.structural_validity},
            {"compositional_validity", r.compositional_validity},
            {"num_charge_indeterminate", r.num_charge_indeterminate},
            {"num_valid", r.num_valid},
            {"wdist_density", opt(r.wdist_density)},
            {"wdist_num_elements", opt(r.wdist_num_elements)},
            {"jsd_spacegroup", r.jsd_spacegroup},
            {"uniqueness", r.uniqueness},
            {"novelty", r.novelty},
            {"units", {{"density", "g/cm^3"}, {"jsd_spacegroup", "Jensen-Shannon distance, base-2 logarithms"}}},
            {"notes", r.notes}};
  return j.dump(2) + "\n";
}

std::string structure_flags_jsonl(const metrics::MetricsReport& r) {
  std::string out;
  for (const auto& f : r.structures) {
    json j = {{"format_version", kFormatVersion},
              {"name", f.name},
              {"sg", f.sg},
              {"structurally_valid", f.structurally_valid},
              {"charge", metrics::to_string(f.charge)},
              {"density", f.density},
              {"num_elements", f.num_elements},
              {"novel", f.novel}};
    out += j.dump() + "\n";
  }
  return out;
}

// Run metadata ----------------------------------------------------------------

std::string metadata_json(const RunMetadata& meta) {
  json j = {{"format_version", kFormatVersion},
            {"command", meta.command},
            {"arguments", meta.arguments},
            {"config", meta.config},
            {"seed", meta.seed},
            {"code_version", SYMFLOW_VERSION},
            {"started", meta.started},
            {"finished", meta.finished}};
  return j.dump(2) + "\n";
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace symflow::records
