// Python bindings for the core operations.
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "symflow/bfn_continuous.hpp"
#include "symflow/bfn_discrete.hpp"
#include "symflow/cif.hpp"
#include "symflow/error.hpp"
#include "symflow/lattice.hpp"
#include "symflow/metrics.hpp"
#include "symflow/prototypes.hpp"
#include "symflow/records.hpp"
#include "symflow/sampler.hpp"
#include "symflow/symmetry.hpp"
#include "symflow/trainer.hpp"

namespace py = pybind11;
using namespace symflow;

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

RowMat frac_matrix(const std::vector<Vec3>& frac) {
  RowMat m(frac.size(), 3);
  for (std::size_t i = 0; i < frac.size(); ++i) m.row(i) = frac[i].transpose();
  return m;
}

std::vector<Vec3> frac_vector(const RowMat& m) {
  std::vector<Vec3> out(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[i] = m.row(i).transpose();
  return out;
}

Crystal make_crystal(const Mat3& lattice, const std::vector<int>& numbers, const RowMat& frac) {
  if (static_cast<Eigen::Index>(numbers.size()) != frac.rows())
    throw InputError("numbers and frac differ in length");
  Crystal c;
  c.lattice = lattice;
  c.numbers = numbers;
  c.frac = frac_vector(frac);
  return c;
}

TrainConfig config_from(const std::map<std::string, std::string>& values) {
  TrainConfig cfg;
  auto it = values.find("profile");
  if (it != values.end()) records::set_train_config_value(cfg, it->first, it->second);
  for (const auto& [k, v] : values)
    if (k != "profile") records::set_train_config_value(cfg, k, v);
  return cfg;
}

std::map<std::string, std::string> config_to(const TrainConfig& cfg) {
  std::map<std::string, std::string> out;
  for (const auto& k : records::train_config_keys()) out[k] = records::get_train_config_value(cfg, k);
  return out;
}

std::vector<metrics::LabeledCrystal> labeled(const std::vector<std::tuple<std::string, Crystal, int>>& v) {
  std::vector<metrics::LabeledCrystal> out;
  for (const auto& [name, c, sg] : v) out.push_back({name, c, sg});
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Symmetry-aware Bayesian flow network for crystals (C++ core)";
  m.attr("__version__") = SYMFLOW_VERSION;

  static py::exception<Error> base(m, "Error", PyExc_RuntimeError);
  static py::exception<InputError> input(m, "InputError", base.ptr());
  static py::exception<ReconstructionError> recon(m, "ReconstructionError", base.ptr());
  static py::exception<NumericalError> numerical(m, "NumericalError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const InputError& e) {
      PyErr_SetString(input.ptr(), e.what());
    } catch (const ReconstructionError& e) {
      PyErr_SetString(recon.ptr(), e.what());
    } catch (const NumericalError& e) {
      PyErr_SetString(numerical.ptr(), e.what());
    } catch (const Error& e) {
      PyErr_SetString(base.ptr(), e.what());
    }
  });

  // Structures ---------------------------------------------------------------
  py::class_<Crystal>(m, "Crystal")
      .def(py::init(&make_crystal), py::arg("lattice"), py::arg("numbers"), py::arg("frac"))
      .def_readwrite("lattice", &Crystal::lattice)
      .def_readwrite("numbers", &Crystal::numbers)
      .def_property(
          "frac", [](const Crystal& c) { return frac_matrix(c.frac); },
          [](Crystal& c, const RowMat& f) { c.frac = frac_vector(f); })
      .def_property_readonly("volume", &Crystal::volume)
      .def("__len__", &Crystal::size)
      .def("__repr__", [](const Crystal& c) { return "<Crystal with " + std::to_string(c.size()) + " sites>"; });

  py::class_<AsymmetricSite>(m, "AsymmetricSite")
      .def(py::init<>())
      .def_readwrite("number", &AsymmetricSite::number)
      .def_readwrite("frac", &AsymmetricSite::frac)
      .def_property(
          "site_symmetry",
          [](const AsymmetricSite& s) { return std::vector<int>(s.site.labels.begin(), s.site.labels.end()); },
          [](AsymmetricSite& s, const std::vector<int>& v) {
            if (v.size() != kNumAxes) throw InputError("site_symmetry needs 15 labels");
            for (int a = 0; a < kNumAxes; ++a) s.site.labels[a] = static_cast<std::uint8_t>(v[a]);
          });

  py::class_<AsymmetricUnit>(m, "AsymmetricUnit")
      .def(py::init<>())
      .def_readwrite("sg", &AsymmetricUnit::sg)
      .def_readwrite("k", &AsymmetricUnit::k)
      .def_readwrite("sites", &AsymmetricUnit::sites);

  // Flows ----------------------------------------------------------------------
  m.def("cts_beta", [](double t, double sigma) {
    const auto a = bfn::cts_beta(t, sigma);
    return std::make_pair(a.beta, a.gamma);
  }, py::arg("t"), py::arg("sigma") = bfn::kDefaultSigma, "(beta, gamma) of the continuous schedule");
  m.def("disc_beta", &bfn::disc_beta, py::arg("t"), py::arg("beta1"));

  // Lattice --------------------------------------------------------------------
  m.def("encode_lattice", [](const Mat3& l) {
    const auto e = lattice::encode_lattice(l);
    return std::make_pair(e.k, e.rotation);
  }, py::arg("lattice"), "(k, Q) with rows of the lattice as cell vectors");
  m.def("decode_lattice", &lattice::decode_lattice, py::arg("k"));
  m.def("mask_k", &lattice::mask_k, py::arg("k"), py::arg("sg"));
  m.def("free_components", &lattice::free_components, py::arg("sg"));

  // Symmetry -------------------------------------------------------------------
  m.def("space_group_ops", [](int sg) {
    std::vector<std::pair<Mat3, Vec3>> out;
    for (const auto& op : SpaceGroupTable::builtin().ops(sg)) out.emplace_back(op.rotation(), op.translation());
    return out;
  }, py::arg("sg"), "(rotation, translation) pairs acting on fractional coordinates");
  m.def("extract_asymmetric_unit", [](const Crystal& c, int sg, double tol) {
    return extract_asymmetric_unit(c, sg, tol);
  }, py::arg("crystal"), py::arg("sg"), py::arg("tol") = kDefaultTolerance);
  m.def("reconstruct_unit_cell", [](const AsymmetricUnit& au, double tol) {
    return reconstruct_unit_cell(au, tol);
  }, py::arg("unit"), py::arg("tol") = kDefaultTolerance);

  // CIF ------------------------------------------------------------------------
  m.def("parse_cif", [](const std::string& text) {
    const auto s = cif::parse_cif(text);
    return std::make_pair(s.crystal, s.sg);
  }, py::arg("text"), "(crystal, sg or None)");
  m.def("write_cif", [](const Crystal& c, std::optional<int> sg, const std::string& name) {
    return cif::write_cif(c, sg, name);
  }, py::arg("crystal"), py::arg("sg") = py::none(), py::arg("name") = "structure");
  m.def("prototypes", [] {
    std::vector<py::dict> out;
    for (const auto& p : load_prototypes()) {
      py::dict d;
      d["name"] = p.name;
      d["sg"] = p.sg;
      d["cif"] = p.cif;
      d["asymmetric_unit_size"] = p.asymmetric_unit_size;
      d["cell_atom_count"] = p.cell_atom_count;
      d["training"] = p.training;
      out.push_back(d);
    }
    return out;
  });

  // Data and training -----------------------------------------------------------
  py::class_<ManifestEntry>(m, "ManifestEntry")
      .def_readonly("name", &ManifestEntry::name)
      .def_readonly("unit", &ManifestEntry::unit)
      .def_readonly("property", &ManifestEntry::property);
  py::class_<DatasetManifest>(m, "DatasetManifest")
      .def_readonly("entries", &DatasetManifest::entries)
      .def_readonly("num_classes", &DatasetManifest::num_classes)
      .def_readonly("property_name", &DatasetManifest::property_name)
      .def_readonly("histogram", &DatasetManifest::histogram)
      .def_readonly("skipped", &DatasetManifest::skipped)
      .def("__len__", [](const DatasetManifest& d) { return d.entries.size(); })
      .def("save", [](const DatasetManifest& d, const std::string& path) { records::save_manifest(path, d); })
      .def_static("load", [](const std::string& path) { return records::load_manifest(path); });

  m.def("ingest_prototypes", [](const std::string& property) {
    IngestOptions o;
    o.property = property;
    return ingest_prototypes(o);
  }, py::arg("property") = "");
  m.def("ingest_cifs", [](const std::vector<std::tuple<std::string, std::string, std::optional<int>>>& items,
                          const std::string& property, double tol) {
    std::vector<IngestSource> src;
    for (const auto& [name, text, sg] : items) src.push_back({name, text, sg, std::nullopt});
    IngestOptions o;
    o.property = property;
    o.tol = tol;
    return ingest(src, o);
  }, py::arg("items"), py::arg("property") = "", py::arg("tol") = 1e-3,
        "items: (name, cif text, sg label or None)");
  m.def("jitter_manifest", &jitter_manifest, py::arg("manifest"), py::arg("copies"), py::arg("spread"),
        py::arg("seed"));

  m.def("default_config", [] { return config_to(TrainConfig{}); });

  py::class_<Checkpoint>(m, "Checkpoint")
      .def_property_readonly("num_params", [](const Checkpoint& c) { return c.params.size(); })
      .def_property_readonly("conditioned", [](const Checkpoint& c) { return c.net.conditioned; })
      .def_property_readonly("num_classes", [](const Checkpoint& c) { return c.net.num_classes; })
      .def_property_readonly("histogram", [](const Checkpoint& c) { return c.histogram; })
      .def_property_readonly("config", [](const Checkpoint& c) { return config_to(c.train); })
      .def("save", [](const Checkpoint& c, const std::string& path) { records::save_checkpoint(path, c); })
      .def_static("load", [](const std::string& path) { return records::load_checkpoint(path); });

  m.def("train", [](const DatasetManifest& manifest, const std::map<std::string, std::string>& config,
                    const std::function<void(int, double)>& on_epoch) {
    const TrainConfig cfg = config_from(config);
    TrainResult r;
    {
      py::gil_scoped_release release;
      std::function<void(const EpochRecord&)> hook;
      if (on_epoch) {
        hook = [&](const EpochRecord& e) {
          py::gil_scoped_acquire acquire;
          on_epoch(e.epoch, e.loss.total);
        };
      }
      r = train(cfg, manifest, hook);
    }
    std::vector<py::dict> curve;
    for (const auto& e : r.curve) {
      py::dict d;
      d["epoch"] = e.epoch;
      d["total"] = e.loss.total;
      d["x"] = e.loss.x;
      d["k"] = e.loss.k;
      d["a"] = e.loss.a;
      d["s"] = e.loss.s;
      d["lr"] = e.lr;
      curve.push_back(d);
    }
    return std::make_pair(r.checkpoint, curve);
  }, py::arg("manifest"), py::arg("config") = std::map<std::string, std::string>{},
        py::arg("on_epoch") = nullptr,
        "config values are strings keyed like the config file; returns (checkpoint, loss curve)");

  // Sampling -------------------------------------------------------------------
  py::class_<SampleResult>(m, "SampleResult")
      .def_readonly("index", &SampleResult::index)
      .def_readonly("sg", &SampleResult::sg)
      .def_readonly("num_sites", &SampleResult::num_sites)
      .def_readonly("n_steps", &SampleResult::n_steps)
      .def_readonly("unit", &SampleResult::unit)
      .def_readonly("crystal", &SampleResult::crystal)
      .def_readonly("error", &SampleResult::error)
      .def_readonly("seconds", &SampleResult::seconds);

  m.def("generate", [](const Checkpoint& ck, int n_steps, int count, std::optional<int> sg,
                       std::optional<double> target, std::uint64_t seed, int threads) {
    SampleConfig c;
    c.n_steps = n_steps;
    c.count = count;
    c.sg = sg;
    c.target = target;
    c.seed = seed;
    c.threads = threads;
    py::gil_scoped_release release;
    return generate(ck, c);
  }, py::arg("checkpoint"), py::arg("n_steps") = 100, py::arg("count") = 1, py::arg("sg") = py::none(),
        py::arg("target") = py::none(), py::arg("seed") = 0, py::arg("threads") = 1);

  // Metrics ----------------------------------------------------------------------
  m.def("structural_validity", [](const Crystal& c) { return metrics::structural_validity(c); });
  m.def("density", &metrics::density);
  m.def("charge_neutrality", [](const Crystal& c) {
    return std::string(metrics::to_string(metrics::charge_neutrality(metrics::composition(c))));
  });
  m.def("wasserstein_1d", [](const std::vector<double>& a, const std::vector<double>& b) {
    return metrics::wasserstein_1d(a, b);
  });
  m.def("structure_match", [](const Crystal& a, const Crystal& b) { return metrics::structure_match(a, b); });
  m.def("evaluate_json", [](const std::vector<std::tuple<std::string, Crystal, int>>& generated,
                            const std::vector<std::tuple<std::string, Crystal, int>>& reference) {
    const auto g = labeled(generated), r = labeled(reference);
    return records::report_json(metrics::evaluate(g, r));
  }, py::arg("generated"), py::arg("reference"), "items: (name, crystal, sg); returns the JSON report");
}
