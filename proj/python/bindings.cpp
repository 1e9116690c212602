#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "tactwin/cli.hpp"
#include "tactwin/config.hpp"

namespace py = pybind11;
using namespace tactwin;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(const Raster<double>& r) {
  Array a({r.height, r.width});
  std::copy(r.data.begin(), r.data.end(), a.mutable_data());
  return a;
}

TactileImage from_array(const Array& a, double scale, bool reference) {
  if (a.ndim() != 2) throw ContractViolation("image must be a 2-D array");
  TactileImage img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)), scale);
  std::copy(a.data(), a.data() + a.size(), img.data.begin());
  img.is_reference = reference;
  return img;
}

py::object to_py(const Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

RunConfig config_from(const std::string& text) {
  RunConfig c;
  if (!text.empty()) {
    try {
      merge_json(Json::parse(text), c);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
  }
  c.validate();
  return c;
}

class PyDecoder {
 public:
  PyDecoder(const std::string& suite, const std::string& config)
      : cfg_(config_from(config)),
        decoder_(build_calibration(suite_probes(parse_suite(suite)), cfg_.sim, cfg_.decoder,
                                   force_grid(cfg_.calibration_step, cfg_.sim.material.max_force),
                                   cfg_.threads),
                 cfg_.sim, cfg_.decoder),
        reference_(reference_image(cfg_.sim)) {}

  py::list decode(const Array& image) const {
    const TactileImage img = from_array(image, cfg_.sim.sensor.scale, false);
    std::vector<Detection> dets;
    {
      py::gil_scoped_release release;
      dets = decoder_.decode(img, reference_);
    }
    py::list out;
    for (const auto& d : dets) out.append(to_py(to_json(d)));
    return out;
  }

  const std::string& hash() const { return decoder_.table().param_hash; }

 private:
  RunConfig cfg_;
  Decoder decoder_;
  TactileImage reference_;
};

}  // namespace

PYBIND11_MODULE(_tactwin, m) {
  m.doc() = "Tactile sensor digital twin: simulation, decoding and loss primitives";

  auto error = py::register_exception<Error>(m, "Error");
  py::register_exception<ConfigError>(m, "ConfigError", error);
  py::register_exception<DomainError>(m, "DomainError", error);
  py::register_exception<ScenarioError>(m, "ScenarioError", error);
  py::register_exception<IoError>(m, "IoError", error);
  py::register_exception<ContractViolation>(m, "ContractViolation", error);

  py::class_<OrientedBox>(m, "OrientedBox")
      .def(py::init(&make_box), py::arg("cx"), py::arg("cy"), py::arg("w"), py::arg("h"),
           py::arg("theta") = 0.0)
      .def_readonly("cx", &OrientedBox::cx)
      .def_readonly("cy", &OrientedBox::cy)
      .def_readonly("w", &OrientedBox::w)
      .def_readonly("h", &OrientedBox::h)
      .def_property_readonly("theta", [](const OrientedBox& b) { return b.theta.value(); })
      .def("__repr__", [](const OrientedBox& b) {
        std::ostringstream s;
        s << "OrientedBox(" << b.cx << ", " << b.cy << ", " << b.w << ", " << b.h << ", "
          << b.theta.value() << ")";
        return s.str();
      });

  m.def("rotated_iou", &rotated_iou);
  m.def("box_loss", &box_loss);
  m.def("angle_error", [](double a, double b) { return angle_error(AngleDeg(a), AngleDeg(b)); });
  m.def("normalize_angle", [](double raw) { return normalize_angle(raw).value(); });

  m.def(
      "csl_encode",
      [](double theta, double window_radius, double sigma) {
        const CslVector v = csl_encode(AngleDeg(theta), CslParams{window_radius, sigma});
        return std::vector<double>(v.bins.begin(), v.bins.end());
      },
      py::arg("theta"), py::arg("window_radius") = 6.0, py::arg("sigma") = 4.0);
  m.def("csl_decode", [](const std::vector<double>& bins) {
    if (bins.size() != kCslBins) throw ContractViolation("csl vector needs 180 bins");
    CslVector v;
    std::copy(bins.begin(), bins.end(), v.bins.begin());
    return csl_decode(v).value();
  });

  m.def("bce", &bce, py::arg("p"), py::arg("y"), py::arg("eps") = 1e-7);
  m.def("smooth_l1", &smooth_l1);

  m.def(
      "hertz_indentation",
      [](double force, double radius, double e_star) {
        const Indentation i = hertz_indentation(force, radius, e_star);
        return py::make_tuple(i.depth, i.contact_radius);
      },
      py::arg("force"), py::arg("radius"), py::arg("e_star") = 0.3);
  m.def("punch_indentation", &punch_indentation, py::arg("force"), py::arg("area"),
        py::arg("e_star") = 0.3);

  m.def("default_config", [] { return to_json(RunConfig{}).dump(); });
  m.def("validate_config", [](const std::string& text) { return to_json(config_from(text)).dump(); });

  m.def(
      "simulate",
      [](const std::string& probe, double force, double x, double y, double theta, double noise,
         std::uint64_t seed, const std::string& config) {
        const RunConfig cfg = config_from(config);
        ContactScenario s;
        s.probe = probe_from_json(Json::parse(probe));
        s.force = force;
        s.x = x;
        s.y = y;
        s.theta = AngleDeg(theta);
        s.noise_sigma = noise;
        const SimResult r = simulate(s, cfg.sim, seed);
        py::list truths;
        for (const auto& t : r.truth) {
          truths.append(py::dict(py::arg("class") = t.class_name, py::arg("force") = t.force,
                                 py::arg("theta") = t.theta.value(), py::arg("box") = t.box));
        }
        return py::make_tuple(to_array(r.image), truths);
      },
      py::arg("probe"), py::arg("force"), py::arg("x") = 0.0, py::arg("y") = 0.0,
      py::arg("theta") = 0.0, py::arg("noise") = 0.0, py::arg("seed") = 0, py::arg("config") = "");
  m.def(
      "reference_image",
      [](const std::string& config) { return to_array(reference_image(config_from(config).sim)); },
      py::arg("config") = "");

  py::class_<PyDecoder>(m, "Decoder")
      .def(py::init<const std::string&, const std::string&>(), py::arg("suite"),
           py::arg("config") = "")
      .def("decode", &PyDecoder::decode)
      .def_property_readonly("calibration_hash", &PyDecoder::hash);

  m.def("run_cli", [](std::vector<std::string> args) {
    args.insert(args.begin(), "tactwin");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return py::make_tuple(code, out.str(), err.str());
  });
}
