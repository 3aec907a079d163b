#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "patk/experiment.hpp"
#include "patk/fieldio.hpp"
#include "patk/parallel.hpp"

namespace py = pybind11;
using namespace patk;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Image to_image(const Array& a) {
  if (a.ndim() != 2) throw ConfigError("expected a 2D image array");
  Image f(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), f.values().begin());
  return f;
}

TimeSeries to_series(const Array& a) {
  if (a.ndim() != 2) throw ConfigError("expected a 2D (detector, time) array");
  TimeSeries g(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), g.values().begin());
  return g;
}

Array to_array(const Image& f) {
  Array a({f.nx(), f.ny()});
  std::copy(f.values().begin(), f.values().end(), a.mutable_data());
  return a;
}

Array to_array(const TimeSeries& g) {
  Array a({g.n_det(), g.n_t()});
  std::copy(g.values().begin(), g.values().end(), a.mutable_data());
  return a;
}

py::dict history(const RunRecord& r) {
  py::dict d;
  d["objective"] = r.objective;
  d["rel_change"] = r.rel_change;
  d["psnr"] = r.psnr;
  d["ssim"] = r.ssim;
  d["iterations_run"] = r.iterations_run;
  d["converged"] = r.converged;
  return d;
}

py::dict report(const MetricsReport& m) {
  py::dict d;
  d["psnr"] = m.psnr_infinite ? std::numeric_limits<double>::infinity() : m.psnr;
  d["ssim"] = m.ssim;
  d["cc"] = m.cc;
  d["haarpsi"] = m.haarpsi;
  return d;
}

ExperimentConfig config_from(const KeyValues& kv) {
  ExperimentConfig c = load_config(nullptr, kv);
  c.validate();
  return c;
}

RoiMask roi_for(const Image& gt, std::optional<double> threshold) {
  return threshold ? roi_from_gt(gt, *threshold) : RoiMask::full(gt);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Photoacoustic tomography reconstruction toolkit";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def("config_keys", &config_keys, "Keys accepted in configuration dictionaries");
  m.def(
      "resolve_config", [](const KeyValues& kv) { return to_key_values(config_from(kv)); }, py::arg("overrides"),
      "Defaults updated with the overrides, fully resolved");

  py::class_<ForwardOperator>(m, "Operator", "Detector data of an initial pressure image and its adjoint")
      .def(py::init([](const KeyValues& kv) { return make_operator(config_from(kv)); }), py::arg("config"))
      .def("forward", [](const ForwardOperator& op, const Array& f) { return to_array(op.forward(to_image(f))); })
      .def("adjoint", [](const ForwardOperator& op, const Array& g) { return to_array(op.adjoint(to_series(g))); })
      .def_property_readonly("image_shape",
                             [](const ForwardOperator& op) { return py::make_tuple(op.grid().nx, op.grid().ny); })
      .def_property_readonly("data_shape",
                             [](const ForwardOperator& op) {
                               return py::make_tuple(op.ring().n_total(), op.time_axis().n_t);
                             })
      .def_property_readonly("dt", [](const ForwardOperator& op) { return op.time_axis().dt; })
      .def_property_readonly("coverage_deg", [](const ForwardOperator& op) { return op.ring().coverage_deg(); })
      .def_property_readonly("active", [](const ForwardOperator& op) {
        std::vector<bool> a(op.ring().active.begin(), op.ring().active.end());
        return a;
      });

  m.def(
      "simulate",
      [](const KeyValues& kv) {
        const ExperimentConfig c = config_from(kv);
        const ForwardOperator op = make_operator(c);
        const Problem p = make_problem(c, op);
        py::dict d;
        d["gt"] = to_array(p.gt);
        d["phantom_fine"] = to_array(p.phantom_fine);
        d["clean"] = to_array(p.clean);
        d["noisy"] = to_array(p.noisy);
        d["eta_measured"] = p.eta_measured;
        return d;
      },
      py::arg("config"), "Phantom, ground truth, clean and noisy data for a configuration");

  m.def(
      "add_relative_noise",
      [](const Array& g, double eta, std::uint64_t seed) { return to_array(add_relative_noise(to_series(g), eta, seed)); },
      py::arg("data"), py::arg("eta"), py::arg("seed"));

  m.def(
      "approximate_inverse",
      [](const Array& g, const ForwardOperator& op, const std::string& mode) {
        InverseMode im = InverseMode::normalized_adjoint;
        if (mode == "time_reversal") im = InverseMode::time_reversal;
        else if (mode != "normalized_adjoint") throw ConfigError("unknown inverse mode '" + mode + "'");
        return to_array(approximate_inverse(to_series(g), op, im));
      },
      py::arg("data"), py::arg("op"), py::arg("mode") = "normalized_adjoint");

  m.def(
      "tv_reconstruct",
      [](const Array& g, const ForwardOperator& op, const KeyValues& kv, std::optional<Array> gt) {
        const ExperimentConfig c = load_config(nullptr, kv);
        const std::optional<Image> truth = gt ? std::optional<Image>(to_image(*gt)) : std::nullopt;
        const PdhgResult r = pdhg_solve(to_series(g), op, c.tv, truth);
        return py::make_tuple(to_array(r.image), history(r.record));
      },
      py::arg("data"), py::arg("op"), py::arg("config") = KeyValues{}, py::arg("gt") = py::none(),
      "TV reconstruction; solver settings come from the tv.* keys");

  m.def(
      "dip_reconstruct",
      [](const Array& g, const Array& z, const ForwardOperator& op, const KeyValues& kv, std::optional<Array> gt) {
        const ExperimentConfig c = load_config(nullptr, kv);
        UNetConfig net = c.unet;
        net.init_seed = c.seed_network;
        const std::optional<Image> truth = gt ? std::optional<Image>(to_image(*gt)) : std::nullopt;
        const DipResult r = dip_reconstruct(to_series(g), to_image(z), op, c.dip, net, truth);
        py::dict h = history(r.record);
        h["selected"] = r.selected;
        h["data_residual"] = r.data_residual;
        return py::make_tuple(to_array(r.image), h);
      },
      py::arg("data"), py::arg("z"), py::arg("op"), py::arg("config") = KeyValues{}, py::arg("gt") = py::none(),
      "Deep image prior reconstruction; settings come from the dip.*, unet.* and seed.network keys");

  m.def(
      "psnr", [](const Array& r, const Array& g, std::optional<double> t) {
        const Image gt = to_image(g);
        return psnr(to_image(r), gt, roi_for(gt, t));
      },
      py::arg("rec"), py::arg("gt"), py::arg("roi_threshold") = py::none());
  m.def(
      "ssim", [](const Array& r, const Array& g, std::optional<double> t) {
        const Image gt = to_image(g);
        return ssim(to_image(r), gt, roi_for(gt, t));
      },
      py::arg("rec"), py::arg("gt"), py::arg("roi_threshold") = py::none());
  m.def(
      "pearson_cc", [](const Array& r, const Array& g, std::optional<double> t) {
        const Image gt = to_image(g);
        return pearson_cc(to_image(r), gt, roi_for(gt, t));
      },
      py::arg("rec"), py::arg("gt"), py::arg("roi_threshold") = py::none());
  m.def(
      "haarpsi", [](const Array& r, const Array& g, std::optional<double> t) {
        const Image gt = to_image(g);
        return haarpsi(to_image(r), gt, roi_for(gt, t));
      },
      py::arg("rec"), py::arg("gt"), py::arg("roi_threshold") = py::none());
  m.def(
      "evaluate", [](const Array& r, const Array& g, std::optional<double> t) {
        const Image gt = to_image(g);
        return report(evaluate(to_image(r), gt, roi_for(gt, t)));
      },
      py::arg("rec"), py::arg("gt"), py::arg("roi_threshold") = py::none());

  m.def("cosine_lr", &cosine_lr, py::arg("t"), py::arg("total"), py::arg("lr0"));

  m.def(
      "run_experiment",
      [](const KeyValues& kv) {
        const ExperimentResult r = run_experiment(config_from(kv));
        py::list rows;
        for (const auto& row : r.rows) {
          py::dict d = report(row.metrics);
          d["method"] = row.method;
          d["selection"] = row.selection;
          d["iterations"] = row.iterations;
          rows.append(d);
        }
        return rows;
      },
      py::arg("config"), "Runs an experiment and writes its artifacts to output.dir; returns the metrics rows");

  m.def(
      "read_raw",
      [](const std::filesystem::path& p) {
        const RawField f = read_raw(p);
        std::vector<py::ssize_t> shape(f.dims.begin(), f.dims.end());
        py::array_t<float> a(shape);
        std::copy(f.values.begin(), f.values.end(), a.mutable_data());
        return a;
      },
      py::arg("path"));
  m.def(
      "write_raw",
      [](const std::filesystem::path& p, const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
        RawField f;
        for (py::ssize_t k = 0; k < a.ndim(); ++k) f.dims.push_back(static_cast<std::uint32_t>(a.shape(k)));
        f.values.assign(a.data(), a.data() + a.size());
        write_raw(p, f);
      },
      py::arg("path"), py::arg("array"));

  m.def("set_num_threads", &set_num_threads, py::arg("n"));
  m.def("num_threads", &num_threads);
}
