#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <optional>

#include "dtnet/act.hpp"
#include "dtnet/data.hpp"
#include "dtnet/halt_estimator.hpp"
#include "dtnet/network.hpp"
#include "dtnet/rng.hpp"
#include "dtnet/trainer.hpp"

namespace py = pybind11;

namespace {

dtnet::Tensor tensor_from_array(const py::array_t<double, py::array::c_style |
                                                              py::array::forcecast>& arr) {
  std::vector<int> shape;
  for (py::ssize_t i = 0; i < arr.ndim(); ++i) {
    shape.push_back(static_cast<int>(arr.shape(i)));
  }
  std::vector<double> data(arr.data(), arr.data() + arr.size());
  return dtnet::Tensor::from(shape, std::move(data));
}

py::array_t<double> array_from_tensor(const dtnet::Tensor& t) {
  std::vector<py::ssize_t> shape;
  for (int i = 0; i < t.ndim(); ++i) shape.push_back(t.dim(i));
  py::array_t<double> arr(shape);
  std::memcpy(arr.mutable_data(), t.data(), t.numel() * sizeof(double));
  return arr;
}

py::array_t<double> stack_logits(const std::vector<dtnet::Tensor>& per_t) {
  const py::ssize_t t_len = static_cast<py::ssize_t>(per_t.size());
  const py::ssize_t n = per_t.empty() ? 0 : per_t[0].dim(0);
  const py::ssize_t k = per_t.empty() ? 0 : per_t[0].dim(1);
  py::array_t<double> arr({t_len, n, k});
  for (py::ssize_t t = 0; t < t_len; ++t) {
    std::memcpy(arr.mutable_data(t, 0, 0), per_t[static_cast<std::size_t>(t)].data(),
                static_cast<std::size_t>(n * k) * sizeof(double));
  }
  return arr;
}

class PyNet {
 public:
  PyNet(const std::string& cell_kind, int channels, int t_train, int t_test,
        int num_classes, int input_channels, bool with_halting, std::uint64_t seed)
      : rng_(seed) {
    dtnet::NetConfig cfg;
    cfg.cell_kind = dtnet::cell_kind_from_string(cell_kind);
    cfg.channels = channels;
    cfg.t_train = t_train;
    cfg.t_test = t_test;
    cfg.num_classes = num_classes;
    cfg.input_channels = input_channels;
    cfg.with_halting = with_halting;
    net_ = std::make_unique<dtnet::DeepThinkNet>(cfg, rng_);
  }

  explicit PyNet(const std::string& checkpoint_path) : rng_(0) {
    auto loaded = dtnet::load_checkpoint(checkpoint_path);
    net_ = std::move(loaded.net);
  }

  py::dict forward(const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
                   int t_steps) {
    net_->set_train(false);
    dtnet::IterationOutputs out = net_->forward_iterate(tensor_from_array(x), t_steps);
    py::dict d;
    d["logits_main"] = stack_logits(out.logits_main);
    d["logits_aux"] = stack_logits(out.logits_aux);
    return d;
  }

  py::dict act_forward(const py::array_t<double, py::array::c_style |
                                                     py::array::forcecast>& x,
                       double tau, double epsilon, int t_max) {
    net_->set_train(false);
    dtnet::ActConfig cfg;
    cfg.tau = tau;
    cfg.epsilon = epsilon;
    cfg.t_max = t_max;
    dtnet::ActOutputs out = dtnet::act_run(*net_, tensor_from_array(x), cfg);
    py::dict d;
    d["halt_step"] = out.state.halt_step;
    d["remainder"] = out.state.remainder;
    d["logits_main"] = array_from_tensor(out.logits_main);
    d["logits_aux"] = array_from_tensor(out.logits_aux);
    return d;
  }

  // Minimal in-memory fit on already-augmented tensors; returns final losses.
  py::dict fit(const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
               const std::vector<int>& labels_main, const std::vector<int>& labels_aux,
               int steps, double lr) {
    net_->set_train(true);
    dtnet::Adam::Hyper hyper;
    hyper.lr = lr;
    dtnet::Adam adam(net_->parameters(), hyper);
    dtnet::Tensor pixels = tensor_from_array(x);
    double loss_value = 0.0;
    for (int s = 0; s < steps; ++s) {
      dtnet::Tape tape;
      dtnet::Tensor loss;
      {
        dtnet::TapeScope scope(tape);
        loss = net_->total_loss(pixels, labels_main, labels_aux);
      }
      adam.zero_grad();
      tape.backward(loss);
      adam.step();
      loss_value = loss.item();
    }
    net_->set_train(false);
    py::dict d;
    d["loss"] = loss_value;
    return d;
  }

  std::size_t num_parameters() { return net_->num_parameters(); }

  void save(const std::string& path) {
    dtnet::save_checkpoint(path, *net_, nullptr, rng_, 0);
  }

 private:
  dtnet::Rng rng_;
  std::unique_ptr<dtnet::DeepThinkNet> net_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "deep-thinking recurrent networks with test-time iteration selection";

  m.def(
      "synth_dataset",
      [](int num_classes, int num_samples, int size, double margin, std::uint64_t seed) {
        dtnet::SynthSpec spec;
        spec.num_classes = num_classes;
        spec.num_samples = num_samples;
        spec.height = size;
        spec.width = size;
        spec.margin = margin;
        spec.seed = seed;
        dtnet::Dataset d = dtnet::synth_dataset(spec);
        dtnet::ImageBatch batch = d.batch(0, d.size());
        return py::make_tuple(array_from_tensor(batch.pixels), batch.labels_main);
      },
      py::arg("num_classes") = 2, py::arg("num_samples") = 256, py::arg("size") = 16,
      py::arg("margin") = 1.0, py::arg("seed") = 0);

  m.def(
      "conv2d",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& w,
         std::optional<py::array_t<double, py::array::c_style | py::array::forcecast>> bias,
         int stride, int padding) {
        dtnet::ConvParams p;
        p.weight = tensor_from_array(w);
        if (bias) p.bias = tensor_from_array(*bias);
        p.stride = stride;
        p.padding = padding;
        return array_from_tensor(dtnet::conv2d(tensor_from_array(x), p));
      },
      py::arg("x"), py::arg("weight"), py::arg("bias") = std::nullopt,
      py::arg("stride") = 1, py::arg("padding") = 0);

  m.def(
      "rotate90",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
         const std::vector<int>& k) {
        dtnet::ImageBatch batch;
        batch.pixels = tensor_from_array(x);
        batch.labels_main.assign(static_cast<std::size_t>(batch.size()), 0);
        batch.labels_aux.assign(static_cast<std::size_t>(batch.size()), 0);
        return array_from_tensor(dtnet::rotate90(batch, k).pixels);
      },
      py::arg("x"), py::arg("k"));

  m.def(
      "gaussian_corrupt",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
         double sigma, std::uint64_t seed) {
        dtnet::ImageBatch batch;
        batch.pixels = tensor_from_array(x);
        batch.labels_main.assign(static_cast<std::size_t>(batch.size()), 0);
        batch.labels_aux.assign(static_cast<std::size_t>(batch.size()), 0);
        dtnet::CorruptionSpec spec;
        spec.sigma = sigma;
        return array_from_tensor(dtnet::corrupt(batch, spec, seed).pixels);
      },
      py::arg("x"), py::arg("sigma"), py::arg("seed") = 0);

  m.def("select_t_opt", &dtnet::select_t_opt, py::arg("acc_aux"),
        "1-based argmax with ties to the smallest iteration");

  m.def(
      "pearson",
      [](const std::vector<double>& a, const std::vector<double>& b) -> py::object {
        auto r = dtnet::correlation_diagnostic(a, b);
        if (!r) return py::none();
        return py::float_(*r);
      },
      py::arg("a"), py::arg("b"));

  m.def("sigma_for_severity", &dtnet::sigma_for_severity, py::arg("severity"));

  py::class_<PyNet>(m, "DeepThinkNet")
      .def(py::init<const std::string&, int, int, int, int, int, bool, std::uint64_t>(),
           py::arg("cell_kind") = "ligru", py::arg("channels") = 16,
           py::arg("t_train") = 8, py::arg("t_test") = 32, py::arg("num_classes") = 2,
           py::arg("input_channels") = 3, py::arg("with_halting") = false,
           py::arg("seed") = 0)
      .def_static(
          "load", [](const std::string& path) { return PyNet(path); },
          py::arg("checkpoint_path"))
      .def("forward", &PyNet::forward, py::arg("x"), py::arg("t_steps"))
      .def("act_forward", &PyNet::act_forward, py::arg("x"), py::arg("tau") = 0.5,
           py::arg("epsilon") = 0.01, py::arg("t_max") = 8)
      .def("fit", &PyNet::fit, py::arg("x"), py::arg("labels_main"),
           py::arg("labels_aux"), py::arg("steps") = 10, py::arg("lr") = 1e-3)
      .def("num_parameters", &PyNet::num_parameters)
      .def("save", &PyNet::save, py::arg("path"));
}
