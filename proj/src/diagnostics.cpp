#include "dtnet/diagnostics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "dtnet/errors.hpp"
#include "dtnet/ops.hpp"

namespace dtnet {

namespace {

double mean_state_delta(const Tensor& a, const Tensor& b) {
  const int n = a.dim(0);
  const std::size_t slice = a.numel() / static_cast<std::size_t>(n);
  const double* ad = a.data();
  const double* bd = b.data();
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    const std::size_t base = static_cast<std::size_t>(i) * slice;
    for (std::size_t j = 0; j < slice; ++j) {
      const double d = ad[base + j] - bd[base + j];
      acc += d * d;
    }
    total += std::sqrt(acc);
  }
  return total / n;
}

double accuracy(const Tensor& logits, const std::vector<int>& labels) {
  const auto pred = argmax_rows(logits);
  int correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (pred[i] == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path + "'");
  return out;
}

void append_num(std::string& line, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  line += buf;
}

}  // namespace

IterationTrace trace(DeepThinkNet& net, const ImageBatch& batch, int t_steps) {
  IterationOutputs out = net.forward_iterate(batch.pixels, t_steps);
  IterationTrace tr;
  Tensor prev = out.h0;
  for (int t = 0; t < t_steps; ++t) {
    const Tensor& h = out.hidden[static_cast<std::size_t>(t)];
    tr.delta_norm.push_back(mean_state_delta(h, prev));
    prev = h;
    tr.loss_main.push_back(
        softmax_cross_entropy(out.logits_main[static_cast<std::size_t>(t)],
                              batch.labels_main)
            .item());
    tr.loss_aux.push_back(
        softmax_cross_entropy(out.logits_aux[static_cast<std::size_t>(t)],
                              batch.labels_aux)
            .item());
    tr.acc_main.push_back(
        accuracy(out.logits_main[static_cast<std::size_t>(t)], batch.labels_main));
    tr.acc_aux.push_back(
        accuracy(out.logits_aux[static_cast<std::size_t>(t)], batch.labels_aux));
  }
  return tr;
}

std::vector<NormHeatmap> heatmap(DeepThinkNet& net, const ImageBatch& image,
                                 const std::vector<int>& t_list, int t_steps) {
  if (image.size() != 1) throw ContractError("heatmap expects a single image");
  for (int t : t_list) {
    if (t < 1 || t > t_steps) {
      throw ContractError("heatmap: iteration " + std::to_string(t) +
                          " outside [1," + std::to_string(t_steps) + "]");
    }
  }
  IterationOutputs out = net.forward_iterate(image.pixels, t_steps);
  std::vector<NormHeatmap> maps;
  for (int t : t_list) {
    const Tensor& h = out.hidden[static_cast<std::size_t>(t - 1)];
    const int c = h.dim(1), hh = h.dim(2), ww = h.dim(3);
    NormHeatmap hm;
    hm.t = t;
    hm.height = hh;
    hm.width = ww;
    hm.values.resize(static_cast<std::size_t>(hh) * ww);
    for (int r = 0; r < hh; ++r) {
      for (int col = 0; col < ww; ++col) {
        double acc = 0.0;
        for (int ch = 0; ch < c; ++ch) {
          const double v = h.at(0, ch, r, col);
          acc += v * v;
        }
        hm.values[static_cast<std::size_t>(r) * ww + col] = std::sqrt(acc);
      }
    }
    maps.push_back(std::move(hm));
  }
  return maps;
}

void write_trace_csv(const std::string& path, const IterationTrace& tr) {
  auto out = open_csv(path);
  out << "t,delta_norm,loss_main,loss_aux,acc_main,acc_aux\n";
  for (int t = 0; t < tr.t_len(); ++t) {
    std::string line = std::to_string(t + 1);
    for (const auto* arr : {&tr.delta_norm, &tr.loss_main, &tr.loss_aux,
                            &tr.acc_main, &tr.acc_aux}) {
      line += ',';
      append_num(line, (*arr)[static_cast<std::size_t>(t)]);
    }
    out << line << "\n";
  }
}

void write_heatmap_csv(const std::string& path, const NormHeatmap& hm) {
  auto out = open_csv(path);
  for (int r = 0; r < hm.height; ++r) {
    std::string line;
    for (int c = 0; c < hm.width; ++c) {
      if (c) line += ',';
      append_num(line, hm.values[static_cast<std::size_t>(r) * hm.width + c]);
    }
    out << line << "\n";
  }
}

void write_curve_csv(const std::string& path, const std::vector<double>& acc_aux,
                     const std::vector<double>* acc_main) {
  auto out = open_csv(path);
  out << (acc_main ? "t,acc_aux,acc_main\n" : "t,acc_aux\n");
  for (std::size_t t = 0; t < acc_aux.size(); ++t) {
    std::string line = std::to_string(t + 1);
    line += ',';
    append_num(line, acc_aux[t]);
    if (acc_main) {
      line += ',';
      append_num(line, (*acc_main)[t]);
    }
    out << line << "\n";
  }
}

void write_likelihood_csv(const std::string& path,
                          const std::vector<Tensor>& logits_per_t,
                          int max_samples) {
  auto out = open_csv(path);
  if (logits_per_t.empty()) return;
  const int k = logits_per_t[0].dim(1);
  std::string header = "t,sample";
  for (int i = 0; i < k; ++i) header += ",p" + std::to_string(i);
  out << header << "\n";
  for (std::size_t t = 0; t < logits_per_t.size(); ++t) {
    const Tensor& logits = logits_per_t[t];
    const int n = std::min(max_samples, logits.dim(0));
    const auto probs = softmax_rows(logits);
    for (int i = 0; i < n; ++i) {
      std::string line = std::to_string(t + 1) + ',' + std::to_string(i);
      for (int ki = 0; ki < k; ++ki) {
        line += ',';
        append_num(line, probs[static_cast<std::size_t>(i) * k + ki]);
      }
      out << line << "\n";
    }
  }
}

}  // namespace dtnet
