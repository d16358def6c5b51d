#pragma once

#include <string>
#include <vector>

#include "dtnet/data.hpp"
#include "dtnet/network.hpp"

namespace dtnet {

// Per-iteration convergence trace: batch-averaged state delta norms plus the
// losses and accuracies of both heads at every iteration.
struct IterationTrace {
  std::vector<double> delta_norm;  // mean_n ||h_t - h_{t-1}||_F, h_0 precedes h_1
  std::vector<double> loss_main;
  std::vector<double> loss_aux;
  std::vector<double> acc_main;
  std::vector<double> acc_aux;

  int t_len() const { return static_cast<int>(delta_norm.size()); }
};

// [H, W] grid of channel-vector norms at one iteration.
struct NormHeatmap {
  int t = 0;  // 1-based iteration index
  int height = 0;
  int width = 0;
  std::vector<double> values;  // row-major
};

IterationTrace trace(DeepThinkNet& net, const ImageBatch& batch, int t_steps);

// Per-site channel norms of a single image's state at the requested
// iterations (each in [1, t_steps]).
std::vector<NormHeatmap> heatmap(DeepThinkNet& net, const ImageBatch& image,
                                 const std::vector<int>& t_list, int t_steps);

void write_trace_csv(const std::string& path, const IterationTrace& tr);
void write_heatmap_csv(const std::string& path, const NormHeatmap& hm);

// Accuracy-per-iteration curve CSV: t,acc_aux[,acc_main].
void write_curve_csv(const std::string& path, const std::vector<double>& acc_aux,
                     const std::vector<double>* acc_main);

// Per-sample class likelihoods over iterations, one row per (t, sample).
void write_likelihood_csv(const std::string& path,
                          const std::vector<Tensor>& logits_per_t,
                          int max_samples);

}  // namespace dtnet
