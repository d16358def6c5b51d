#pragma once

#include <vector>

#include "dtnet/network.hpp"
#include "dtnet/tensor.hpp"

namespace dtnet {

struct ActConfig {
  double tau = 0.5;       // ponder-cost weight
  double epsilon = 0.01;  // halting threshold slack, in (0,1)
  int t_max = 30;         // iteration budget

  void validate() const;
};

// Per-sample halting bookkeeping. For sample n halting at step N:
//   weights[t][n] = p[t][n]            for t <  N
//   weights[N-1][n] = remainder[n] = 1 - sum of the earlier scores
//   weights[t][n] = 0                  for t >= N
// so each sample's weights sum to 1 exactly by construction.
struct ActState {
  std::vector<Tensor> p;        // halting scores per step, each [N]
  std::vector<Tensor> weights;  // same layout as p
  std::vector<int> halt_step;   // 1-based N per sample
  std::vector<double> remainder;
  int steps_run = 0;  // number of iterations actually executed
};

struct ActOutputs {
  ActState state;
  Tensor final_hidden;  // sum_t weights[t] * h_t
  Tensor logits_main;
  Tensor logits_aux;
};

// One halting score per sample in (0,1): 1x1 conv -> global average pool ->
// sigmoid. Output shape [N].
Tensor halting_score(const HaltingHead& head, const Tensor& h_t);

// Iterates the net until every sample's cumulative score reaches
// 1 - epsilon (or the budget runs out), then reads out the heads from the
// weighted state. Gradients flow through the weights as functions of the
// scores; the halt step itself is discrete.
ActOutputs act_run(DeepThinkNet& net, const Tensor& x, const ActConfig& cfg);

// task_loss + tau * mean_n(N_n + remainder_n).
Tensor act_loss(const Tensor& task_loss, const ActState& state,
                const ActConfig& cfg);

// Differentiable weight construction from halting scores at fixed halt
// steps (exposed for testing).
std::vector<Tensor> act_weights(const std::vector<Tensor>& p,
                                const std::vector<int>& halt_step);

// Picks weights[halt_step[n]-1][n] per sample, i.e. the remainder, as a
// differentiable [N] tensor.
Tensor act_remainder(const std::vector<Tensor>& weights,
                     const std::vector<int>& halt_step);

}  // namespace dtnet
