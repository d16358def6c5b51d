#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dtnet/act.hpp"
#include "dtnet/config.hpp"
#include "dtnet/data.hpp"
#include "dtnet/halt_estimator.hpp"
#include "dtnet/network.hpp"

namespace dtnet {

// Loads (or generates) the dataset named by the config.
Dataset load_dataset(const RunConfig& cfg);

// Evaluation stream settings: every evaluated sample is corrupted and then
// rotated with seed-derived per-sample substreams, so the stream content is
// identical regardless of batch boundaries or worker count.
struct EvalOptions {
  int t_steps = 100;
  int batch_size = 32;
  CorruptionSpec corruption;
  std::uint64_t seed = 0;
  int workers = 1;
};

ImageBatch eval_batch(const Dataset& data, int start, int count,
                      const EvalOptions& opts);

// Runs the per-iteration accuracy accumulation over the whole dataset.
// Workers split the batch list; partial curves merge in batch order.
IterationCurve estimate_curve(DeepThinkNet& net, const Dataset& data,
                              const EvalOptions& opts);

struct ActEvalResult {
  std::vector<int> halt_step;       // per sample
  std::vector<double> remainder;    // per sample
  double acc_main = 0.0;
  double acc_aux = 0.0;
  double mean_halt = 0.0;
  double var_halt = 0.0;
};

ActEvalResult act_evaluate(DeepThinkNet& net, const Dataset& data,
                           const ActConfig& cfg, const EvalOptions& opts);

}  // namespace dtnet
