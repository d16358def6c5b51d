#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dtnet/act.hpp"
#include "dtnet/data.hpp"
#include "dtnet/network.hpp"
#include "dtnet/rng.hpp"

namespace dtnet {

// Adam with decoupled weight decay: parameters shrink by (1 - lr*wd) before
// the bias-corrected moment update is applied.
class Adam {
 public:
  struct Hyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0002;
  };

  Adam(std::vector<NamedTensor> params, Hyper hyper);

  // One update from the gradients currently in the parameter buffers.
  void step();
  void zero_grad();

  std::int64_t step_count() const { return step_count_; }
  const Hyper& hyper() const { return hyper_; }
  const std::vector<NamedTensor>& params() const { return params_; }
  std::vector<NamedTensor> moment_state();  // m/v buffers, for checkpoints
  void restore_moments(const std::vector<NamedTensor>& entries);
  void set_step_count(std::int64_t n) { step_count_ = n; }

 private:
  std::vector<NamedTensor> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  Hyper hyper_;
  std::int64_t step_count_ = 0;
};

struct MetricsRow {
  int epoch = 0;
  std::string split;  // "train" or "val"
  double loss_main = 0.0;
  double loss_aux = 0.0;
  double acc_main = 0.0;
  double acc_aux = 0.0;
};

struct TrainOptions {
  int epochs = 50;
  int batch_size = 32;
  double train_fraction = 0.8;
  Adam::Hyper adam;
  CorruptionSpec corruption;       // training-time augmentation noise
  std::uint64_t seed = 0;
  double stop_at_train_acc = 0.0;  // 0 disables early stop
  std::optional<ActConfig> act;
};

struct TrainResult {
  std::vector<MetricsRow> metrics;
  int epochs_run = 0;
};

// Augment (corrupt + rotate), forward t_train iterations, backprop, Adam.
// Aborts with ContractError if the loss diverges to NaN.
TrainResult train(DeepThinkNet& net, Adam& adam, const Dataset& data,
                  const TrainOptions& opts, Rng& rng);

void write_metrics_csv(const std::string& path,
                       const std::vector<MetricsRow>& rows);

// Checkpoint: magic "DTCK", u32 version, net config, epoch, RNG state, then
// length-prefixed name/shape/f32-data triples for parameters, BN buffers and
// Adam moments (little-endian).
void save_checkpoint(const std::string& path, DeepThinkNet& net, Adam* adam,
                     const Rng& rng, int epoch);

struct LoadedCheckpoint {
  std::unique_ptr<DeepThinkNet> net;
  std::unique_ptr<Adam> adam;  // null when the checkpoint has no optimizer state
  Rng rng{0};
  int epoch = 0;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace dtnet
