#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dtnet/network.hpp"

namespace dtnet {

// Flat key = value run configuration. Unknown keys are rejected; CLI flag
// overrides win over file values.
struct RunConfig {
  // model
  std::string cell_kind = "ligru";
  int channels = 128;
  int t_train = 30;
  int t_test = 100;
  std::string downsample = "none";
  int recall_depth = 2;
  // data
  std::string dataset = "synth";  // synth | cifar10 | cifar100 | dtc1
  std::string dataset_path;
  int num_classes = 2;    // synth only; cifar variants fix their own
  int num_samples = 256;  // synth only
  int image_size = 16;    // synth only
  double margin = 1.0;    // synth only
  double train_fraction = 0.8;
  // corruption / augmentation
  int severity = 1;
  double sigma_noise = -1.0;  // >= 0 overrides the severity table
  // training
  int epochs = 50;
  int batch_size = 32;
  double lr = 1e-3;
  double weight_decay = 0.0002;
  double stop_at_train_acc = 0.0;
  // adaptive computation
  bool act = false;
  double tau = 0.5;
  double epsilon_act = 0.01;
  // run
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  int workers = 1;

  NetConfig net_config() const;
  // Training validates the full model config; evaluation commands take the
  // net from a checkpoint, so only the data/eval keys are checked.
  void validate(bool needs_dataset, bool for_training = true) const;
};

RunConfig parse_config_file(const std::string& path);
// Applies one "key=value" override (the CLI flag form).
void apply_override(RunConfig& cfg, const std::string& assignment);
// Canonical "key = value" rendering, one line per key, fixed order.
std::string canonical_config(const RunConfig& cfg);
// FNV-1a hash of the canonical rendering, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

}  // namespace dtnet
