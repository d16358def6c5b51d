#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dtnet/cells.hpp"
#include "dtnet/ops.hpp"

namespace dtnet {

enum class CellKind { LiGRU, GRU, Recall, FeedForward };
enum class Downsample { None, Stride2 };

CellKind cell_kind_from_string(const std::string& s);
std::string to_string(CellKind kind);

struct NetConfig {
  int channels = 128;
  int t_train = 30;
  int t_test = 100;
  CellKind cell_kind = CellKind::LiGRU;
  int num_classes = 10;
  Downsample downsample = Downsample::None;
  int input_channels = 3;
  int recall_depth = 2;   // conv layers in the Recall cell
  bool with_halting = false;  // adds the halting head used by the ACT path

  void validate() const;
};

// Residual block of the non-recurrent baseline: h + conv_b(relu(conv_a(h))).
struct ResidualBlock {
  ConvParams conv_a;
  ConvParams conv_b;
};

// Per-sample halting score head: 1x1 conv to one channel, pooled, squashed.
struct HaltingHead {
  ConvParams conv;  // [1, channels, 1, 1], with bias
};

struct AffineHead {
  Tensor weight;  // [K, channels]
  Tensor bias;    // [K]
};

// hidden, logits_main and logits_aux cover the same iterations 1..T;
// hidden stays empty when the forward was asked not to retain states.
struct IterationOutputs {
  Tensor h0;
  std::vector<Tensor> hidden;       // h_1 .. h_T
  std::vector<Tensor> logits_main;  // [N, num_classes] per t
  std::vector<Tensor> logits_aux;   // [N, 4] per t
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Input transform + one recurrent cell (or a feedforward block stack) +
// dual readout heads. The same trunk state feeds both heads.
class DeepThinkNet {
 public:
  DeepThinkNet(const NetConfig& config, Rng& rng);

  const NetConfig& config() const { return config_; }

  // Train/Eval switch for every BN in the net.
  void set_train(bool train);

  Tensor input_transform(const Tensor& x);
  // keep_hidden = false drops intermediate states as soon as the heads have
  // read them (long evaluation budgets would otherwise hold T full states).
  IterationOutputs forward_iterate(const Tensor& x, int t_steps,
                                   bool keep_hidden = true);

  // Cross-entropy of both heads at the last training iteration.
  Tensor total_loss(const Tensor& x, const std::vector<int>& y_main,
                    const std::vector<int>& y_aux);

  // Readout of the feedforward stack at the given depth (<= t_train).
  Tensor feedforward_baseline(const Tensor& x, int depth);

  Tensor head_main_logits(const Tensor& h);
  Tensor head_aux_logits(const Tensor& h);

  std::vector<NamedTensor> parameters();  // trainable
  std::vector<NamedTensor> buffers();     // BN running statistics
  std::size_t num_parameters();

  ConvLiGRUCell* ligru() { return std::get_if<ConvLiGRUCell>(&cell_); }
  ConvGRUCell* gru() { return std::get_if<ConvGRUCell>(&cell_); }
  RecallCell* recall() { return std::get_if<RecallCell>(&cell_); }

  ConvParams& input_conv() { return input_conv_; }
  AffineHead& head_main() { return head_main_; }
  AffineHead& head_aux() { return head_aux_; }
  std::optional<HaltingHead>& halting() { return halting_; }

 private:
  Tensor step(const Tensor& h_prev, const Tensor& h0, const InputDrive& drive,
              int t_index);

  NetConfig config_;
  ConvParams input_conv_;
  std::variant<ConvLiGRUCell, ConvGRUCell, RecallCell,
               std::vector<ResidualBlock>>
      cell_;
  AffineHead head_main_;
  AffineHead head_aux_;
  std::optional<HaltingHead> halting_;
};

}  // namespace dtnet
