#pragma once

#include <vector>

#include "dtnet/ops.hpp"
#include "dtnet/rng.hpp"
#include "dtnet/tensor.hpp"

namespace dtnet {

// Gated recurrent step without a reset gate: the update gate interpolates
// between the carried state and a ReLU candidate, and the two input-to-state
// convolutions are batch-normalized. All convolutions are 3x3/stride 1/pad 1
// with no bias, so spatial shape is preserved and BN absorbs the bias.
struct ConvLiGRUCell {
  ConvParams gate_state;  // state -> update gate
  ConvParams gate_input;  // initial state -> update gate (through BN)
  ConvParams cand_state;  // state -> candidate
  ConvParams cand_input;  // initial state -> candidate (through BN)
  BatchNormState bn_gate;
  BatchNormState bn_cand;
  int channels = 0;
};

// Full gated recurrent step: reset and update gates conditioned on the
// carried state and the initial state, tanh candidate.
struct ConvGRUCell {
  ConvParams reset_state;
  ConvParams reset_input;
  ConvParams update_state;
  ConvParams update_input;
  ConvParams cand_state;
  ConvParams cand_input;
  int channels = 0;
};

// Stack of shape-preserving conv+ReLU layers applied to the channel
// concatenation of the carried state and the initial state.
struct RecallCell {
  std::vector<ConvParams> layers;  // layers[0] maps 2*channels -> channels
  int channels = 0;
};

// Input-dependent but iteration-invariant drive terms, computed once per
// forward pass and reused at every step.
struct InputDrive {
  Tensor drive_gate;  // BN(gate_input * h0)
  Tensor drive_cand;  // BN(cand_input * h0)
};

ConvLiGRUCell make_ligru_cell(int channels, Rng& rng);
ConvGRUCell make_gru_cell(int channels, Rng& rng);
RecallCell make_recall_cell(int channels, int depth, Rng& rng);

void set_cell_mode(ConvLiGRUCell& cell, BnMode mode);

InputDrive precompute_input_drive(ConvLiGRUCell& cell, const Tensor& h0);

// h_t = z ⊙ cand + (1 - z) ⊙ h_prev with
//   z    = sigmoid(gate_state * h_prev + drive_gate)
//   cand = relu(drive_cand + cand_state * h_prev)
Tensor ligru_step(const ConvLiGRUCell& cell, const Tensor& h_prev,
                  const InputDrive& drive);

Tensor gru_step(const ConvGRUCell& cell, const Tensor& h_prev, const Tensor& h0);

Tensor recall_step(const RecallCell& cell, const Tensor& h_prev, const Tensor& h0);

// Trainable parameter counts (BN running stats excluded).
std::size_t cell_param_count(const ConvLiGRUCell& cell);
std::size_t cell_param_count(const ConvGRUCell& cell);
std::size_t cell_param_count(const RecallCell& cell);

}  // namespace dtnet
