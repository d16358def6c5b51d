#include "dtnet/cells.hpp"

#include <string>

#include "dtnet/errors.hpp"

namespace dtnet {

namespace {

void require_state_shape(const Tensor& h, int channels, const char* op) {
  if (h.ndim() != 4 || h.dim(1) != channels) {
    throw ShapeError(std::string(op) + ": state must be [N," +
                     std::to_string(channels) + ",H,W]");
  }
}

}  // namespace

ConvLiGRUCell make_ligru_cell(int channels, Rng& rng) {
  ConvLiGRUCell c;
  c.channels = channels;
  c.gate_state = make_conv_glorot(channels, channels, 3, 1, 1, false, rng);
  c.gate_input = make_conv_glorot(channels, channels, 3, 1, 1, false, rng);
  c.cand_state = make_conv_he(channels, channels, 3, 1, 1, false, rng);
  c.cand_input = make_conv_he(channels, channels, 3, 1, 1, false, rng);
  c.bn_gate = make_batchnorm(channels);
  c.bn_cand = make_batchnorm(channels);
  return c;
}

ConvGRUCell make_gru_cell(int channels, Rng& rng) {
  ConvGRUCell c;
  c.channels = channels;
  c.reset_state = make_conv_glorot(channels, channels, 3, 1, 1, false, rng);
  c.reset_input = make_conv_glorot(channels, channels, 3, 1, 1, false, rng);
  c.update_state = make_conv_glorot(channels, channels, 3, 1, 1, false, rng);
  c.update_input = make_conv_glorot(channels, channels, 3, 1, 1, false, rng);
  c.cand_state = make_conv_glorot(channels, channels, 3, 1, 1, false, rng);
  c.cand_input = make_conv_glorot(channels, channels, 3, 1, 1, false, rng);
  return c;
}

RecallCell make_recall_cell(int channels, int depth, Rng& rng) {
  if (depth < 1) throw ConfigError("recall cell depth must be >= 1");
  RecallCell c;
  c.channels = channels;
  c.layers.push_back(make_conv_he(channels, 2 * channels, 3, 1, 1, false, rng));
  for (int i = 1; i < depth; ++i) {
    c.layers.push_back(make_conv_he(channels, channels, 3, 1, 1, false, rng));
  }
  return c;
}

void set_cell_mode(ConvLiGRUCell& cell, BnMode mode) {
  cell.bn_gate.mode = mode;
  cell.bn_cand.mode = mode;
}

InputDrive precompute_input_drive(ConvLiGRUCell& cell, const Tensor& h0) {
  require_state_shape(h0, cell.channels, "precompute_input_drive");
  InputDrive d;
  d.drive_gate = batchnorm(conv2d(h0, cell.gate_input), cell.bn_gate);
  d.drive_cand = batchnorm(conv2d(h0, cell.cand_input), cell.bn_cand);
  return d;
}

Tensor ligru_step(const ConvLiGRUCell& cell, const Tensor& h_prev,
                  const InputDrive& drive) {
  require_state_shape(h_prev, cell.channels, "ligru_step");
  if (!drive.drive_gate.defined() || !drive.drive_cand.defined() ||
      drive.drive_gate.shape() != h_prev.shape()) {
    throw ShapeError("ligru_step: drive shape does not match state shape");
  }
  Tensor z = sigmoid(add(conv2d(h_prev, cell.gate_state), drive.drive_gate));
  Tensor cand = relu(add(drive.drive_cand, conv2d(h_prev, cell.cand_state)));
  // Literal convex combination: saturated gates hand over exactly.
  Tensor carry = add_scalar(mul_scalar(z, -1.0), 1.0);
  return add(mul(z, cand), mul(carry, h_prev));
}

Tensor gru_step(const ConvGRUCell& cell, const Tensor& h_prev, const Tensor& h0) {
  require_state_shape(h_prev, cell.channels, "gru_step");
  require_state_shape(h0, cell.channels, "gru_step h0");
  Tensor r = sigmoid(add(conv2d(h_prev, cell.reset_state), conv2d(h0, cell.reset_input)));
  Tensor z = sigmoid(add(conv2d(h_prev, cell.update_state), conv2d(h0, cell.update_input)));
  Tensor cand = tanh(add(conv2d(mul(r, h_prev), cell.cand_state), conv2d(h0, cell.cand_input)));
  Tensor carry = add_scalar(mul_scalar(z, -1.0), 1.0);
  return add(mul(z, cand), mul(carry, h_prev));
}

Tensor recall_step(const RecallCell& cell, const Tensor& h_prev, const Tensor& h0) {
  require_state_shape(h_prev, cell.channels, "recall_step");
  require_state_shape(h0, cell.channels, "recall_step h0");
  Tensor h = concat_channels(h_prev, h0);
  for (const auto& layer : cell.layers) h = relu(conv2d(h, layer));
  return h;
}

std::size_t cell_param_count(const ConvLiGRUCell& cell) {
  return cell.gate_state.weight.numel() + cell.gate_input.weight.numel() +
         cell.cand_state.weight.numel() + cell.cand_input.weight.numel() +
         cell.bn_gate.gamma.numel() + cell.bn_gate.beta.numel() +
         cell.bn_cand.gamma.numel() + cell.bn_cand.beta.numel();
}

std::size_t cell_param_count(const ConvGRUCell& cell) {
  return cell.reset_state.weight.numel() + cell.reset_input.weight.numel() +
         cell.update_state.weight.numel() + cell.update_input.weight.numel() +
         cell.cand_state.weight.numel() + cell.cand_input.weight.numel();
}

std::size_t cell_param_count(const RecallCell& cell) {
  std::size_t n = 0;
  for (const auto& layer : cell.layers) n += layer.weight.numel();
  return n;
}

}  // namespace dtnet
