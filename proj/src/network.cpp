#include "dtnet/network.hpp"

#include <string>

#include "dtnet/errors.hpp"

namespace dtnet {

CellKind cell_kind_from_string(const std::string& s) {
  if (s == "ligru") return CellKind::LiGRU;
  if (s == "gru") return CellKind::GRU;
  if (s == "recall") return CellKind::Recall;
  if (s == "feedforward") return CellKind::FeedForward;
  throw ConfigError("unknown cell_kind '" + s +
                    "' (expected ligru|gru|recall|feedforward)");
}

std::string to_string(CellKind kind) {
  switch (kind) {
    case CellKind::LiGRU: return "ligru";
    case CellKind::GRU: return "gru";
    case CellKind::Recall: return "recall";
    case CellKind::FeedForward: return "feedforward";
  }
  return "?";
}

void NetConfig::validate() const {
  if (channels < 1) throw ConfigError("channels must be >= 1");
  if (t_train < 1) throw ConfigError("t_train must be >= 1");
  if (t_test < t_train) throw ConfigError("t_test must be >= t_train");
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (input_channels < 1) throw ConfigError("input_channels must be >= 1");
  if (recall_depth < 1) throw ConfigError("recall_depth must be >= 1");
}

namespace {

AffineHead make_head(int out, int channels, Rng& rng) {
  AffineHead h;
  h.weight = Tensor::zeros({out, channels}, true);
  fill_glorot_uniform(h.weight, channels, out, rng);
  h.bias = Tensor::zeros({out}, true);
  return h;
}

void add_conv(std::vector<NamedTensor>& out, const std::string& name,
              const ConvParams& conv) {
  out.push_back({name + ".weight", conv.weight});
  if (conv.bias.defined()) out.push_back({name + ".bias", conv.bias});
}

void add_bn_params(std::vector<NamedTensor>& out, const std::string& name,
                   const BatchNormState& bn) {
  out.push_back({name + ".gamma", bn.gamma});
  out.push_back({name + ".beta", bn.beta});
}

void add_bn_buffers(std::vector<NamedTensor>& out, const std::string& name,
                    const BatchNormState& bn) {
  out.push_back({name + ".running_mean", bn.running_mean});
  out.push_back({name + ".running_var", bn.running_var});
}

}  // namespace

DeepThinkNet::DeepThinkNet(const NetConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  const int c = config_.channels;
  // The stride-2 transform uses a 4x4 kernel so even input sizes halve to an
  // exact integer output size.
  if (config_.downsample == Downsample::Stride2) {
    input_conv_ = make_conv_he(c, config_.input_channels, 4, 2, 1, true, rng);
  } else {
    input_conv_ = make_conv_he(c, config_.input_channels, 3, 1, 1, true, rng);
  }
  switch (config_.cell_kind) {
    case CellKind::LiGRU:
      cell_ = make_ligru_cell(c, rng);
      break;
    case CellKind::GRU:
      cell_ = make_gru_cell(c, rng);
      break;
    case CellKind::Recall:
      cell_ = make_recall_cell(c, config_.recall_depth, rng);
      break;
    case CellKind::FeedForward: {
      // One block per iteration; depth equals t_train.
      std::vector<ResidualBlock> blocks;
      for (int i = 0; i < config_.t_train; ++i) {
        ResidualBlock b;
        b.conv_a = make_conv_he(c, c, 3, 1, 1, false, rng);
        b.conv_b = make_conv_he(c, c, 3, 1, 1, false, rng);
        blocks.push_back(std::move(b));
      }
      cell_ = std::move(blocks);
      break;
    }
  }
  head_main_ = make_head(config_.num_classes, c, rng);
  head_aux_ = make_head(4, c, rng);
  if (config_.with_halting) {
    HaltingHead h;
    h.conv = make_conv_glorot(1, c, 1, 1, 0, true, rng);
    halting_ = std::move(h);
  }
}

void DeepThinkNet::set_train(bool train) {
  const BnMode mode = train ? BnMode::Train : BnMode::Eval;
  if (auto* cell = std::get_if<ConvLiGRUCell>(&cell_)) set_cell_mode(*cell, mode);
}

Tensor DeepThinkNet::input_transform(const Tensor& x) {
  if (x.ndim() != 4 || x.dim(1) != config_.input_channels) {
    throw ShapeError("input_transform: expected [N," +
                     std::to_string(config_.input_channels) + ",H,W]");
  }
  return relu(conv2d(x, input_conv_));
}

Tensor DeepThinkNet::step(const Tensor& h_prev, const Tensor& h0,
                          const InputDrive& drive, int t_index) {
  switch (config_.cell_kind) {
    case CellKind::LiGRU:
      return ligru_step(std::get<ConvLiGRUCell>(cell_), h_prev, drive);
    case CellKind::GRU:
      return gru_step(std::get<ConvGRUCell>(cell_), h_prev, h0);
    case CellKind::Recall:
      return recall_step(std::get<RecallCell>(cell_), h_prev, h0);
    case CellKind::FeedForward: {
      const auto& blocks = std::get<std::vector<ResidualBlock>>(cell_);
      if (t_index >= static_cast<int>(blocks.size())) return h_prev;
      const ResidualBlock& b = blocks[static_cast<std::size_t>(t_index)];
      return add(h_prev, conv2d(relu(conv2d(h_prev, b.conv_a)), b.conv_b));
    }
  }
  throw ContractError("unreachable cell kind");
}

IterationOutputs DeepThinkNet::forward_iterate(const Tensor& x, int t_steps,
                                               bool keep_hidden) {
  if (t_steps < 1) throw ContractError("forward_iterate: t_steps must be >= 1");
  IterationOutputs out;
  out.h0 = input_transform(x);
  InputDrive drive;
  if (auto* cell = std::get_if<ConvLiGRUCell>(&cell_)) {
    drive = precompute_input_drive(*cell, out.h0);
  }
  Tensor h = out.h0;
  for (int t = 0; t < t_steps; ++t) {
    h = step(h, out.h0, drive, t);
    if (keep_hidden) out.hidden.push_back(h);
    out.logits_main.push_back(head_main_logits(h));
    out.logits_aux.push_back(head_aux_logits(h));
  }
  return out;
}

Tensor DeepThinkNet::head_main_logits(const Tensor& h) {
  return linear(global_avg_pool(h), head_main_.weight, head_main_.bias);
}

Tensor DeepThinkNet::head_aux_logits(const Tensor& h) {
  return linear(global_avg_pool(h), head_aux_.weight, head_aux_.bias);
}

Tensor DeepThinkNet::total_loss(const Tensor& x, const std::vector<int>& y_main,
                                const std::vector<int>& y_aux) {
  IterationOutputs out = forward_iterate(x, config_.t_train);
  const std::size_t last = out.logits_main.size() - 1;
  Tensor loss_main = softmax_cross_entropy(out.logits_main[last], y_main);
  Tensor loss_aux = softmax_cross_entropy(out.logits_aux[last], y_aux);
  return add(loss_main, loss_aux);
}

Tensor DeepThinkNet::feedforward_baseline(const Tensor& x, int depth) {
  if (config_.cell_kind != CellKind::FeedForward) {
    throw ContractError("feedforward_baseline requires cell_kind=feedforward");
  }
  const auto& blocks = std::get<std::vector<ResidualBlock>>(cell_);
  if (depth < 0 || depth > static_cast<int>(blocks.size())) {
    throw ConfigError("feedforward_baseline: depth out of range");
  }
  Tensor h = input_transform(x);
  for (int t = 0; t < depth; ++t) {
    const ResidualBlock& b = blocks[static_cast<std::size_t>(t)];
    h = add(h, conv2d(relu(conv2d(h, b.conv_a)), b.conv_b));
  }
  return head_main_logits(h);
}

std::vector<NamedTensor> DeepThinkNet::parameters() {
  std::vector<NamedTensor> out;
  add_conv(out, "input_conv", input_conv_);
  if (auto* cell = std::get_if<ConvLiGRUCell>(&cell_)) {
    add_conv(out, "cell.gate_state", cell->gate_state);
    add_conv(out, "cell.gate_input", cell->gate_input);
    add_conv(out, "cell.cand_state", cell->cand_state);
    add_conv(out, "cell.cand_input", cell->cand_input);
    add_bn_params(out, "cell.bn_gate", cell->bn_gate);
    add_bn_params(out, "cell.bn_cand", cell->bn_cand);
  } else if (auto* gru = std::get_if<ConvGRUCell>(&cell_)) {
    add_conv(out, "cell.reset_state", gru->reset_state);
    add_conv(out, "cell.reset_input", gru->reset_input);
    add_conv(out, "cell.update_state", gru->update_state);
    add_conv(out, "cell.update_input", gru->update_input);
    add_conv(out, "cell.cand_state", gru->cand_state);
    add_conv(out, "cell.cand_input", gru->cand_input);
  } else if (auto* rc = std::get_if<RecallCell>(&cell_)) {
    for (std::size_t i = 0; i < rc->layers.size(); ++i) {
      add_conv(out, "cell.layer" + std::to_string(i), rc->layers[i]);
    }
  } else {
    const auto& blocks = std::get<std::vector<ResidualBlock>>(cell_);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      add_conv(out, "cell.block" + std::to_string(i) + ".conv_a", blocks[i].conv_a);
      add_conv(out, "cell.block" + std::to_string(i) + ".conv_b", blocks[i].conv_b);
    }
  }
  out.push_back({"head_main.weight", head_main_.weight});
  out.push_back({"head_main.bias", head_main_.bias});
  out.push_back({"head_aux.weight", head_aux_.weight});
  out.push_back({"head_aux.bias", head_aux_.bias});
  if (halting_) add_conv(out, "halting", halting_->conv);
  return out;
}

std::vector<NamedTensor> DeepThinkNet::buffers() {
  std::vector<NamedTensor> out;
  if (auto* cell = std::get_if<ConvLiGRUCell>(&cell_)) {
    add_bn_buffers(out, "cell.bn_gate", cell->bn_gate);
    add_bn_buffers(out, "cell.bn_cand", cell->bn_cand);
  }
  return out;
}

std::size_t DeepThinkNet::num_parameters() {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.numel();
  return n;
}

}  // namespace dtnet
