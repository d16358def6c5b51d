#include "dtnet/act.hpp"

#include <string>

#include "dtnet/errors.hpp"

namespace dtnet {

void ActConfig::validate() const {
  if (tau < 0.0) throw ConfigError("act tau must be >= 0");
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw ConfigError("act epsilon must be in (0,1)");
  }
  if (t_max < 1) throw ConfigError("act t_max must be >= 1");
}

Tensor halting_score(const HaltingHead& head, const Tensor& h_t) {
  // [N,C,H,W] -> [N,1,H',W'] -> [N,1] -> sigmoid; reported as [N].
  return sigmoid(global_avg_pool(conv2d(h_t, head.conv)));
}

std::vector<Tensor> act_weights(const std::vector<Tensor>& p,
                                const std::vector<int>& halt_step) {
  if (p.empty()) throw ContractError("act_weights: no halting scores");
  const int t_len = static_cast<int>(p.size());
  const int n = static_cast<int>(p[0].numel());
  if (static_cast<int>(halt_step.size()) != n) {
    throw ShapeError("act_weights: halt_step size mismatch");
  }

  std::vector<Tensor> weights;
  weights.reserve(p.size());
  bool any_grad = false;
  for (const auto& pt : p) any_grad = any_grad || pt.requires_grad();

  // Left-to-right construction; the halting step gets 1 minus the running
  // sum so each sample's weights total exactly 1.
  std::vector<double> cum(static_cast<std::size_t>(n), 0.0);
  for (int t = 0; t < t_len; ++t) {
    Tensor w = Tensor::zeros({n});
    double* wd = w.data();
    const double* pd = p[static_cast<std::size_t>(t)].data();
    for (int i = 0; i < n; ++i) {
      const int halt = halt_step[static_cast<std::size_t>(i)];
      if (t + 1 < halt) {
        wd[i] = pd[i];
        cum[static_cast<std::size_t>(i)] += pd[i];
      } else if (t + 1 == halt) {
        wd[i] = 1.0 - cum[static_cast<std::size_t>(i)];
      }
    }
    weights.push_back(w);
  }

  Tape* tape = Tape::current();
  if (tape && any_grad) {
    for (auto& w : weights) w.set_requires_grad(true);
    std::vector<Tensor> p_c = p, w_c = weights;
    tape->record([p_c, w_c, halt_step, t_len, n]() mutable {
      // dL/dp_t[i] = dL/dw_t[i] - dL/dw_{N}[i] for t < N; the score at the
      // halting step itself only gates the discrete stop decision.
      for (int i = 0; i < n; ++i) {
        const int halt = halt_step[static_cast<std::size_t>(i)];
        const double g_rem = w_c[static_cast<std::size_t>(halt - 1)].grad()[i];
        for (int t = 0; t + 1 < halt && t < t_len; ++t) {
          auto& pt = p_c[static_cast<std::size_t>(t)];
          if (pt.requires_grad()) {
            pt.grad()[i] += w_c[static_cast<std::size_t>(t)].grad()[i] - g_rem;
          }
        }
      }
    });
  }
  return weights;
}

Tensor act_remainder(const std::vector<Tensor>& weights,
                     const std::vector<int>& halt_step) {
  const int n = static_cast<int>(halt_step.size());
  Tensor r = Tensor::zeros({n});
  double* rd = r.data();
  for (int i = 0; i < n; ++i) {
    rd[i] = weights[static_cast<std::size_t>(halt_step[static_cast<std::size_t>(i)] - 1)]
                .data()[i];
  }
  bool any_grad = false;
  for (const auto& w : weights) any_grad = any_grad || w.requires_grad();
  Tape* tape = Tape::current();
  if (tape && any_grad) {
    r.set_requires_grad(true);
    std::vector<Tensor> w_c = weights;
    Tensor r_c = r;
    tape->record([w_c, r_c, halt_step, n]() mutable {
      for (int i = 0; i < n; ++i) {
        auto& w = w_c[static_cast<std::size_t>(halt_step[static_cast<std::size_t>(i)] - 1)];
        if (w.requires_grad()) w.grad()[i] += r_c.grad()[i];
      }
    });
  }
  return r;
}

ActOutputs act_run(DeepThinkNet& net, const Tensor& x, const ActConfig& cfg) {
  cfg.validate();
  if (!net.halting()) {
    throw ContractError("act_run: net was built without a halting head");
  }
  const int n = x.dim(0);
  const double threshold = 1.0 - cfg.epsilon;

  ActOutputs out;
  out.state.halt_step.assign(static_cast<std::size_t>(n), 0);

  Tensor h0 = net.input_transform(x);
  InputDrive drive;
  if (auto* cell = net.ligru()) drive = precompute_input_drive(*cell, h0);

  std::vector<Tensor> hidden;
  std::vector<double> cum(static_cast<std::size_t>(n), 0.0);
  int halted = 0;

  Tensor h = h0;
  for (int t = 1; t <= cfg.t_max && halted < n; ++t) {
    if (auto* cell = net.ligru()) {
      h = ligru_step(*cell, h, drive);
    } else if (auto* cell = net.gru()) {
      h = gru_step(*cell, h, h0);
    } else if (auto* cell = net.recall()) {
      h = recall_step(*cell, h, h0);
    } else {
      throw ContractError("act_run: feedforward nets have no recurrent state");
    }
    hidden.push_back(h);
    Tensor p_t = halting_score(*net.halting(), h);
    out.state.p.push_back(p_t);
    const double* pd = p_t.data();
    for (int i = 0; i < n; ++i) {
      if (out.state.halt_step[static_cast<std::size_t>(i)] != 0) continue;
      cum[static_cast<std::size_t>(i)] += pd[i];
      if (cum[static_cast<std::size_t>(i)] >= threshold || t == cfg.t_max) {
        out.state.halt_step[static_cast<std::size_t>(i)] = t;
        ++halted;
      }
    }
  }
  out.state.steps_run = static_cast<int>(hidden.size());

  out.state.weights = act_weights(out.state.p, out.state.halt_step);
  out.state.remainder.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int halt = out.state.halt_step[static_cast<std::size_t>(i)];
    out.state.remainder[static_cast<std::size_t>(i)] =
        out.state.weights[static_cast<std::size_t>(halt - 1)].data()[i];
  }

  Tensor final_hidden = scale_rows(hidden[0], out.state.weights[0]);
  for (int t = 1; t < out.state.steps_run; ++t) {
    final_hidden = add(final_hidden,
                       scale_rows(hidden[static_cast<std::size_t>(t)],
                                  out.state.weights[static_cast<std::size_t>(t)]));
  }
  out.final_hidden = final_hidden;
  out.logits_main = net.head_main_logits(final_hidden);
  out.logits_aux = net.head_aux_logits(final_hidden);
  return out;
}

Tensor act_loss(const Tensor& task_loss, const ActState& state,
                const ActConfig& cfg) {
  const int n = static_cast<int>(state.halt_step.size());
  if (n == 0) throw ContractError("act_loss: empty state");
  double mean_halt = 0.0;
  for (int step : state.halt_step) mean_halt += step;
  mean_halt /= n;
  // ponder = mean(N + R); N is constant, R differentiable through the weights.
  Tensor rem = act_remainder(state.weights, state.halt_step);
  Tensor ponder = add_scalar(mul_scalar(sum(rem), 1.0 / n), mean_halt);
  return add(task_loss, mul_scalar(ponder, cfg.tau));
}

}  // namespace dtnet
