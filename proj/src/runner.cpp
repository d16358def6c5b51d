#include "dtnet/runner.hpp"

#include <algorithm>
#include <thread>

#include "dtnet/errors.hpp"
#include "dtnet/rng.hpp"

namespace dtnet {

Dataset load_dataset(const RunConfig& cfg) {
  if (cfg.dataset == "synth") {
    SynthSpec spec;
    spec.num_classes = cfg.num_classes;
    spec.num_samples = cfg.num_samples;
    spec.height = cfg.image_size;
    spec.width = cfg.image_size;
    spec.margin = cfg.margin;
    spec.seed = cfg.seed;
    return synth_dataset(spec);
  }
  if (cfg.dataset == "cifar10") {
    return load_cifar_binary(cfg.dataset_path, CifarVariant::Cifar10);
  }
  if (cfg.dataset == "cifar100") {
    return load_cifar_binary(cfg.dataset_path, CifarVariant::Cifar100);
  }
  if (cfg.dataset == "dtc1") {
    return load_dtc1(cfg.dataset_path);
  }
  throw ConfigError("dataset must be synth|cifar10|cifar100|dtc1, got '" +
                    cfg.dataset + "'");
}

ImageBatch eval_batch(const Dataset& data, int start, int count,
                      const EvalOptions& opts) {
  ImageBatch batch = data.batch(start, count);
  const std::uint64_t eval_seed = mix_seed(opts.seed, 0x4556414cULL);
  batch = corrupt(batch, opts.corruption, eval_seed, start);
  batch = rotate_and_label(batch, mix_seed(eval_seed, 0x524bULL), start);
  return batch;
}

IterationCurve estimate_curve(DeepThinkNet& net, const Dataset& data,
                              const EvalOptions& opts) {
  net.set_train(false);
  const int n = data.size();
  if (n == 0) throw ContractError("estimate_curve: empty test stream");
  std::vector<std::pair<int, int>> spans;
  for (int start = 0; start < n; start += opts.batch_size) {
    spans.emplace_back(start, std::min(opts.batch_size, n - start));
  }

  auto run_span = [&](std::size_t lo, std::size_t hi, IterationCurve& curve) {
    for (std::size_t s = lo; s < hi; ++s) {
      ImageBatch batch = eval_batch(data, spans[s].first, spans[s].second, opts);
      IterationOutputs out =
          net.forward_iterate(batch.pixels, opts.t_steps, /*keep_hidden=*/false);
      accumulate_batch(curve, out, batch.labels_aux, &batch.labels_main);
    }
  };

  const int workers = std::max(1, std::min<int>(opts.workers,
                                                static_cast<int>(spans.size())));
  if (workers == 1) {
    IterationCurve curve(opts.t_steps);
    run_span(0, spans.size(), curve);
    return curve;
  }

  // Evaluation forwards are pure in Eval mode, so workers share the net and
  // merge integer counters afterwards; batch order cannot affect the sums.
  std::vector<IterationCurve> parts(static_cast<std::size_t>(workers),
                                    IterationCurve(opts.t_steps));
  std::vector<std::thread> threads;
  const std::size_t per = (spans.size() + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const std::size_t lo = std::min(spans.size(), static_cast<std::size_t>(w) * per);
    const std::size_t hi = std::min(spans.size(), lo + per);
    threads.emplace_back([&, lo, hi, w]() { run_span(lo, hi, parts[static_cast<std::size_t>(w)]); });
  }
  for (auto& t : threads) t.join();
  IterationCurve curve(opts.t_steps);
  for (const auto& part : parts) merge(curve, part);
  return curve;
}

ActEvalResult act_evaluate(DeepThinkNet& net, const Dataset& data,
                           const ActConfig& cfg, const EvalOptions& opts) {
  net.set_train(false);
  const int n = data.size();
  if (n == 0) throw ContractError("act_evaluate: empty test stream");
  ActEvalResult r;
  std::int64_t correct_main = 0, correct_aux = 0;
  for (int start = 0; start < n; start += opts.batch_size) {
    const int count = std::min(opts.batch_size, n - start);
    ImageBatch batch = eval_batch(data, start, count, opts);
    ActOutputs out = act_run(net, batch.pixels, cfg);
    const auto pred_main = argmax_rows(out.logits_main);
    const auto pred_aux = argmax_rows(out.logits_aux);
    for (int i = 0; i < count; ++i) {
      if (pred_main[static_cast<std::size_t>(i)] ==
          batch.labels_main[static_cast<std::size_t>(i)]) ++correct_main;
      if (pred_aux[static_cast<std::size_t>(i)] ==
          batch.labels_aux[static_cast<std::size_t>(i)]) ++correct_aux;
      r.halt_step.push_back(out.state.halt_step[static_cast<std::size_t>(i)]);
      r.remainder.push_back(out.state.remainder[static_cast<std::size_t>(i)]);
    }
  }
  r.acc_main = static_cast<double>(correct_main) / n;
  r.acc_aux = static_cast<double>(correct_aux) / n;
  double mean = 0.0;
  for (int h : r.halt_step) mean += h;
  mean /= n;
  double var = 0.0;
  for (int h : r.halt_step) var += (h - mean) * (h - mean);
  r.mean_halt = mean;
  r.var_halt = n > 1 ? var / (n - 1) : 0.0;
  return r;
}

}  // namespace dtnet
