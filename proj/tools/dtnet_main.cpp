#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dtnet/config.hpp"
#include "dtnet/data.hpp"
#include "dtnet/diagnostics.hpp"
#include "dtnet/errors.hpp"
#include "dtnet/halt_estimator.hpp"
#include "dtnet/runner.hpp"
#include "dtnet/trainer.hpp"

namespace fs = std::filesystem;
using dtnet::RunConfig;

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool has_out = false;
  bool has_seed = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "flat key = value config file")
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", args.overrides, "override a config key (key=value)");
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--seed", args.seed, "run seed");
}

RunConfig resolve_config(const CLI::App* cmd, const CommonArgs& args) {
  RunConfig cfg;
  if (!args.config_path.empty()) cfg = dtnet::parse_config_file(args.config_path);
  for (const auto& o : args.overrides) dtnet::apply_override(cfg, o);
  if (cmd->count("--seed") > 0) cfg.seed = args.seed;
  if (cmd->count("--out") > 0) cfg.output_dir = args.out_dir;
  return cfg;
}

void write_manifest(const fs::path& dir, const RunConfig& cfg,
                    std::vector<std::string> artifacts) {
  std::sort(artifacts.begin(), artifacts.end());
  nlohmann::json j;
  j["config_hash"] = dtnet::config_hash(cfg);
  j["artifacts"] = artifacts;
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  out << j.dump(2) << "\n";
}

dtnet::CorruptionSpec corruption_of(const RunConfig& cfg) {
  dtnet::CorruptionSpec spec;
  spec.severity = cfg.severity;
  spec.sigma = cfg.sigma_noise;
  return spec;
}

dtnet::EvalOptions eval_options_of(const RunConfig& cfg) {
  dtnet::EvalOptions opts;
  opts.t_steps = cfg.t_test;
  opts.batch_size = cfg.batch_size;
  opts.corruption = corruption_of(cfg);
  opts.seed = cfg.seed;
  opts.workers = cfg.workers;
  return opts;
}

int cmd_train(const RunConfig& cfg) {
  cfg.validate(true);
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);

  dtnet::Dataset data = dtnet::load_dataset(cfg);
  dtnet::Rng rng(cfg.seed);
  dtnet::DeepThinkNet net(cfg.net_config(), rng);
  dtnet::Adam::Hyper hyper;
  hyper.lr = cfg.lr;
  hyper.weight_decay = cfg.weight_decay;
  dtnet::Adam adam(net.parameters(), hyper);

  dtnet::TrainOptions opts;
  opts.epochs = cfg.epochs;
  opts.batch_size = cfg.batch_size;
  opts.train_fraction = cfg.train_fraction;
  opts.adam = hyper;
  opts.corruption = corruption_of(cfg);
  opts.seed = cfg.seed;
  opts.stop_at_train_acc = cfg.stop_at_train_acc;
  if (cfg.act) {
    dtnet::ActConfig ac;
    ac.tau = cfg.tau;
    ac.epsilon = cfg.epsilon_act;
    ac.t_max = cfg.t_train;
    opts.act = ac;
  }

  dtnet::TrainResult result = dtnet::train(net, adam, data, opts, rng);
  dtnet::write_metrics_csv((dir / "metrics.csv").string(), result.metrics);
  dtnet::save_checkpoint((dir / "checkpoint.dtck").string(), net, &adam, rng,
                         result.epochs_run);
  write_manifest(dir, cfg, {"metrics.csv", "checkpoint.dtck"});

  if (!result.metrics.empty()) {
    for (auto it = result.metrics.rbegin(); it != result.metrics.rend(); ++it) {
      if (it->split == "train") {
        std::printf("trained %d epochs: train loss %.4f/%.4f acc %.4f/%.4f\n",
                    result.epochs_run, it->loss_main, it->loss_aux, it->acc_main,
                    it->acc_aux);
        break;
      }
    }
  } else {
    std::printf("trained 0 epochs: wrote the initialization checkpoint\n");
  }
  return 0;
}

int cmd_estimate(const RunConfig& cfg, const std::string& ckpt_path) {
  cfg.validate(true, /*for_training=*/false);
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);

  dtnet::LoadedCheckpoint ckpt = dtnet::load_checkpoint(ckpt_path);
  dtnet::Dataset data = dtnet::load_dataset(cfg);
  dtnet::EvalOptions opts = eval_options_of(cfg);

  dtnet::IterationCurve curve = dtnet::estimate_curve(*ckpt.net, data, opts);
  dtnet::TOptReport report = dtnet::build_report(curve);
  dtnet::write_curve_csv((dir / "curve.csv").string(), report.acc_aux,
                         report.acc_main.empty() ? nullptr : &report.acc_main);
  write_manifest(dir, cfg, {"curve.csv"});

  std::printf("t_opt = %d\n", report.t_opt);
  std::printf("estimated accuracy = %.17g\n", report.acc_main_at_topt);
  std::printf("max accuracy = %.17g\n", report.acc_main_max);
  std::printf("gap = %.17g\n", report.gap);
  if (report.aux_main_correlation) {
    std::printf("aux/main correlation = %.6f\n", *report.aux_main_correlation);
  } else {
    std::printf("aux/main correlation = undefined (constant accuracy curve)\n");
  }
  return 0;
}

int cmd_act_eval(const RunConfig& cfg, const std::string& ckpt_path) {
  cfg.validate(true, /*for_training=*/false);
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);

  dtnet::LoadedCheckpoint ckpt = dtnet::load_checkpoint(ckpt_path);
  if (!ckpt.net->halting()) {
    throw dtnet::ConfigError("checkpoint has no halting head; train with act = true");
  }
  dtnet::Dataset data = dtnet::load_dataset(cfg);
  dtnet::EvalOptions opts = eval_options_of(cfg);
  dtnet::ActConfig ac;
  ac.tau = cfg.tau;
  ac.epsilon = cfg.epsilon_act;
  ac.t_max = cfg.t_test;

  dtnet::ActEvalResult r = dtnet::act_evaluate(*ckpt.net, data, ac, opts);

  {
    std::ofstream out(dir / "act_halts.csv", std::ios::trunc);
    out << "sample,halt_step,remainder\n";
    char buf[96];
    for (std::size_t i = 0; i < r.halt_step.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%zu,%d,%.17g\n", i, r.halt_step[i], r.remainder[i]);
      out << buf;
    }
  }
  {
    std::map<int, std::int64_t> hist;
    for (int h : r.halt_step) ++hist[h];
    std::ofstream out(dir / "act_hist.csv", std::ios::trunc);
    out << "halt_step,count\n";
    for (const auto& [step, count] : hist) out << step << "," << count << "\n";
  }
  write_manifest(dir, cfg, {"act_halts.csv", "act_hist.csv"});

  std::printf("samples = %zu\n", r.halt_step.size());
  std::printf("mean halt step = %.17g\n", r.mean_halt);
  std::printf("var halt step = %.17g\n", r.var_halt);
  std::printf("accuracy main = %.17g\n", r.acc_main);
  std::printf("accuracy aux = %.17g\n", r.acc_aux);
  return 0;
}

int cmd_diagnose(const RunConfig& cfg, const std::string& ckpt_path) {
  cfg.validate(true, /*for_training=*/false);
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);

  dtnet::LoadedCheckpoint ckpt = dtnet::load_checkpoint(ckpt_path);
  ckpt.net->set_train(false);
  dtnet::Dataset data = dtnet::load_dataset(cfg);
  dtnet::EvalOptions opts = eval_options_of(cfg);

  const int count = std::min(cfg.batch_size, data.size());
  dtnet::ImageBatch batch = dtnet::eval_batch(data, 0, count, opts);
  dtnet::IterationTrace tr = dtnet::trace(*ckpt.net, batch, cfg.t_test);
  dtnet::write_trace_csv((dir / "trace.csv").string(), tr);

  std::vector<std::string> artifacts = {"trace.csv"};

  // Per-sample likelihood dumps for the same batch.
  {
    dtnet::IterationOutputs out = ckpt.net->forward_iterate(batch.pixels, cfg.t_test);
    dtnet::write_likelihood_csv((dir / "likelihood_main.csv").string(),
                                out.logits_main, 8);
    dtnet::write_likelihood_csv((dir / "likelihood_aux.csv").string(),
                                out.logits_aux, 8);
    artifacts.push_back("likelihood_main.csv");
    artifacts.push_back("likelihood_aux.csv");
  }

  std::vector<int> t_list;
  for (int t : {1, cfg.t_test / 4, cfg.t_test / 2, 3 * cfg.t_test / 4, cfg.t_test}) {
    if (t >= 1 && (t_list.empty() || t != t_list.back())) t_list.push_back(t);
  }
  dtnet::ImageBatch first = dtnet::eval_batch(data, 0, 1, opts);
  for (const auto& hm : dtnet::heatmap(*ckpt.net, first, t_list, cfg.t_test)) {
    const std::string name = "heatmap_t" + std::to_string(hm.t) + ".csv";
    dtnet::write_heatmap_csv((dir / name).string(), hm);
    artifacts.push_back(name);
  }
  write_manifest(dir, cfg, artifacts);
  std::printf("wrote trace over %d iterations for a batch of %d\n", cfg.t_test, count);
  return 0;
}

int cmd_corrupt(const RunConfig& cfg) {
  cfg.validate(true);
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);

  dtnet::Dataset data = dtnet::load_dataset(cfg);
  const dtnet::CorruptionSpec spec = corruption_of(cfg);
  dtnet::Dataset out = data;
  const int chunk = 256;
  for (int start = 0; start < data.size(); start += chunk) {
    const int count = std::min(chunk, data.size() - start);
    dtnet::ImageBatch batch = data.batch(start, count);
    batch = dtnet::corrupt(batch, spec, cfg.seed, start);
    const double* px = batch.pixels.data();
    const std::size_t per = batch.pixels.numel() / static_cast<std::size_t>(count);
    for (int i = 0; i < count; ++i) {
      for (std::size_t j = 0; j < per; ++j) {
        const double v = px[static_cast<std::size_t>(i) * per + j];
        out.pixels[(static_cast<std::size_t>(start) + i) * per + j] =
            static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
      }
    }
  }
  dtnet::save_dtc1((dir / "corrupted.dtc1").string(), out);
  write_manifest(dir, cfg, {"corrupted.dtc1"});
  std::printf("wrote %d corrupted samples (sigma = %.17g)\n", out.size(),
              spec.effective_sigma());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deep-thinking recurrent networks: train, estimate the best "
               "test-time iteration, run the ACT baseline, emit diagnostics"};
  app.require_subcommand(1);

  CommonArgs train_args, estimate_args, act_args, diag_args, corrupt_args;
  std::string estimate_ckpt, act_ckpt, diag_ckpt;

  CLI::App* train_cmd = app.add_subcommand("train", "train a model");
  add_common(train_cmd, train_args);

  CLI::App* estimate_cmd =
      app.add_subcommand("estimate", "accuracy-per-iteration curve and t_opt");
  add_common(estimate_cmd, estimate_args);
  estimate_cmd->add_option("--ckpt", estimate_ckpt, "checkpoint file")->required();

  CLI::App* act_cmd = app.add_subcommand("act-eval", "halting statistics under ACT");
  add_common(act_cmd, act_args);
  act_cmd->add_option("--ckpt", act_ckpt, "checkpoint file")->required();

  CLI::App* diag_cmd =
      app.add_subcommand("diagnose", "state-delta trace and norm heatmaps");
  add_common(diag_cmd, diag_args);
  diag_cmd->add_option("--ckpt", diag_ckpt, "checkpoint file")->required();

  CLI::App* corrupt_cmd =
      app.add_subcommand("corrupt", "write a corrupted copy of a dataset");
  add_common(corrupt_cmd, corrupt_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) return cmd_train(resolve_config(train_cmd, train_args));
    if (estimate_cmd->parsed()) {
      return cmd_estimate(resolve_config(estimate_cmd, estimate_args), estimate_ckpt);
    }
    if (act_cmd->parsed()) {
      return cmd_act_eval(resolve_config(act_cmd, act_args), act_ckpt);
    }
    if (diag_cmd->parsed()) {
      return cmd_diagnose(resolve_config(diag_cmd, diag_args), diag_ckpt);
    }
    if (corrupt_cmd->parsed()) return cmd_corrupt(resolve_config(corrupt_cmd, corrupt_args));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
