#include "dtnet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dtnet/errors.hpp"
#include "dtnet/halt_estimator.hpp"

namespace dtnet {

Adam::Adam(std::vector<NamedTensor> params, Hyper hyper)
    : params_(std::move(params)), hyper_(hyper) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

void Adam::step() {
  ++step_count_;
  const double bc1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(step_count_));
  const double decay = 1.0 - hyper_.lr * hyper_.weight_decay;
  for (std::size_t pi = 0; pi < params_.size(); ++pi) {
    Tensor& t = params_[pi].tensor;
    const double* g = t.grad();
    if (g == nullptr) {
      throw ContractError("adam_step: parameter '" + params_[pi].name +
                          "' has no gradient buffer");
    }
    double* x = t.data();
    double* m = m_[pi].data();
    double* v = v_[pi].data();
    const std::size_t n = t.numel();
    for (std::size_t i = 0; i < n; ++i) {
      x[i] *= decay;
      m[i] = hyper_.beta1 * m[i] + (1.0 - hyper_.beta1) * g[i];
      v[i] = hyper_.beta2 * v[i] + (1.0 - hyper_.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      x[i] -= hyper_.lr * mhat / (std::sqrt(vhat) + hyper_.eps);
    }
  }
}

std::vector<NamedTensor> Adam::moment_state() {
  std::vector<NamedTensor> out;
  for (std::size_t pi = 0; pi < params_.size(); ++pi) {
    out.push_back({params_[pi].name + ".adam_m",
                   Tensor::from(params_[pi].tensor.shape(), m_[pi])});
    out.push_back({params_[pi].name + ".adam_v",
                   Tensor::from(params_[pi].tensor.shape(), v_[pi])});
  }
  return out;
}

namespace {

int count_correct(const Tensor& logits, const std::vector<int>& labels) {
  const auto pred = argmax_rows(logits);
  int correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (pred[i] == labels[i]) ++correct;
  }
  return correct;
}

struct EpochStats {
  double loss_main = 0.0;
  double loss_aux = 0.0;
  std::int64_t correct_main = 0;
  std::int64_t correct_aux = 0;
  std::int64_t total = 0;

  void add(double lm, double la, int cm, int ca, int n) {
    loss_main += lm * n;
    loss_aux += la * n;
    correct_main += cm;
    correct_aux += ca;
    total += n;
  }

  MetricsRow row(int epoch, const std::string& split) const {
    MetricsRow r;
    r.epoch = epoch;
    r.split = split;
    r.loss_main = loss_main / static_cast<double>(total);
    r.loss_aux = loss_aux / static_cast<double>(total);
    r.acc_main = static_cast<double>(correct_main) / static_cast<double>(total);
    r.acc_aux = static_cast<double>(correct_aux) / static_cast<double>(total);
    return r;
  }
};

}  // namespace

TrainResult train(DeepThinkNet& net, Adam& adam, const Dataset& data,
                  const TrainOptions& opts, Rng& rng) {
  if (opts.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (opts.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  Dataset train_set, val_set;
  split_train_val(data, opts.train_fraction, opts.seed, train_set, val_set);
  if (opts.epochs > 0 && train_set.size() == 0) {
    throw ConfigError("training split is empty; provide more samples");
  }
  const int t_train = net.config().t_train;

  TrainResult result;
  std::vector<int> order(static_cast<std::size_t>(train_set.size()));
  for (int i = 0; i < train_set.size(); ++i) order[static_cast<std::size_t>(i)] = i;

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    for (int i = train_set.size() - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(i) + 1));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }

    net.set_train(true);
    EpochStats stats;
    for (int start = 0; start < train_set.size(); start += opts.batch_size) {
      const int count = std::min(opts.batch_size, train_set.size() - start);
      // Gather the shuffled batch into one contiguous batch tensor.
      ImageBatch batch;
      {
        const std::size_t per = static_cast<std::size_t>(train_set.channels) *
                                train_set.height * train_set.width;
        std::vector<double> vals(static_cast<std::size_t>(count) * per);
        batch.labels_main.resize(static_cast<std::size_t>(count));
        for (int i = 0; i < count; ++i) {
          const int src = order[static_cast<std::size_t>(start + i)];
          const ImageBatch one = train_set.batch(src, 1);
          std::copy_n(one.pixels.data(), per, vals.data() + static_cast<std::size_t>(i) * per);
          batch.labels_main[static_cast<std::size_t>(i)] = one.labels_main[0];
        }
        batch.pixels = Tensor::from(
            {count, train_set.channels, train_set.height, train_set.width},
            std::move(vals));
        batch.labels_aux.assign(static_cast<std::size_t>(count), 0);
      }
      // Augmentation substreams are keyed by (epoch, position in the
      // shuffled epoch), so a fixed seed reproduces the exact stream.
      const std::uint64_t aug_seed = mix_seed(opts.seed, 0x41554731ULL,
                                              static_cast<std::uint64_t>(epoch));
      batch = corrupt(batch, opts.corruption, aug_seed, start);
      batch = rotate_and_label(batch, mix_seed(aug_seed, 0x524bULL), start);

      Tape tape;
      Tensor loss_main, loss_aux, loss;
      int correct_main = 0, correct_aux = 0;
      {
        TapeScope scope(tape);
        if (opts.act) {
          ActConfig cfg = *opts.act;
          cfg.t_max = t_train;
          ActOutputs out = act_run(net, batch.pixels, cfg);
          loss_main = softmax_cross_entropy(out.logits_main, batch.labels_main);
          loss_aux = softmax_cross_entropy(out.logits_aux, batch.labels_aux);
          loss = act_loss(add(loss_main, loss_aux), out.state, cfg);
          correct_main = count_correct(out.logits_main, batch.labels_main);
          correct_aux = count_correct(out.logits_aux, batch.labels_aux);
        } else {
          IterationOutputs out = net.forward_iterate(batch.pixels, t_train);
          const std::size_t last = out.logits_main.size() - 1;
          loss_main = softmax_cross_entropy(out.logits_main[last], batch.labels_main);
          loss_aux = softmax_cross_entropy(out.logits_aux[last], batch.labels_aux);
          loss = add(loss_main, loss_aux);
          correct_main = count_correct(out.logits_main[last], batch.labels_main);
          correct_aux = count_correct(out.logits_aux[last], batch.labels_aux);
        }
      }
      if (!std::isfinite(loss.item())) {
        throw ContractError("training diverged: loss is not finite at epoch " +
                            std::to_string(epoch) + ", batch offset " +
                            std::to_string(start));
      }
      adam.zero_grad();
      tape.backward(loss);
      adam.step();
      stats.add(loss_main.item(), loss_aux.item(), correct_main, correct_aux, count);
    }
    result.metrics.push_back(stats.row(epoch, "train"));

    // Validation pass with epoch-independent augmentation substreams.
    net.set_train(false);
    EpochStats vstats;
    for (int start = 0; start < val_set.size(); start += opts.batch_size) {
      const int count = std::min(opts.batch_size, val_set.size() - start);
      ImageBatch batch = val_set.batch(start, count);
      const std::uint64_t val_seed = mix_seed(opts.seed, 0x56414c31ULL);
      batch = corrupt(batch, opts.corruption, val_seed, start);
      batch = rotate_and_label(batch, mix_seed(val_seed, 0x524bULL), start);
      double lm, la;
      int cm, ca;
      if (opts.act) {
        ActConfig cfg = *opts.act;
        cfg.t_max = t_train;
        ActOutputs out = act_run(net, batch.pixels, cfg);
        lm = softmax_cross_entropy(out.logits_main, batch.labels_main).item();
        la = softmax_cross_entropy(out.logits_aux, batch.labels_aux).item();
        cm = count_correct(out.logits_main, batch.labels_main);
        ca = count_correct(out.logits_aux, batch.labels_aux);
      } else {
        IterationOutputs out = net.forward_iterate(batch.pixels, t_train);
        const std::size_t last = out.logits_main.size() - 1;
        lm = softmax_cross_entropy(out.logits_main[last], batch.labels_main).item();
        la = softmax_cross_entropy(out.logits_aux[last], batch.labels_aux).item();
        cm = count_correct(out.logits_main[last], batch.labels_main);
        ca = count_correct(out.logits_aux[last], batch.labels_aux);
      }
      vstats.add(lm, la, cm, ca, count);
    }
    if (vstats.total > 0) result.metrics.push_back(vstats.row(epoch, "val"));

    result.epochs_run = epoch + 1;
    if (opts.stop_at_train_acc > 0.0) {
      const double acc = static_cast<double>(stats.correct_main) /
                         static_cast<double>(stats.total);
      if (acc >= opts.stop_at_train_acc) break;
    }
  }
  return result;
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out << "epoch,split,loss_main,loss_aux,acc_main,acc_aux\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%s,%.17g,%.17g,%.17g,%.17g\n", r.epoch,
                  r.split.c_str(), r.loss_main, r.loss_aux, r.acc_main, r.acc_aux);
    out << buf;
  }
}

// --- checkpoint format ------------------------------------------------------

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  put_u32(out, static_cast<std::uint32_t>(v & 0xffffffffULL));
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

struct Reader {
  const std::uint8_t* p;
  std::size_t len;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > len) throw FormatError("truncated checkpoint");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = static_cast<std::uint32_t>(p[pos]) |
                      (static_cast<std::uint32_t>(p[pos + 1]) << 8) |
                      (static_cast<std::uint32_t>(p[pos + 2]) << 16) |
                      (static_cast<std::uint32_t>(p[pos + 3]) << 24);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    const std::uint64_t lo = u32();
    return lo | (static_cast<std::uint64_t>(u32()) << 32);
  }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(p + pos), n);
    pos += n;
    return s;
  }
  float f32() {
    need(4);
    std::uint32_t bits = static_cast<std::uint32_t>(p[pos]) |
                         (static_cast<std::uint32_t>(p[pos + 1]) << 8) |
                         (static_cast<std::uint32_t>(p[pos + 2]) << 16) |
                         (static_cast<std::uint32_t>(p[pos + 3]) << 24);
    pos += 4;
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
};

void put_entry(std::string& out, const NamedTensor& nt) {
  put_u32(out, static_cast<std::uint32_t>(nt.name.size()));
  out.append(nt.name);
  put_u32(out, static_cast<std::uint32_t>(nt.tensor.ndim()));
  for (int i = 0; i < nt.tensor.ndim(); ++i) {
    put_u32(out, static_cast<std::uint32_t>(nt.tensor.dim(i)));
  }
  put_u64(out, nt.tensor.numel());
  const double* d = nt.tensor.data();
  for (std::size_t i = 0; i < nt.tensor.numel(); ++i) {
    const float f = static_cast<float>(d[i]);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }
}

}  // namespace

void save_checkpoint(const std::string& path, DeepThinkNet& net, Adam* adam,
                     const Rng& rng, int epoch) {
  std::string out;
  out.append("DTCK");
  put_u32(out, kCheckpointVersion);
  const NetConfig& c = net.config();
  put_u32(out, static_cast<std::uint32_t>(c.cell_kind));
  put_u32(out, static_cast<std::uint32_t>(c.channels));
  put_u32(out, static_cast<std::uint32_t>(c.t_train));
  put_u32(out, static_cast<std::uint32_t>(c.t_test));
  put_u32(out, static_cast<std::uint32_t>(c.num_classes));
  put_u32(out, static_cast<std::uint32_t>(c.downsample));
  put_u32(out, static_cast<std::uint32_t>(c.input_channels));
  put_u32(out, static_cast<std::uint32_t>(c.recall_depth));
  put_u32(out, c.with_halting ? 1 : 0);
  put_u32(out, static_cast<std::uint32_t>(epoch));

  std::ostringstream rng_text;
  rng.save(rng_text);
  const std::string rng_str = rng_text.str();
  put_u32(out, static_cast<std::uint32_t>(rng_str.size()));
  out.append(rng_str);

  put_u32(out, adam ? 1 : 0);
  if (adam) {
    put_u64(out, static_cast<std::uint64_t>(adam->step_count()));
    put_f64(out, adam->hyper().lr);
    put_f64(out, adam->hyper().beta1);
    put_f64(out, adam->hyper().beta2);
    put_f64(out, adam->hyper().eps);
    put_f64(out, adam->hyper().weight_decay);
  }

  std::vector<NamedTensor> entries = net.parameters();
  for (auto& b : net.buffers()) entries.push_back(b);
  if (adam) {
    for (auto& m : adam->moment_state()) entries.push_back(m);
  }
  put_u32(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) put_entry(out, e);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot write '" + path + "'");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw FormatError("short write to '" + path + "'");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
  Reader r{reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()};
  if (r.str(4) != "DTCK") throw FormatError("'" + path + "' is not a checkpoint file");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  NetConfig c;
  c.cell_kind = static_cast<CellKind>(r.u32());
  c.channels = static_cast<int>(r.u32());
  c.t_train = static_cast<int>(r.u32());
  c.t_test = static_cast<int>(r.u32());
  c.num_classes = static_cast<int>(r.u32());
  c.downsample = static_cast<Downsample>(r.u32());
  c.input_channels = static_cast<int>(r.u32());
  c.recall_depth = static_cast<int>(r.u32());
  c.with_halting = r.u32() != 0;
  if (static_cast<int>(c.cell_kind) > 3 || static_cast<int>(c.downsample) > 1) {
    throw FormatError("checkpoint header has invalid enum values");
  }
  const int epoch = static_cast<int>(r.u32());

  const std::uint32_t rng_len = r.u32();
  const std::string rng_str = r.str(rng_len);

  LoadedCheckpoint out;
  out.epoch = epoch;
  std::istringstream rng_in(rng_str);
  out.rng.load(rng_in);

  Rng init_rng(0);  // placeholder init; every tensor is overwritten below
  out.net = std::make_unique<DeepThinkNet>(c, init_rng);

  const bool has_adam = r.u32() != 0;
  Adam::Hyper hyper;
  std::int64_t step_count = 0;
  if (has_adam) {
    step_count = static_cast<std::int64_t>(r.u64());
    hyper.lr = r.f64();
    hyper.beta1 = r.f64();
    hyper.beta2 = r.f64();
    hyper.eps = r.f64();
    hyper.weight_decay = r.f64();
  }

  const std::uint32_t num_entries = r.u32();
  std::vector<NamedTensor> entries;
  entries.reserve(num_entries);
  for (std::uint32_t i = 0; i < num_entries; ++i) {
    const std::uint32_t name_len = r.u32();
    std::string name = r.str(name_len);
    const std::uint32_t ndim = r.u32();
    std::vector<int> shape;
    for (std::uint32_t k = 0; k < ndim; ++k) shape.push_back(static_cast<int>(r.u32()));
    const std::uint64_t count = r.u64();
    std::vector<double> vals(count);
    for (std::uint64_t k = 0; k < count; ++k) vals[k] = static_cast<double>(r.f32());
    entries.push_back({std::move(name), Tensor::from(shape, std::move(vals))});
  }
  if (r.pos != r.len) throw FormatError("trailing bytes in '" + path + "'");

  auto assign = [&](NamedTensor& dst) {
    for (const auto& e : entries) {
      if (e.name == dst.name) {
        if (e.tensor.shape() != dst.tensor.shape()) {
          throw FormatError("checkpoint entry '" + e.name + "' has wrong shape");
        }
        std::copy_n(e.tensor.data(), e.tensor.numel(), dst.tensor.data());
        return true;
      }
    }
    return false;
  };
  for (auto& p : out.net->parameters()) {
    if (!assign(p)) throw FormatError("checkpoint is missing parameter '" + p.name + "'");
  }
  for (auto& b : out.net->buffers()) {
    if (!assign(b)) throw FormatError("checkpoint is missing buffer '" + b.name + "'");
  }

  if (has_adam) {
    out.adam = std::make_unique<Adam>(out.net->parameters(), hyper);
    out.adam->set_step_count(step_count);
    out.adam->restore_moments(entries);
  }
  return out;
}

void Adam::restore_moments(const std::vector<NamedTensor>& entries) {
  for (std::size_t pi = 0; pi < params_.size(); ++pi) {
    const std::string mn = params_[pi].name + ".adam_m";
    const std::string vn = params_[pi].name + ".adam_v";
    for (const auto& e : entries) {
      if (e.name == mn) {
        if (e.tensor.numel() != m_[pi].size()) {
          throw FormatError("adam moment '" + mn + "' has wrong size");
        }
        std::copy_n(e.tensor.data(), e.tensor.numel(), m_[pi].data());
      } else if (e.name == vn) {
        if (e.tensor.numel() != v_[pi].size()) {
          throw FormatError("adam moment '" + vn + "' has wrong size");
        }
        std::copy_n(e.tensor.data(), e.tensor.numel(), v_[pi].data());
      }
    }
  }
}

}  // namespace dtnet
