#include "dtnet/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "dtnet/act.hpp"
#include "dtnet/data.hpp"
#include "dtnet/errors.hpp"

namespace dtnet {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

int to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const int x = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' needs an integer, got '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' needs a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "' needs true/false, got '" + v + "'");
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return static_cast<std::uint64_t>(x);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' needs an unsigned integer, got '" + v + "'");
  }
}

void set_key(RunConfig& c, const std::string& key, const std::string& value) {
  if (key == "cell_kind") c.cell_kind = value;
  else if (key == "channels") c.channels = to_int(key, value);
  else if (key == "t_train") c.t_train = to_int(key, value);
  else if (key == "t_test") c.t_test = to_int(key, value);
  else if (key == "downsample") c.downsample = value;
  else if (key == "recall_depth") c.recall_depth = to_int(key, value);
  else if (key == "dataset") c.dataset = value;
  else if (key == "dataset_path") c.dataset_path = value;
  else if (key == "num_classes") c.num_classes = to_int(key, value);
  else if (key == "num_samples") c.num_samples = to_int(key, value);
  else if (key == "image_size") c.image_size = to_int(key, value);
  else if (key == "margin") c.margin = to_double(key, value);
  else if (key == "train_fraction") c.train_fraction = to_double(key, value);
  else if (key == "severity") c.severity = to_int(key, value);
  else if (key == "sigma_noise") c.sigma_noise = to_double(key, value);
  else if (key == "epochs") c.epochs = to_int(key, value);
  else if (key == "batch_size") c.batch_size = to_int(key, value);
  else if (key == "lr") c.lr = to_double(key, value);
  else if (key == "weight_decay") c.weight_decay = to_double(key, value);
  else if (key == "stop_at_train_acc") c.stop_at_train_acc = to_double(key, value);
  else if (key == "act") c.act = to_bool(key, value);
  else if (key == "tau") c.tau = to_double(key, value);
  else if (key == "epsilon_act") c.epsilon_act = to_double(key, value);
  else if (key == "seed") c.seed = to_u64(key, value);
  else if (key == "output_dir") c.output_dir = value;
  else if (key == "workers") c.workers = to_int(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line.substr(0, line.find('#')));
    if (stripped.empty()) continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) +
                        " is not 'key = value': " + stripped);
    }
    set_key(cfg, trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
  return cfg;
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override must be key=value, got '" + assignment + "'");
  }
  set_key(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

NetConfig RunConfig::net_config() const {
  NetConfig nc;
  nc.cell_kind = cell_kind_from_string(cell_kind);
  nc.channels = channels;
  nc.t_train = t_train;
  nc.t_test = t_test;
  nc.recall_depth = recall_depth;
  nc.input_channels = 3;
  nc.with_halting = act;
  if (downsample == "none") nc.downsample = Downsample::None;
  else if (downsample == "stride2") nc.downsample = Downsample::Stride2;
  else throw ConfigError("downsample must be none|stride2, got '" + downsample + "'");
  if (dataset == "cifar10") nc.num_classes = 10;
  else if (dataset == "cifar100") nc.num_classes = 100;
  else nc.num_classes = num_classes;
  return nc;
}

void RunConfig::validate(bool needs_dataset, bool for_training) const {
  if (for_training) {
    net_config().validate();
  } else if (t_test < 1) {
    throw ConfigError("t_test must be >= 1");
  }
  if (dataset != "synth" && dataset != "cifar10" && dataset != "cifar100" &&
      dataset != "dtc1") {
    throw ConfigError("dataset must be synth|cifar10|cifar100|dtc1, got '" +
                      dataset + "'");
  }
  if (needs_dataset && dataset != "synth" && dataset_path.empty()) {
    throw ConfigError("config key 'dataset_path' is required for dataset=" + dataset);
  }
  if (sigma_noise < 0.0) (void)sigma_for_severity(severity);
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train_fraction must be in (0,1)");
  }
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (act) {
    ActConfig ac;
    ac.tau = tau;
    ac.epsilon = epsilon_act;
    ac.t_max = t_train;
    ac.validate();
  }
}

std::string canonical_config(const RunConfig& c) {
  std::ostringstream out;
  char buf[64];
  auto num = [&buf](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  out << "act = " << (c.act ? "true" : "false") << "\n";
  out << "batch_size = " << c.batch_size << "\n";
  out << "cell_kind = " << c.cell_kind << "\n";
  out << "channels = " << c.channels << "\n";
  out << "dataset = " << c.dataset << "\n";
  out << "dataset_path = " << c.dataset_path << "\n";
  out << "downsample = " << c.downsample << "\n";
  out << "epochs = " << c.epochs << "\n";
  out << "epsilon_act = " << num(c.epsilon_act) << "\n";
  out << "image_size = " << c.image_size << "\n";
  out << "lr = " << num(c.lr) << "\n";
  out << "margin = " << num(c.margin) << "\n";
  out << "num_classes = " << c.num_classes << "\n";
  out << "num_samples = " << c.num_samples << "\n";
  out << "output_dir = " << c.output_dir << "\n";
  out << "recall_depth = " << c.recall_depth << "\n";
  out << "seed = " << c.seed << "\n";
  out << "severity = " << c.severity << "\n";
  out << "sigma_noise = " << num(c.sigma_noise) << "\n";
  out << "stop_at_train_acc = " << num(c.stop_at_train_acc) << "\n";
  out << "t_test = " << c.t_test << "\n";
  out << "t_train = " << c.t_train << "\n";
  out << "tau = " << num(c.tau) << "\n";
  out << "train_fraction = " << num(c.train_fraction) << "\n";
  out << "weight_decay = " << num(c.weight_decay) << "\n";
  out << "workers = " << c.workers << "\n";
  return out.str();
}

std::string config_hash(const RunConfig& cfg) {
  const std::string s = canonical_config(cfg);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace dtnet
