#include "dtnet/halt_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dtnet/errors.hpp"
#include "dtnet/ops.hpp"

namespace dtnet {

void accumulate_batch(IterationCurve& curve, const IterationOutputs& outputs,
                      const std::vector<int>& aux_labels,
                      const std::vector<int>* main_labels) {
  const int t_len = static_cast<int>(outputs.logits_aux.size());
  if (t_len != curve.t_len()) {
    throw ShapeError("accumulate_batch: outputs cover " + std::to_string(t_len) +
                     " iterations but curve has " + std::to_string(curve.t_len()));
  }
  if (t_len == 0) return;
  const int n = outputs.logits_aux[0].dim(0);
  if (static_cast<int>(aux_labels.size()) != n ||
      (main_labels && static_cast<int>(main_labels->size()) != n)) {
    throw ShapeError("accumulate_batch: label count does not match batch size");
  }
  for (int t = 0; t < t_len; ++t) {
    const auto pred_aux = argmax_rows(outputs.logits_aux[static_cast<std::size_t>(t)]);
    for (int i = 0; i < n; ++i) {
      if (pred_aux[static_cast<std::size_t>(i)] == aux_labels[static_cast<std::size_t>(i)]) {
        ++curve.correct_aux[static_cast<std::size_t>(t)];
      }
    }
    if (main_labels) {
      const auto pred_main = argmax_rows(outputs.logits_main[static_cast<std::size_t>(t)]);
      for (int i = 0; i < n; ++i) {
        if (pred_main[static_cast<std::size_t>(i)] ==
            (*main_labels)[static_cast<std::size_t>(i)]) {
          ++curve.correct_main[static_cast<std::size_t>(t)];
        }
      }
    }
  }
  curve.total += n;
  if (main_labels) curve.has_main = true;
}

void merge(IterationCurve& into, const IterationCurve& other) {
  if (into.t_len() != other.t_len()) {
    throw ShapeError("merge: curve lengths differ");
  }
  for (int t = 0; t < into.t_len(); ++t) {
    into.correct_aux[static_cast<std::size_t>(t)] += other.correct_aux[static_cast<std::size_t>(t)];
    into.correct_main[static_cast<std::size_t>(t)] += other.correct_main[static_cast<std::size_t>(t)];
  }
  into.total += other.total;
  into.has_main = into.has_main || other.has_main;
}

std::vector<double> finalize(const std::vector<std::int64_t>& correct,
                             std::int64_t total) {
  if (total <= 0) throw ContractError("finalize: empty test stream");
  std::vector<double> acc(correct.size());
  for (std::size_t t = 0; t < correct.size(); ++t) {
    acc[t] = static_cast<double>(correct[t]) / static_cast<double>(total);
  }
  return acc;
}

int select_t_opt(const std::vector<double>& acc_aux) {
  if (acc_aux.empty()) throw ContractError("select_t_opt: empty accuracy array");
  std::size_t best = 0;
  for (std::size_t t = 1; t < acc_aux.size(); ++t) {
    if (acc_aux[t] > acc_aux[best]) best = t;
  }
  return static_cast<int>(best) + 1;
}

std::optional<double> correlation_diagnostic(const std::vector<double>& a,
                                             const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeError("correlation_diagnostic: length mismatch");
  const std::size_t n = a.size();
  if (n < 2) throw ContractError("correlation_diagnostic: need at least 2 points");
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_a += a[i];
    mean_b += b[i];
  }
  mean_a /= static_cast<double>(n);
  mean_b /= static_cast<double>(n);
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - mean_a;
    const double db = b[i] - mean_b;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  if (var_a == 0.0 || var_b == 0.0) return std::nullopt;
  return cov / std::sqrt(var_a * var_b);
}

TOptReport build_report(const IterationCurve& curve) {
  TOptReport r;
  r.acc_aux = finalize(curve.correct_aux, curve.total);
  r.t_opt = select_t_opt(r.acc_aux);
  if (curve.has_main) {
    r.acc_main = finalize(curve.correct_main, curve.total);
    r.acc_main_at_topt = r.acc_main[static_cast<std::size_t>(r.t_opt - 1)];
    r.acc_main_max = *std::max_element(r.acc_main.begin(), r.acc_main.end());
    r.gap = r.acc_main_max - r.acc_main_at_topt;
    r.aux_main_correlation = correlation_diagnostic(r.acc_aux, r.acc_main);
  }
  return r;
}

}  // namespace dtnet
