#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dtnet/network.hpp"

namespace dtnet {

// Per-iteration correct-prediction counters over a test stream. Counters are
// plain integers, so partial curves from parallel workers merge exactly by
// elementwise addition in any order.
struct IterationCurve {
  std::vector<std::int64_t> correct_aux;
  std::vector<std::int64_t> correct_main;
  std::int64_t total = 0;
  bool has_main = false;

  explicit IterationCurve(int t_len = 0)
      : correct_aux(static_cast<std::size_t>(t_len), 0),
        correct_main(static_cast<std::size_t>(t_len), 0) {}

  int t_len() const { return static_cast<int>(correct_aux.size()); }
};

struct TOptReport {
  int t_opt = 1;                  // 1-based
  std::vector<double> acc_aux;
  std::vector<double> acc_main;   // empty when main labels were absent
  double acc_main_at_topt = 0.0;  // estimated optimum
  double acc_main_max = 0.0;      // oracle optimum (needs main labels)
  double gap = 0.0;               // oracle minus estimate, >= 0
  std::optional<double> aux_main_correlation;
};

// Adds one batch's per-iteration argmax hits to the curve. Main-task labels
// are optional and only feed the reporting columns, never the selection.
void accumulate_batch(IterationCurve& curve, const IterationOutputs& outputs,
                      const std::vector<int>& aux_labels,
                      const std::vector<int>* main_labels = nullptr);

void merge(IterationCurve& into, const IterationCurve& other);

// correct[t] / total per iteration.
std::vector<double> finalize(const std::vector<std::int64_t>& correct,
                             std::int64_t total);

// 1-based argmax; ties resolve to the smallest index (cheapest compute).
int select_t_opt(const std::vector<double>& acc_aux);

// Sample Pearson correlation; empty when either input is constant.
std::optional<double> correlation_diagnostic(const std::vector<double>& a,
                                             const std::vector<double>& b);

TOptReport build_report(const IterationCurve& curve);

}  // namespace dtnet
