#include <doctest.h>

#include <algorithm>
#include <vector>

#include "dtnet/errors.hpp"
#include "dtnet/halt_estimator.hpp"
#include "dtnet/runner.hpp"
#include "support/oracles.hpp"
#include "support/util.hpp"

using namespace dtnet;

namespace {

// Fabricates per-iteration outputs whose aux argmax equals `pred[t][i]`.
IterationOutputs outputs_from_predictions(const std::vector<std::vector<int>>& pred_aux,
                                          const std::vector<std::vector<int>>& pred_main,
                                          int k_aux = 4, int k_main = 3) {
  IterationOutputs out;
  const std::size_t t_len = pred_aux.size();
  for (std::size_t t = 0; t < t_len; ++t) {
    const int n = static_cast<int>(pred_aux[t].size());
    Tensor aux = Tensor::zeros({n, k_aux});
    Tensor main = Tensor::zeros({n, k_main});
    for (int i = 0; i < n; ++i) {
      aux.data()[static_cast<std::size_t>(i) * k_aux + pred_aux[t][static_cast<std::size_t>(i)]] = 1.0;
      main.data()[static_cast<std::size_t>(i) * k_main + pred_main[t][static_cast<std::size_t>(i)]] = 1.0;
    }
    out.logits_aux.push_back(aux);
    out.logits_main.push_back(main);
    out.hidden.push_back(Tensor::zeros({n, 1, 1, 1}));
  }
  return out;
}

}  // namespace

TEST_CASE("accumulate_batch counting") {
  SUBCASE("empty batch leaves the curve unchanged") {
    IterationCurve curve(2);
    IterationOutputs out;
    out.logits_aux = {Tensor::zeros({0, 4}), Tensor::zeros({0, 4})};
    out.logits_main = {Tensor::zeros({0, 3}), Tensor::zeros({0, 3})};
    accumulate_batch(curve, out, {});
    CHECK(curve.total == 0);
    CHECK(curve.correct_aux[0] == 0);
  }
  SUBCASE("forced one-hot predictions count every sample at every step") {
    IterationCurve curve(3);
    std::vector<std::vector<int>> aux(3, std::vector<int>{1, 2, 0, 3});
    std::vector<std::vector<int>> main(3, std::vector<int>{0, 0, 0, 0});
    IterationOutputs out = outputs_from_predictions(aux, main);
    accumulate_batch(curve, out, {1, 2, 0, 3});
    for (int t = 0; t < 3; ++t) CHECK(curve.correct_aux[static_cast<std::size_t>(t)] == 4);
    CHECK(curve.total == 4);
    CHECK_FALSE(curve.has_main);
  }
  SUBCASE("random predictions match a brute-force recount") {
    Rng rng(301);
    const int n = 5, t_len = 4;
    std::vector<std::vector<int>> aux(t_len, std::vector<int>(n));
    std::vector<std::vector<int>> main(t_len, std::vector<int>(n));
    for (auto& row : aux) {
      for (auto& v : row) v = static_cast<int>(rng.uniform_int(4));
    }
    for (auto& row : main) {
      for (auto& v : row) v = static_cast<int>(rng.uniform_int(3));
    }
    std::vector<int> aux_labels(n), main_labels(n);
    for (auto& v : aux_labels) v = static_cast<int>(rng.uniform_int(4));
    for (auto& v : main_labels) v = static_cast<int>(rng.uniform_int(3));

    IterationCurve curve(t_len);
    accumulate_batch(curve, outputs_from_predictions(aux, main), aux_labels,
                     &main_labels);
    for (int t = 0; t < t_len; ++t) {
      std::int64_t expect_aux = 0, expect_main = 0;
      for (int i = 0; i < n; ++i) {
        if (aux[t][static_cast<std::size_t>(i)] == aux_labels[static_cast<std::size_t>(i)]) ++expect_aux;
        if (main[t][static_cast<std::size_t>(i)] == main_labels[static_cast<std::size_t>(i)]) ++expect_main;
      }
      CHECK(curve.correct_aux[static_cast<std::size_t>(t)] == expect_aux);
      CHECK(curve.correct_main[static_cast<std::size_t>(t)] == expect_main);
    }
  }
  SUBCASE("length mismatch is rejected") {
    IterationCurve curve(2);
    IterationOutputs out = outputs_from_predictions({{0}}, {{0}});
    CHECK_THROWS_AS(accumulate_batch(curve, out, {0}), ShapeError);
  }
}

TEST_CASE("finalize divides counts by the total") {
  CHECK(finalize({1, 2}, 4) == std::vector<double>{0.25, 0.5});
  CHECK(finalize({7, 7, 7}, 7) == std::vector<double>{1.0, 1.0, 1.0});
  Rng rng(303);
  std::vector<std::int64_t> counts;
  const std::int64_t total = 97;
  for (int i = 0; i < 10; ++i) counts.push_back(static_cast<std::int64_t>(rng.uniform_int(98)));
  const auto acc = finalize(counts, total);
  for (int i = 0; i < 10; ++i) {
    CHECK(acc[static_cast<std::size_t>(i)] ==
          static_cast<double>(counts[static_cast<std::size_t>(i)]) / 97.0);
  }
  CHECK_THROWS_AS(finalize({1}, 0), ContractError);
}

TEST_CASE("select_t_opt argmax with smallest-t ties") {
  CHECK(select_t_opt({0.3, 0.5, 0.4}) == 2);
  CHECK(select_t_opt({0.5, 0.5}) == 1);
  Rng rng(307);
  std::vector<double> acc(100);
  for (auto& v : acc) v = rng.uniform();
  const int t = select_t_opt(acc);
  int best = 0;
  for (int i = 1; i < 100; ++i) {
    if (acc[static_cast<std::size_t>(i)] > acc[static_cast<std::size_t>(best)]) best = i;
  }
  CHECK(t == best + 1);
  CHECK(acc[static_cast<std::size_t>(t - 1)] == *std::max_element(acc.begin(), acc.end()));
}

TEST_CASE("correlation diagnostic") {
  CHECK(*correlation_diagnostic({0.1, 0.4, 0.7}, {0.1, 0.4, 0.7}) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(*correlation_diagnostic({0.1, 0.2, 0.3}, {0.3, 0.2, 0.1}) ==
        doctest::Approx(-1.0).epsilon(1e-12));
  CHECK_FALSE(correlation_diagnostic({0.5, 0.5, 0.5}, {0.1, 0.2, 0.3}).has_value());
  Rng rng(311);
  std::vector<double> a(12), b(12);
  for (std::size_t i = 0; i < 12; ++i) {
    a[i] = rng.uniform();
    b[i] = rng.uniform();
  }
  CHECK(*correlation_diagnostic(a, b) ==
        doctest::Approx(oracle::pearson_naive(a, b)).epsilon(1e-12));
}

TEST_CASE("curves merge exactly regardless of stream order") {
  Rng rng(313);
  const int t_len = 3;
  std::vector<IterationOutputs> batches;
  std::vector<std::vector<int>> aux_labels;
  for (int bi = 0; bi < 4; ++bi) {
    const int n = 2 + bi;
    std::vector<std::vector<int>> aux(t_len, std::vector<int>(n));
    std::vector<std::vector<int>> main(t_len, std::vector<int>(n));
    for (auto& row : aux) {
      for (auto& v : row) v = static_cast<int>(rng.uniform_int(4));
    }
    for (auto& row : main) {
      for (auto& v : row) v = static_cast<int>(rng.uniform_int(3));
    }
    batches.push_back(outputs_from_predictions(aux, main));
    std::vector<int> labels(n);
    for (auto& v : labels) v = static_cast<int>(rng.uniform_int(4));
    aux_labels.push_back(labels);
  }

  IterationCurve forward(t_len), reverse(t_len);
  for (int i = 0; i < 4; ++i) accumulate_batch(forward, batches[static_cast<std::size_t>(i)], aux_labels[static_cast<std::size_t>(i)]);
  for (int i = 3; i >= 0; --i) accumulate_batch(reverse, batches[static_cast<std::size_t>(i)], aux_labels[static_cast<std::size_t>(i)]);
  CHECK(forward.correct_aux == reverse.correct_aux);
  CHECK(forward.total == reverse.total);

  // worker-style partial curves merge to the same result
  IterationCurve left(t_len), right(t_len), merged(t_len);
  accumulate_batch(left, batches[0], aux_labels[0]);
  accumulate_batch(left, batches[1], aux_labels[1]);
  accumulate_batch(right, batches[2], aux_labels[2]);
  accumulate_batch(right, batches[3], aux_labels[3]);
  merge(merged, left);
  merge(merged, right);
  CHECK(merged.correct_aux == forward.correct_aux);
  CHECK(merged.total == forward.total);
}

TEST_CASE("parallel workers reproduce the single-worker curve") {
  RunConfig cfg;
  cfg.channels = 4;
  cfg.t_train = 2;
  cfg.t_test = 5;
  cfg.num_samples = 50;
  cfg.image_size = 8;
  cfg.seed = 21;
  Dataset data = load_dataset(cfg);
  Rng rng(21);
  DeepThinkNet net(cfg.net_config(), rng);

  EvalOptions opts;
  opts.t_steps = 5;
  opts.batch_size = 8;  // uneven final batch on purpose
  opts.corruption.severity = 2;
  opts.seed = 3;
  opts.workers = 1;
  IterationCurve serial = estimate_curve(net, data, opts);
  opts.workers = 3;
  IterationCurve parallel = estimate_curve(net, data, opts);
  CHECK(serial.correct_aux == parallel.correct_aux);
  CHECK(serial.correct_main == parallel.correct_main);
  CHECK(serial.total == parallel.total);
  CHECK(serial.total == 50);
}

TEST_CASE("report: estimate never beats the oracle optimum") {
  SUBCASE("random curves keep the gap non-negative") {
    Rng rng(317);
    for (int trial = 0; trial < 20; ++trial) {
      IterationCurve curve(6);
      curve.total = 50;
      curve.has_main = true;
      for (int t = 0; t < 6; ++t) {
        curve.correct_aux[static_cast<std::size_t>(t)] = static_cast<std::int64_t>(rng.uniform_int(51));
        curve.correct_main[static_cast<std::size_t>(t)] = static_cast<std::int64_t>(rng.uniform_int(51));
      }
      TOptReport r = build_report(curve);
      CHECK(r.gap >= 0.0);
      CHECK(r.acc_main_at_topt <= r.acc_main_max);
      CHECK(r.t_opt >= 1);
      CHECK(r.t_opt <= 6);
    }
  }
  SUBCASE("aligned unimodal curves close the gap exactly") {
    IterationCurve curve(5);
    curve.total = 10;
    curve.has_main = true;
    curve.correct_aux = {2, 5, 8, 6, 3};
    curve.correct_main = {1, 4, 9, 5, 2};
    TOptReport r = build_report(curve);
    CHECK(r.t_opt == 3);
    CHECK(r.gap == 0.0);
    CHECK(r.acc_main_at_topt == 0.9);
  }
  SUBCASE("forced curve (0.3, 0.5, 0.4) selects t = 2") {
    IterationCurve curve(3);
    curve.total = 10;
    curve.has_main = true;
    curve.correct_aux = {3, 5, 4};
    curve.correct_main = {4, 7, 6};
    TOptReport r = build_report(curve);
    CHECK(r.t_opt == 2);
    CHECK(r.acc_main_at_topt == 0.7);
  }
}
