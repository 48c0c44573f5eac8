// Copyright 2026 The LoRAN Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "loranlab/adapters.hpp"
#include "loranlab/tasks.hpp"
#include "loranlab/tensor.hpp"
#include "json.hpp"

namespace loran {

enum class OptimizerKind { SGD, AdamW };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(std::string_view name);

/// Defaults follow the usual fine-tuning recipe: AdamW, lr 2e-4, 5 epochs, batch 16.
struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::AdamW;
  double lr = 2e-4;
  std::size_t epochs = 5;
  std::size_t batch_size = 16;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  std::size_t eval_every = 1;

  /// lr >= 0 is accepted so that lr = 0 can act as a no-op control run.
  void validate() const;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;
};

/// Decoupled weight decay, bias-corrected moments. State is lazily sized on first use.
void adamw_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
                const TrainConfig& cfg);
void sgd_step(std::span<Tensor* const> params, std::span<const Tensor> grads, const TrainConfig& cfg);

struct RunReport {
  std::string label;
  std::uint64_t seed = 0;
  std::vector<double> epoch_losses;
  /// (epoch index, metric) pairs recorded at the eval cadence.
  std::vector<std::pair<std::size_t, double>> evals;
  std::string metric_name;
  double final_metric = 0.0;
  bool higher_is_better = true;
  bool diverged = false;
  std::optional<std::size_t> diverged_epoch;
  std::size_t trainable_parameters = 0;
  std::uint64_t frozen_fingerprint = 0;
  double wall_seconds = 0.0;
  nlohmann::json config;

  double final_loss() const { return epoch_losses.empty() ? 0.0 : epoch_losses.back(); }
  double mean_loss() const;
  /// Bitwise equality of everything but wall-clock time.
  bool same_outcome(const RunReport& other) const;
};

nlohmann::json to_json(const RunReport& report, bool include_timing = true);
RunReport run_report_from_json(const nlohmann::json& j);

struct TrainResult {
  RunReport report;
  Adapter adapter;
};

/// Minibatch training of the adapter on the hidden layer of `model`. Metric: train accuracy.
TrainResult train_classifier(const ToyClassifier& model, const Dataset& data, Adapter adapter,
                             const TrainConfig& cfg, std::uint64_t seed);

/// Full-batch fit of the adapter update to `target`; one optimizer step per epoch.
/// Metric: final teacher loss (lower is better).
TrainResult train_teacher(const Tensor& target, Adapter adapter, const TrainConfig& cfg, std::uint64_t seed);

/// Runs fn(0..count-1) on up to `jobs` threads. Each index runs exactly once.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn);

struct VarianceRow {
  std::string label;
  std::size_t runs = 0;
  std::size_t diverged = 0;
  double metric_mean = 0.0;
  double metric_variance = 0.0;
  double final_loss_mean = 0.0;
  double final_loss_variance = 0.0;
  double mean_loss_mean = 0.0;
};

/// Unbiased sample variance (n - 1 denominator) via Welford's update.
double sample_variance(std::span<const double> values);
double mean(std::span<const double> values);

/// One row per group. Throws std::invalid_argument when a group has fewer than 2 runs.
std::vector<VarianceRow> variance_report(const std::vector<std::vector<RunReport>>& groups);

}  // namespace loran
