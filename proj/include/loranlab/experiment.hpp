// Copyright 2026 The LoRAN Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "loranlab/adapters.hpp"
#include "loranlab/tasks.hpp"
#include "loranlab/training.hpp"
#include "json.hpp"

namespace loran {

/// Invalid or unknown configuration content. Raised before any compute starts.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TaskKind { Blobs, Teacher };

struct TaskConfig {
  TaskKind kind = TaskKind::Blobs;
  BlobsTask blobs;
  TeacherTask teacher;
};

struct ModelConfig {
  std::size_t width = 32;
  std::uint64_t seed = 7;
};

struct GridConfig {
  std::vector<double> amplitudes{5e-6, 5e-5, 5e-4};
  std::vector<double> omegas{1e3, 1e4, 1e5};
};

struct SpectrumConfig {
  double rank_tol = 1e-8;
  std::vector<double> edges;  // empty: decades below sigma_max
};

struct ExperimentConfig {
  std::string name = "run";
  TaskConfig task;
  ModelConfig model;
  AdapterConfig adapter;
  TrainConfig train;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::string out_dir = "out";
  GridConfig grid;
  std::vector<std::size_t> ranks{8, 64};
  SpectrumConfig spectrum;

  /// Dimensions (d, k) of the matrix the adapter updates.
  std::pair<std::size_t, std::size_t> adapted_shape() const;
  /// Throws ConfigError describing the first problem found.
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
nlohmann::json to_json(const ActivationSpec& spec);
nlohmann::json to_json(const AdapterConfig& cfg);
/// Every block is optional; unknown keys anywhere are rejected. The result is validated.
ExperimentConfig experiment_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment(const std::string& path);

/// Trains one (config, seed) pair. The report echoes `cfg` with seeds = [seed].
TrainResult run_experiment(const ExperimentConfig& cfg, std::uint64_t seed);

/// Every (config, seed) pair; result[c][s] belongs to configs[c] and seeds[s] regardless of `jobs`.
std::vector<std::vector<RunReport>> run_matrix(const std::vector<ExperimentConfig>& configs,
                                               const std::vector<std::uint64_t>& seeds, std::size_t jobs);

/// Copy of `base` with a LoRAN Sinter adapter at (amplitude, omega), named after the cell.
ExperimentConfig with_sinter(const ExperimentConfig& base, double amplitude, double omega);

struct GridResult {
  std::vector<double> amplitudes;
  std::vector<double> omegas;
  /// metric[i][j] is the seed mean at (amplitudes[i], omegas[j]); NaN marks a diverged cell.
  std::vector<std::vector<double>> metric;
  std::vector<std::vector<std::size_t>> diverged;
  std::string metric_name;
  bool higher_is_better = true;
  std::size_t best_amplitude = 0;
  std::size_t best_omega = 0;
  std::size_t seeds_per_cell = 0;
  std::vector<std::vector<RunReport>> runs;  // [cell index][seed index], cell = i * |omegas| + j
};

/// Best cell optimizes the metric; ties go to the smaller amplitude index, then smaller omega index.
GridResult grid_search(const std::vector<double>& amplitudes, const std::vector<double>& omegas,
                       const ExperimentConfig& base, const std::vector<std::uint64_t>& seeds, std::size_t jobs);

nlohmann::json to_json(const GridResult& grid, bool include_timing);

}  // namespace loran
