// Copyright 2026 The LoRAN Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "loranlab/experiment.hpp"
#include "loranlab/gradcheck.hpp"

namespace loran {

/// Process exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,  // gradcheck found an error at or above threshold
  kExitConfigError = 2,  // bad flags or config, nothing was run
  kExitDiverged = 3,     // every output written, but at least one run diverged
  kExitInternal = 4,
};

/// Flag-level overrides applied on top of the config file.
struct CommandOptions {
  std::optional<std::string> out_dir;
  std::optional<std::vector<std::uint64_t>> seeds;
  std::size_t jobs = 1;
  /// When false, wall-clock fields and generation time are left out so reruns are byte-identical.
  bool timestamp = true;
};

/// Parses "1,2,3" or ranges like "1-5" (mixed allowed). Throws ConfigError on junk.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

/// Config with flag overrides applied, validated.
ExperimentConfig resolve_config(const std::optional<std::string>& path, const CommandOptions& opts);

int cmd_gradcheck(const GradcheckOptions& options, const std::optional<std::string>& out_dir, bool timestamp,
                  std::ostream& log);
int cmd_train(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& log);
int cmd_compare(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& log);
int cmd_ablate(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& log);
int cmd_grid(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& log);
int cmd_spectrum(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& log);
int cmd_rank_study(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& log);
void cmd_print_defaults(std::ostream& out);

/// Configurations run by the ablation, in table order: Identity, Sigmoid, ReLU, Tanh,
/// Swish-1, Swish-25, Sinter (the configured one when the base adapter is Sinter).
std::vector<ExperimentConfig> ablation_configs(const ExperimentConfig& base);

/// Textbook LoRA twin of `cfg`: same rank and alpha, scale outside, no activation.
ExperimentConfig lora_baseline(const ExperimentConfig& cfg);
/// `cfg` with the adapter kind forced to LoRAN.
ExperimentConfig loran_variant(const ExperimentConfig& cfg);

}  // namespace loran
