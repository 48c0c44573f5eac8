// Copyright 2026 The LoRAN Lab Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: one subcommand per experiment.

#include <exception>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "loranlab/commands.hpp"

namespace {

using loran::CommandOptions;
using loran::ExperimentConfig;

struct SharedFlags {
  std::optional<std::string> config;
  std::optional<std::string> out;
  std::optional<std::string> seeds;
  std::size_t jobs = 1;
  bool no_timestamp = false;

  CommandOptions options() const {
    CommandOptions o;
    o.out_dir = out;
    if (seeds) o.seeds = loran::parse_seed_list(*seeds);
    o.jobs = jobs;
    o.timestamp = !no_timestamp;
    return o;
  }
};

void add_shared(CLI::App* sub, SharedFlags& f, bool with_config) {
  if (with_config) sub->add_option("--config", f.config, "Experiment config (JSON); defaults apply when omitted");
  sub->add_option("--out", f.out, "Output directory (overrides output.dir)");
  sub->add_option("--seeds", f.seeds, "Seed list, e.g. 1,2,3 or 1-5 (overrides seeds)");
  sub->add_option("--jobs", f.jobs, "Parallel runs")->check(CLI::PositiveNumber);
  sub->add_flag("--no-timestamp", f.no_timestamp, "Omit wall-clock fields so outputs are byte-identical on rerun");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"loranlab: LoRA / LoRAN numerical laboratory"};
  app.require_subcommand(0, 1);
  bool print_defaults = false;
  app.add_flag("--print-defaults", print_defaults, "Print the full default config as JSON and exit");

  SharedFlags flags;
  std::string scope = "all";
  bool inject = false;
  std::size_t gc_seeds = 20;
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  gradcheck->add_option("--scope", scope, "all | ops | activations | adapters | sinter-only");
  gradcheck->add_option("--check-seeds", gc_seeds, "Random instances per check")->check(CLI::PositiveNumber);
  gradcheck->add_flag("--inject-wrong-derivative", inject, "Test hook: perturb activation derivatives by 1%")
      ->group("");
  add_shared(gradcheck, flags, false);

  using Runner = std::function<int(const ExperimentConfig&, const CommandOptions&, std::ostream&)>;
  const std::map<std::string, std::pair<std::string, Runner>> experiments{
      {"train", {"Train the configured adapter over the seed list", loran::cmd_train}},
      {"compare", {"LoRA baseline vs LoRAN with a delta column", loran::cmd_compare}},
      {"ablate", {"Activation ablation: identity, sigmoid, relu, tanh, swish-1, swish-25, sinter", loran::cmd_ablate}},
      {"grid", {"Grid search over Sinter amplitude and angular frequency", loran::cmd_grid}},
      {"spectrum", {"Singular value spectra of trained LoRA, LoRAN and full updates", loran::cmd_spectrum}},
      {"rank-study", {"LoRA and LoRAN at each configured rank", loran::cmd_rank_study}},
  };
  std::map<CLI::App*, const Runner*> runners;
  for (const auto& [name, entry] : experiments) {
    CLI::App* sub = app.add_subcommand(name, entry.first);
    add_shared(sub, flags, true);
    runners[sub] = &entry.second;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return loran::kExitConfigError;
  }

  try {
    if (print_defaults) {
      loran::cmd_print_defaults(std::cout);
      return loran::kExitOk;
    }
    if (app.get_subcommands().empty()) {
      std::cerr << app.help();
      return loran::kExitConfigError;
    }
    CLI::App* chosen = app.get_subcommands().front();
    const CommandOptions opts = flags.options();
    if (chosen == gradcheck) {
      loran::GradcheckOptions g;
      try {
        g.scope = loran::parse_gradcheck_scope(scope);
      } catch (const std::invalid_argument& e) {
        throw loran::ConfigError(e.what());
      }
      g.inject_wrong_derivative = inject;
      g.seeds = gc_seeds;
      return loran::cmd_gradcheck(g, opts.out_dir, opts.timestamp, std::cout);
    }
    const ExperimentConfig cfg = loran::resolve_config(flags.config, opts);
    return (*runners.at(chosen))(cfg, opts, std::cout);
  } catch (const loran::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return loran::kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return loran::kExitInternal;
  }
}
