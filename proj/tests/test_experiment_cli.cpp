// Copyright 2026 The LoRAN Lab Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "loranlab/commands.hpp"
#include "loranlab/experiment.hpp"
#include "oracles.hpp"

using namespace loran;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_teacher() {
  ExperimentConfig cfg;
  cfg.task.kind = TaskKind::Teacher;
  cfg.adapter.rank = 4;
  cfg.adapter.alpha = 4;
  cfg.train.lr = 1e-2;
  cfg.train.epochs = 30;
  cfg.seeds = {1, 2};
  cfg.grid.amplitudes = {0.0, 5e-5};
  cfg.grid.omegas = {1e3, 1e4};
  cfg.ranks = {2, 4};
  return cfg;
}

ExperimentConfig small_blobs() {
  ExperimentConfig cfg;
  cfg.train.epochs = 2;
  cfg.seeds = {1, 2};
  return cfg;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("loranlab-test-" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("defaults round-trip through json") {
  const ExperimentConfig def;
  const json j = to_json(def);
  CHECK(to_json(experiment_from_json(j)) == j);
  CHECK(to_json(experiment_from_json(json::object())) == j);
  std::ostringstream os;
  cmd_print_defaults(os);
  CHECK(json::parse(os.str()) == j);
}

TEST_CASE("config parsing") {
  const ExperimentConfig cfg = experiment_from_json(json::parse(R"({
    "task": {"kind": "teacher", "d": 16, "k": 8, "rank": 3},
    "adapter": {"kind": "loran", "rank": 2, "alpha": 4,
                "activation": {"kind": "sinter", "amplitude": 0.5, "omega": 5000}},
    "train": {"optimizer": "sgd", "lr": 0.1, "epochs": 3},
    "seeds": [4, 5]})"));
  CHECK(cfg.task.kind == TaskKind::Teacher);
  CHECK(cfg.adapted_shape() == std::pair<std::size_t, std::size_t>{16, 8});
  CHECK(cfg.adapter.activation.kind == ActivationKind::Sinter);
  CHECK(cfg.adapter.activation.omega == 5000.0);
  CHECK(cfg.train.optimizer == OptimizerKind::SGD);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{4, 5});
  CHECK(experiment_from_json(json::parse(R"({"adapter": {"activation": "relu"}})")).adapter.activation.kind ==
        ActivationKind::ReLU);
}

TEST_CASE("config errors are ConfigError") {
  for (const char* bad : {
           R"({"adapter": {"rnk": 4}})",
           R"({"bogus": 1})",
           R"({"adapter": {"activation": "gelu"}})",
           R"({"adapter": {"activation": {"kind": "sinter", "omega": -1}}})",
           R"({"adapter": {"rank": 0}})",
           R"({"adapter": {"rank": 99}})",
           R"({"task": {"kind": "teacher", "rank": 40}})",
           R"({"task": {"kind": "moons"}})",
           R"({"train": {"epochs": -2}})",
           R"({"train": {"lr": "fast"}})",
           R"({"seeds": []})",
       }) {
    INFO(bad);
    CHECK_THROWS_AS(experiment_from_json(json::parse(bad)), ConfigError);
  }
  CHECK_THROWS_AS(load_experiment("/nonexistent/cfg.json"), ConfigError);
}

TEST_CASE("seed list parsing") {
  CHECK(parse_seed_list("1,2,3") == std::vector<std::uint64_t>{1, 2, 3});
  CHECK(parse_seed_list("1-4") == std::vector<std::uint64_t>{1, 2, 3, 4});
  CHECK(parse_seed_list("7,1-2") == std::vector<std::uint64_t>{7, 1, 2});
  for (const char* bad : {"", "a", "3-1", "1,,2", "-1"}) {
    INFO(bad);
    CHECK_THROWS_AS(parse_seed_list(bad), ConfigError);
  }
}

TEST_CASE("run_matrix keeps order and ignores jobs") {
  const ExperimentConfig base = small_teacher();
  const std::vector<ExperimentConfig> cfgs{lora_baseline(base), with_sinter(base, 5e-5, 1e4)};
  const std::vector<std::uint64_t> seeds{3, 1, 2};
  const auto a = run_matrix(cfgs, seeds, 1), b = run_matrix(cfgs, seeds, 3);
  REQUIRE(a.size() == 2);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t s = 0; s < 3; ++s) {
      CHECK(a[c][s].seed == seeds[s]);
      CHECK(a[c][s].same_outcome(b[c][s]));
      CHECK(a[c][s].same_outcome(run_experiment(cfgs[c], seeds[s]).report));
    }
}

TEST_CASE("a single-cell grid equals a direct run") {
  const ExperimentConfig base = small_teacher();
  const GridResult g = grid_search({5e-5}, {1e4}, base, {2}, 1);
  const RunReport direct = run_experiment(with_sinter(base, 5e-5, 1e4), 2).report;
  CHECK(g.runs[0][0].same_outcome(direct));
  CHECK(g.metric[0][0] == direct.final_metric);
  CHECK(g.metric_name == direct.metric_name);
}

TEST_CASE("grid amplitude zero equals LoRA bitwise") {
  const ExperimentConfig base = small_teacher();
  const GridResult g = grid_search({0.0}, {1e3, 1e5}, base, {1, 2}, 2);
  for (std::size_t s = 0; s < 2; ++s) {
    const RunReport ref = run_experiment(lora_baseline(base), base.seeds[s]).report;
    for (std::size_t j = 0; j < 2; ++j) CHECK(oracle::same_bits(g.runs[j][s].epoch_losses, ref.epoch_losses));
  }
}

TEST_CASE("grid best cell and divergence accounting") {
  ExperimentConfig base = small_teacher();
  const GridResult g = grid_search({0.0, 5e-5}, {1e3}, base, {1}, 1);
  CHECK_FALSE(g.higher_is_better);
  const std::size_t best = g.metric[0][0] <= g.metric[1][0] ? 0 : 1;
  CHECK(g.best_amplitude == best);

  base.train.optimizer = OptimizerKind::SGD;
  base.train.lr = 1e6;
  const GridResult d = grid_search({5e-5}, {1e3}, base, {1}, 1);
  CHECK(d.diverged[0][0] == 1);
  CHECK(std::isnan(d.metric[0][0]));
}

TEST_CASE("ablation covers every activation") {
  const auto cfgs = ablation_configs(small_blobs());
  std::vector<std::string> names;
  for (const auto& c : cfgs) names.push_back(c.name);
  CHECK(names.size() == 7);
  CHECK(std::find(names.begin(), names.end(), "loran-sigmoid") != names.end());
  CHECK(std::find(names.begin(), names.end(), "loran-swish-25") != names.end());
}

TEST_CASE("command outputs are byte-identical without timestamps") {
  std::ostringstream log;
  using Cmd = int (*)(const ExperimentConfig&, const CommandOptions&, std::ostream&);
  const std::vector<std::pair<std::string, Cmd>> cmds{{"train", cmd_train},       {"compare", cmd_compare},
                                                      {"ablate", cmd_ablate},     {"grid", cmd_grid},
                                                      {"spectrum", cmd_spectrum}, {"rank-study", cmd_rank_study}};
  for (const auto& [name, cmd] : cmds) {
    INFO(name);
    const ExperimentConfig cfg = name == "ablate" ? small_blobs() : small_teacher();
    CommandOptions o;
    o.timestamp = false;
    const fs::path a = fresh_dir(name + "-a"), b = fresh_dir(name + "-b");
    o.out_dir = a.string();
    CHECK(cmd(cfg, o, log) == kExitOk);
    o.out_dir = b.string();
    o.jobs = 2;
    CHECK(cmd(cfg, o, log) == kExitOk);
    std::size_t n = 0;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
      if (!e.is_regular_file()) continue;
      ++n;
      const fs::path rel = fs::relative(e.path(), a);
      INFO(rel.string());
      CHECK(slurp(e.path()) == slurp(b / rel));
      CHECK(slurp(e.path()).find("generated_at") == std::string::npos);
    }
    CHECK(n > 0);
    fs::remove_all(a);
    fs::remove_all(b);
  }
}

TEST_CASE("compare writes reports and a mean row") {
  CommandOptions o;
  o.timestamp = false;
  const fs::path dir = fresh_dir("compare-files");
  o.out_dir = dir.string();
  std::ostringstream log;
  REQUIRE(cmd_compare(small_teacher(), o, log) == kExitOk);
  for (const char* f : {"compare.csv", "compare.json", "runs.csv", "loss_curves.csv", "variance.csv"})
    CHECK(fs::exists(dir / f));
  const std::string csv = slurp(dir / "compare.csv");
  CHECK(csv.find("mean") != std::string::npos);
  const json j = json::parse(slurp(dir / "compare.json"));
  CHECK(j.is_object());
  std::size_t reports = 0;
  for (const auto& e : fs::directory_iterator(dir / "runs")) reports += e.path().extension() == ".json";
  CHECK(reports == 4);
  fs::remove_all(dir);
}

TEST_CASE("timestamps are added only on request") {
  CommandOptions o;
  const fs::path dir = fresh_dir("stamped");
  o.out_dir = dir.string();
  std::ostringstream log;
  ExperimentConfig cfg = small_teacher();
  cfg.seeds = {1};
  REQUIRE(cmd_train(cfg, o, log) == kExitOk);
  bool stamped = false;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.path().extension() == ".json") stamped |= slurp(e.path()).find("generated_at") != std::string::npos;
  CHECK(stamped);
  fs::remove_all(dir);
}

TEST_CASE("divergence maps to its own exit code") {
  ExperimentConfig cfg = small_teacher();
  cfg.seeds = {1};
  cfg.train.optimizer = OptimizerKind::SGD;
  cfg.train.lr = 1e6;
  CommandOptions o;
  o.timestamp = false;
  const fs::path dir = fresh_dir("diverge");
  o.out_dir = dir.string();
  std::ostringstream log;
  CHECK(cmd_train(cfg, o, log) == kExitDiverged);
  fs::remove_all(dir);
}

TEST_CASE("rank study rejects impossible ranks before training") {
  ExperimentConfig cfg = small_teacher();
  cfg.ranks = {4, 64};
  CommandOptions o;
  const fs::path dir = fresh_dir("rank-bad");
  o.out_dir = dir.string();
  std::ostringstream log;
  CHECK_THROWS_AS(cmd_rank_study(cfg, o, log), ConfigError);
  CHECK_FALSE(fs::exists(dir / "rank_study.csv"));
}

TEST_CASE("gradcheck command exit status") {
  GradcheckOptions opts;
  opts.seeds = 2;
  std::ostringstream log;
  CHECK(cmd_gradcheck(opts, std::nullopt, false, log) == kExitOk);
  opts.inject_wrong_derivative = true;
  CHECK(cmd_gradcheck(opts, std::nullopt, false, log) == kExitCheckFailed);
}
