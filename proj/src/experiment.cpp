// Copyright 2026 The LoRAN Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "loranlab/experiment.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <set>
#include <string_view>

#include "loranlab/rng.hpp"

namespace loran {

namespace {

using nlohmann::json;

// Reads one JSON object block, rejecting keys outside `allowed`.
class Block {
 public:
  Block(const json& j, std::string path, std::initializer_list<std::string_view> allowed) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
    const std::set<std::string_view> keys(allowed);
    for (const auto& [key, _] : j_.items()) {
      if (!keys.contains(key)) throw ConfigError(path_ + ": unknown key '" + key + "'");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& raw(const char* key) const { return j_.at(key); }
  std::string where(const char* key) const { return path_ + "." + key; }

  template <class T>
  void read(const char* key, T& out) const {
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where(key) + ": " + e.what());
    }
  }

  void read_count(const char* key, std::size_t& out) const {
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(where(key) + ": expected a non-negative integer");
    out = v.get<std::size_t>();
  }

 private:
  const json& j_;
  std::string path_;
};

ActivationSpec activation_from_json(const json& j, const std::string& path) {
  ActivationSpec spec;
  std::string kind;
  const bool shorthand = j.is_string();
  if (shorthand) kind = j.get<std::string>();
  static const json empty = json::object();
  Block b(shorthand ? empty : j, path, {"kind", "beta", "amplitude", "omega"});
  if (!shorthand) {
    if (!b.has("kind")) throw ConfigError(path + ": missing 'kind'");
    b.read("kind", kind);
  }
  try {
    spec.kind = parse_activation_kind(kind);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + ".kind: " + e.what());
  }
  b.read("beta", spec.beta);
  b.read("amplitude", spec.amplitude);
  b.read("omega", spec.omega);
  return spec;
}

}  // namespace

json to_json(const ActivationSpec& s) {
  json j = {{"kind", std::string(to_string(s.kind))}};
  if (s.kind == ActivationKind::Swish) j["beta"] = s.beta;
  if (s.kind == ActivationKind::Sinter) {
    j["amplitude"] = s.amplitude;
    j["omega"] = s.omega;
  }
  return j;
}

json to_json(const AdapterConfig& a) {
  return {{"kind", std::string(to_string(a.kind))},
          {"rank", a.rank},
          {"alpha", a.alpha},
          {"activation", to_json(a.activation)},
          {"scale_inside", a.scale_inside}};
}

json to_json(const ExperimentConfig& cfg) {
  json task;
  if (cfg.task.kind == TaskKind::Blobs) {
    const auto& b = cfg.task.blobs;
    task = {{"kind", "blobs"}, {"classes", b.classes}, {"per_class", b.per_class}, {"dim", b.dim},
            {"spread", b.spread}, {"noise", b.noise}, {"seed", b.seed}};
  } else {
    const auto& t = cfg.task.teacher;
    task = {{"kind", "teacher"}, {"d", t.d}, {"k", t.k}, {"rank", t.target_rank}, {"seed", t.seed}};
  }
  const auto& t = cfg.train;
  return {
      {"name", cfg.name},
      {"task", task},
      {"model", {{"width", cfg.model.width}, {"seed", cfg.model.seed}}},
      {"adapter", to_json(cfg.adapter)},
      {"train",
       {{"optimizer", std::string(to_string(t.optimizer))}, {"lr", t.lr}, {"epochs", t.epochs},
        {"batch_size", t.batch_size}, {"beta1", t.beta1}, {"beta2", t.beta2}, {"eps", t.eps},
        {"weight_decay", t.weight_decay}, {"eval_every", t.eval_every}}},
      {"seeds", cfg.seeds},
      {"output", {{"dir", cfg.out_dir}}},
      {"grid", {{"amplitudes", cfg.grid.amplitudes}, {"omegas", cfg.grid.omegas}}},
      {"rank_study", {{"ranks", cfg.ranks}}},
      {"spectrum", {{"rank_tol", cfg.spectrum.rank_tol}, {"edges", cfg.spectrum.edges}}},
  };
}

ExperimentConfig experiment_from_json(const json& j) {
  ExperimentConfig cfg;
  Block top(j, "config",
            {"name", "task", "model", "adapter", "train", "seeds", "output", "grid", "rank_study", "spectrum"});
  top.read("name", cfg.name);

  if (top.has("task")) {
    const json& tj = top.raw("task");
    if (!tj.is_object() || !tj.contains("kind")) throw ConfigError("config.task: expected an object with 'kind'");
    const std::string kind = tj.at("kind").is_string() ? tj.at("kind").get<std::string>() : "";
    if (kind == "blobs") {
      cfg.task.kind = TaskKind::Blobs;
      Block b(tj, "config.task", {"kind", "classes", "per_class", "dim", "spread", "noise", "seed"});
      b.read_count("classes", cfg.task.blobs.classes);
      b.read_count("per_class", cfg.task.blobs.per_class);
      b.read_count("dim", cfg.task.blobs.dim);
      b.read("spread", cfg.task.blobs.spread);
      b.read("noise", cfg.task.blobs.noise);
      b.read("seed", cfg.task.blobs.seed);
    } else if (kind == "teacher") {
      cfg.task.kind = TaskKind::Teacher;
      Block b(tj, "config.task", {"kind", "d", "k", "rank", "seed"});
      b.read_count("d", cfg.task.teacher.d);
      b.read_count("k", cfg.task.teacher.k);
      b.read_count("rank", cfg.task.teacher.target_rank);
      b.read("seed", cfg.task.teacher.seed);
    } else {
      throw ConfigError("config.task.kind: expected 'blobs' or 'teacher'");
    }
  }
  if (top.has("model")) {
    Block b(top.raw("model"), "config.model", {"width", "seed"});
    b.read_count("width", cfg.model.width);
    b.read("seed", cfg.model.seed);
  }
  if (top.has("adapter")) {
    Block b(top.raw("adapter"), "config.adapter", {"kind", "rank", "alpha", "activation", "scale_inside"});
    if (b.has("kind")) {
      std::string kind;
      b.read("kind", kind);
      try {
        cfg.adapter.kind = parse_adapter_kind(kind);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config.adapter.kind: ") + e.what());
      }
    }
    b.read_count("rank", cfg.adapter.rank);
    b.read("alpha", cfg.adapter.alpha);
    b.read("scale_inside", cfg.adapter.scale_inside);
    if (b.has("activation")) cfg.adapter.activation = activation_from_json(b.raw("activation"), "config.adapter.activation");
  }
  if (top.has("train")) {
    Block b(top.raw("train"), "config.train",
            {"optimizer", "lr", "epochs", "batch_size", "beta1", "beta2", "eps", "weight_decay", "eval_every"});
    if (b.has("optimizer")) {
      std::string name;
      b.read("optimizer", name);
      try {
        cfg.train.optimizer = parse_optimizer_kind(name);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config.train.optimizer: ") + e.what());
      }
    }
    b.read("lr", cfg.train.lr);
    b.read_count("epochs", cfg.train.epochs);
    b.read_count("batch_size", cfg.train.batch_size);
    b.read("beta1", cfg.train.beta1);
    b.read("beta2", cfg.train.beta2);
    b.read("eps", cfg.train.eps);
    b.read("weight_decay", cfg.train.weight_decay);
    b.read_count("eval_every", cfg.train.eval_every);
  }
  top.read("seeds", cfg.seeds);
  if (top.has("output")) {
    Block b(top.raw("output"), "config.output", {"dir"});
    b.read("dir", cfg.out_dir);
  }
  if (top.has("grid")) {
    Block b(top.raw("grid"), "config.grid", {"amplitudes", "omegas"});
    b.read("amplitudes", cfg.grid.amplitudes);
    b.read("omegas", cfg.grid.omegas);
  }
  if (top.has("rank_study")) {
    Block b(top.raw("rank_study"), "config.rank_study", {"ranks"});
    b.read("ranks", cfg.ranks);
  }
  if (top.has("spectrum")) {
    Block b(top.raw("spectrum"), "config.spectrum", {"rank_tol", "edges"});
    b.read("rank_tol", cfg.spectrum.rank_tol);
    b.read("edges", cfg.spectrum.edges);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return experiment_from_json(j);
}

std::pair<std::size_t, std::size_t> ExperimentConfig::adapted_shape() const {
  if (task.kind == TaskKind::Blobs) return {model.width, task.blobs.dim};
  return {task.teacher.d, task.teacher.k};
}

void ExperimentConfig::validate() const {
  try {
    if (task.kind == TaskKind::Blobs) {
      task.blobs.validate();
      if (model.width == 0) throw std::invalid_argument("model width must be > 0");
    } else {
      task.teacher.validate();
    }
    const auto [d, k] = adapted_shape();
    adapter.validate(d, k);
    train.validate();
    if (seeds.empty()) throw std::invalid_argument("seed list must not be empty");
    for (double a : grid.amplitudes)
      if (!std::isfinite(a)) throw std::invalid_argument("grid amplitudes must be finite");
    for (double w : grid.omegas)
      if (!(w > 0.0) || !std::isfinite(w)) throw std::invalid_argument("grid omegas must be finite and > 0");
    for (std::size_t r : ranks)
      if (r == 0) throw std::invalid_argument("rank_study ranks must be >= 1");
    if (!(spectrum.rank_tol > 0.0)) throw std::invalid_argument("spectrum rank_tol must be > 0");
    for (std::size_t i = 1; i < spectrum.edges.size(); ++i)
      if (!(spectrum.edges[i] > spectrum.edges[i - 1])) throw std::invalid_argument("spectrum edges must increase");
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
}

TrainResult run_experiment(const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto [d, k] = cfg.adapted_shape();
  Adapter adapter = make_adapter(cfg.adapter, d, k, derive_seed(seed, 1));
  TrainResult result = [&] {
    if (cfg.task.kind == TaskKind::Blobs) {
      const Dataset data = gen_blobs(cfg.task.blobs);
      const ToyClassifier model = ToyClassifier::make(cfg.task.blobs.dim, cfg.model.width, cfg.task.blobs.classes,
                                                      cfg.model.seed);
      return train_classifier(model, data, std::move(adapter), cfg.train, seed);
    }
    return train_teacher(make_teacher_target(cfg.task.teacher), std::move(adapter), cfg.train, seed);
  }();
  ExperimentConfig echo = cfg;
  echo.seeds = {seed};
  result.report.label = cfg.name;
  result.report.config = to_json(echo);
  return result;
}

std::vector<std::vector<RunReport>> run_matrix(const std::vector<ExperimentConfig>& configs,
                                               const std::vector<std::uint64_t>& seeds, std::size_t jobs) {
  std::vector<std::vector<RunReport>> out(configs.size(), std::vector<RunReport>(seeds.size()));
  parallel_for(configs.size() * seeds.size(), jobs, [&](std::size_t idx) {
    const std::size_t c = idx / seeds.size(), s = idx % seeds.size();
    out[c][s] = run_experiment(configs[c], seeds[s]).report;
  });
  return out;
}

ExperimentConfig with_sinter(const ExperimentConfig& base, double amplitude, double omega) {
  ExperimentConfig cfg = base;
  cfg.adapter.kind = AdapterKind::LoRAN;
  cfg.adapter.activation = ActivationSpec::sinter(amplitude, omega);
  cfg.name = base.name + "-" + cfg.adapter.activation.label();
  return cfg;
}

GridResult grid_search(const std::vector<double>& amplitudes, const std::vector<double>& omegas,
                       const ExperimentConfig& base, const std::vector<std::uint64_t>& seeds, std::size_t jobs) {
  if (amplitudes.empty() || omegas.empty()) throw std::invalid_argument("grid search needs non-empty A and omega lists");
  if (seeds.empty()) throw std::invalid_argument("grid search needs at least one seed");
  std::vector<ExperimentConfig> cells;
  for (double a : amplitudes)
    for (double w : omegas) cells.push_back(with_sinter(base, a, w));

  GridResult grid;
  grid.amplitudes = amplitudes;
  grid.omegas = omegas;
  grid.seeds_per_cell = seeds.size();
  grid.runs = run_matrix(cells, seeds, jobs);
  grid.metric.assign(amplitudes.size(), std::vector<double>(omegas.size()));
  grid.diverged.assign(amplitudes.size(), std::vector<std::size_t>(omegas.size(), 0));
  grid.metric_name = grid.runs.front().front().metric_name;
  grid.higher_is_better = grid.runs.front().front().higher_is_better;

  bool have_best = false;
  double best = 0.0;
  for (std::size_t i = 0; i < amplitudes.size(); ++i) {
    for (std::size_t j = 0; j < omegas.size(); ++j) {
      const auto& runs = grid.runs[i * omegas.size() + j];
      double sum = 0.0;
      for (const auto& r : runs) {
        sum += r.final_metric;
        if (r.diverged || !std::isfinite(r.final_metric)) grid.diverged[i][j] += 1;
      }
      const double value = grid.diverged[i][j] ? std::numeric_limits<double>::quiet_NaN()
                                               : sum / static_cast<double>(runs.size());
      grid.metric[i][j] = value;
      if (std::isnan(value)) continue;
      const bool better = grid.higher_is_better ? value > best : value < best;
      if (!have_best || better) {
        have_best = true;
        best = value;
        grid.best_amplitude = i;
        grid.best_omega = j;
      }
    }
  }
  return grid;
}

json to_json(const GridResult& g, bool include_timing) {
  json metric = json::array();
  for (const auto& row : g.metric) {
    json r = json::array();
    for (double v : row) r.push_back(std::isfinite(v) ? json(v) : json(nullptr));
    metric.push_back(std::move(r));
  }
  json runs = json::array();
  for (const auto& cell : g.runs) {
    json c = json::array();
    for (const auto& r : cell) c.push_back(to_json(r, include_timing));
    runs.push_back(std::move(c));
  }
  return {{"amplitudes", g.amplitudes},
          {"omegas", g.omegas},
          {"metric", g.metric_name},
          {"higher_is_better", g.higher_is_better},
          {"values", std::move(metric)},
          {"diverged", g.diverged},
          {"best", {{"amplitude_index", g.best_amplitude}, {"omega_index", g.best_omega},
                    {"amplitude", g.amplitudes[g.best_amplitude]}, {"omega", g.omegas[g.best_omega]}}},
          {"seeds_per_cell", g.seeds_per_cell},
          {"runs", std::move(runs)}};
}

}  // namespace loran
