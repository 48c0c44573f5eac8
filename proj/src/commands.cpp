// Copyright 2026 The LoRAN Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "loranlab/commands.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "loranlab/analysis.hpp"

namespace loran {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Shortest round-trip text for a double; identical bytes on every run.
std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

// File-name safe version of a run label.
std::string slug(const std::string& label) {
  std::string out;
  for (char c : label) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.';
    if (keep) {
      out += c;
    } else if (out.empty() || out.back() != '_') {
      out += '_';
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out.empty() ? "run" : out;
}

class Csv {
 public:
  explicit Csv(std::vector<std::string> header) { row(header); }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) os_ << ',';
      os_ << quote(cells[i]);
    }
    os_ << '\n';
  }
  std::string str() const { return os_.str(); }

 private:
  static std::string quote(const std::string& cell) {
    if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
    std::string q = "\"";
    for (char c : cell) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + '"';
  }
  std::ostringstream os_;
};

// Writes the files of one command invocation under a single output directory.
class Emitter {
 public:
  Emitter(std::string dir, bool timestamp, std::ostream& log) : dir_(std::move(dir)), timestamp_(timestamp), log_(log) {
    fs::create_directories(dir_);
  }

  bool timestamp() const { return timestamp_; }

  void text(const std::string& name, const std::string& body) {
    const fs::path path = fs::path(dir_) / name;
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << body;
    log_ << "wrote " << path.string() << "\n";
  }

  void json_file(const std::string& name, json body) {
    if (timestamp_) body["generated_at"] = utc_now();
    text(name, body.dump(2) + "\n");
  }

  void csv(const std::string& name, const Csv& table) { text(name, table.str()); }

  // One JSON file per run under runs/, named by group index, label and seed.
  void run_reports(const std::string& command, const std::vector<std::vector<RunReport>>& groups) {
    for (std::size_t g = 0; g < groups.size(); ++g) {
      for (const RunReport& r : groups[g]) {
        std::ostringstream name;
        name << "runs/" << command << '-' << std::setw(2) << std::setfill('0') << g << '-' << slug(r.label)
             << "-seed" << r.seed << ".json";
        text(name.str(), to_json(r, timestamp_).dump(2) + "\n");
      }
    }
  }

  // Flat table with one row per run.
  void runs_csv(const std::string& name, const std::vector<std::vector<RunReport>>& groups) {
    std::vector<std::string> header{"group", "label", "seed", "metric", "final_metric", "final_loss", "mean_loss",
                                    "diverged", "diverged_epoch", "trainable_parameters", "frozen_fingerprint"};
    if (timestamp_) header.push_back("wall_seconds");
    Csv csv(header);
    for (std::size_t g = 0; g < groups.size(); ++g) {
      for (const RunReport& r : groups[g]) {
        std::vector<std::string> row{std::to_string(g),
                                     r.label,
                                     std::to_string(r.seed),
                                     r.metric_name,
                                     num(r.final_metric),
                                     num(r.final_loss()),
                                     num(r.mean_loss()),
                                     r.diverged ? "1" : "0",
                                     r.diverged_epoch ? std::to_string(*r.diverged_epoch) : "",
                                     std::to_string(r.trainable_parameters),
                                     std::to_string(r.frozen_fingerprint)};
        if (timestamp_) row.push_back(num(r.wall_seconds));
        csv.row(row);
      }
    }
    this->csv(name, csv);
  }

 private:
  std::string dir_;
  bool timestamp_;
  std::ostream& log_;
};

std::size_t diverged_count(const std::vector<std::vector<RunReport>>& groups) {
  std::size_t n = 0;
  for (const auto& g : groups)
    for (const auto& r : g) n += r.diverged ? 1 : 0;
  return n;
}

int finish(const std::vector<std::vector<RunReport>>& groups, std::ostream& log) {
  const std::size_t n = diverged_count(groups);
  if (n == 0) return kExitOk;
  log << n << " run(s) diverged; see the diverged column\n";
  return kExitDiverged;
}

std::vector<double> metrics(const std::vector<RunReport>& runs) {
  std::vector<double> out;
  for (const auto& r : runs) out.push_back(r.final_metric);
  return out;
}

// Mean with the sample variance when there are enough runs, NaN otherwise.
std::pair<double, double> mean_var(const std::vector<double>& v) {
  return {mean(v), v.size() >= 2 ? sample_variance(v) : std::nan("")};
}

Csv variance_csv(const std::vector<std::vector<RunReport>>& groups) {
  Csv csv({"label", "runs", "diverged", "metric_mean", "metric_variance", "final_loss_mean", "final_loss_variance",
           "mean_loss_mean"});
  for (const VarianceRow& row : variance_report(groups)) {
    csv.row({row.label, std::to_string(row.runs), std::to_string(row.diverged), num(row.metric_mean),
             num(row.metric_variance), num(row.final_loss_mean), num(row.final_loss_variance),
             num(row.mean_loss_mean)});
  }
  return csv;
}

// Per-epoch training loss averaged over seeds, one column per group.
Csv loss_curves_csv(const std::vector<std::vector<RunReport>>& groups) {
  std::vector<std::string> header{"epoch"};
  for (const auto& g : groups) header.push_back(g.front().label);
  Csv csv(header);
  const std::size_t epochs = groups.front().front().epoch_losses.size();
  for (std::size_t e = 0; e < epochs; ++e) {
    std::vector<std::string> row{std::to_string(e + 1)};
    for (const auto& g : groups) {
      std::vector<double> v;
      for (const auto& r : g) v.push_back(r.epoch_losses.at(e));
      row.push_back(num(mean(v)));
    }
    csv.row(row);
  }
  return csv;
}

std::string out_dir_for(const ExperimentConfig& cfg, const CommandOptions& opts) {
  return opts.out_dir.value_or(cfg.out_dir);
}

void print_group_summary(std::ostream& log, const std::vector<RunReport>& runs) {
  const auto [m, v] = mean_var(metrics(runs));
  log << std::left << std::setw(34) << runs.front().label << " " << runs.front().metric_name << " mean " << num(m);
  if (!std::isnan(v)) log << " var " << num(v);
  log << " over " << runs.size() << " seed(s)\n";
}

ExperimentConfig named(ExperimentConfig cfg, std::string name) {
  cfg.name = std::move(name);
  return cfg;
}

}  // namespace

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  auto parse_one = [&](const std::string& s) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
      throw ConfigError("bad seed '" + s + "' in seed list '" + text + "'");
    return v;
  };
  while (std::getline(ss, item, ',')) {
    const auto dash = item.find('-');
    if (dash == std::string::npos) {
      seeds.push_back(parse_one(item));
      continue;
    }
    const std::uint64_t lo = parse_one(item.substr(0, dash)), hi = parse_one(item.substr(dash + 1));
    if (hi < lo || hi - lo > 100000) throw ConfigError("bad seed range '" + item + "'");
    for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
  }
  if (seeds.empty()) throw ConfigError("empty seed list");
  return seeds;
}

ExperimentConfig resolve_config(const std::optional<std::string>& path, const CommandOptions& opts) {
  ExperimentConfig cfg = path ? load_experiment(*path) : ExperimentConfig{};
  if (opts.seeds) cfg.seeds = *opts.seeds;
  if (opts.out_dir) cfg.out_dir = *opts.out_dir;
  if (opts.jobs == 0) throw ConfigError("--jobs must be >= 1");
  cfg.validate();
  return cfg;
}

ExperimentConfig lora_baseline(const ExperimentConfig& cfg) {
  ExperimentConfig out = cfg;
  out.adapter.kind = AdapterKind::LoRA;
  out.adapter.activation = ActivationSpec::identity();
  out.adapter.scale_inside = false;
  return out;
}

ExperimentConfig loran_variant(const ExperimentConfig& cfg) {
  ExperimentConfig out = cfg;
  out.adapter.kind = AdapterKind::LoRAN;
  return out;
}

std::vector<ExperimentConfig> ablation_configs(const ExperimentConfig& base) {
  const ActivationSpec sinter = base.adapter.activation.kind == ActivationKind::Sinter
                                    ? base.adapter.activation
                                    : ActivationSpec::sinter(5e-5, 1e4);
  std::vector<ExperimentConfig> out;
  for (const ActivationSpec& spec : {ActivationSpec::identity(), ActivationSpec::sigmoid(), ActivationSpec::relu(),
                                     ActivationSpec::tanh(), ActivationSpec::swish(1.0), ActivationSpec::swish(25.0),
                                     sinter}) {
    ExperimentConfig cfg = loran_variant(base);
    cfg.adapter.activation = spec;
    out.push_back(named(cfg, "loran-" + spec.label()));
  }
  return out;
}

int cmd_gradcheck(const GradcheckOptions& options, const std::optional<std::string>& out_dir, bool timestamp,
                  std::ostream& log) {
  const auto entries = run_gradcheck_suite(options);
  double worst = 0.0;
  std::size_t failed = 0;
  for (const auto& e : entries) {
    log << (e.passed ? "ok   " : "FAIL ") << std::left << std::setw(64) << e.name << " h=" << num(e.step)
        << " max_rel_err=" << num(e.max_rel_error) << "\n";
    worst = std::max(worst, std::isnan(e.max_rel_error) ? INFINITY : e.max_rel_error);
    failed += e.passed ? 0 : 1;
  }
  log << entries.size() << " checks, " << failed << " failed, max relative error " << num(worst) << " (threshold "
      << num(options.threshold) << ")\n";
  if (out_dir) {
    Emitter emit(*out_dir, timestamp, log);
    Csv csv({"check", "step", "max_rel_error", "passed"});
    json checks = json::array();
    for (const auto& e : entries) {
      csv.row({e.name, num(e.step), num(e.max_rel_error), e.passed ? "1" : "0"});
      checks.push_back({{"name", e.name}, {"step", e.step}, {"max_rel_error", e.max_rel_error}, {"passed", e.passed}});
    }
    emit.csv("gradcheck.csv", csv);
    emit.json_file("gradcheck.json", {{"scope", std::string(to_string(options.scope))},
                                      {"threshold", options.threshold},
                                      {"seeds", options.seeds},
                                      {"max_rel_error", worst},
                                      {"failed", failed},
                                      {"checks", checks}});
  }
  return failed == 0 ? kExitOk : kExitCheckFailed;
}

int cmd_train(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& log) {
  const auto groups = run_matrix({cfg}, cfg.seeds, opts.jobs);
  Emitter emit(out_dir_for(cfg, opts), opts.timestamp, log);
  emit.run_reports("train", groups);
  emit.runs_csv("runs.csv", groups);
  emit.json_file("config.json", to_json(cfg));
  print_group_summary(log, groups.front());
  return finish(groups, log);
}

int cmd_compare(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& log) {
  const ExperimentConfig base = named(lora_baseline(cfg), "lora");
  const ExperimentConfig ours = named(loran_variant(cfg), "loran-" + cfg.adapter.activation.label());
  const auto groups = run_matrix({base, ours}, cfg.seeds, opts.jobs);

  Emitter emit(out_dir_for(cfg, opts), opts.timestamp, log);
  emit.run_reports("compare", groups);
  emit.runs_csv("runs.csv", groups);

  // baseline vs LoRAN with a delta column, per seed and for the seed mean
  Csv table({"seed", "metric", "lora", "loran", "delta"});
  json rows = json::array();
  for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
    const RunReport &a = groups[0][s], &b = groups[1][s];
    table.row({std::to_string(cfg.seeds[s]), a.metric_name, num(a.final_metric), num(b.final_metric),
               num(b.final_metric - a.final_metric)});
    rows.push_back({{"seed", cfg.seeds[s]}, {"lora", a.final_metric}, {"loran", b.final_metric},
                    {"delta", b.final_metric - a.final_metric}});
  }
  const double ma = mean(metrics(groups[0])), mb = mean(metrics(groups[1]));
  table.row({"mean", groups[0].front().metric_name, num(ma), num(mb), num(mb - ma)});
  emit.csv("compare.csv", table);
  emit.csv("loss_curves.csv", loss_curves_csv(groups));

  Csv losses({"label", "mean_train_loss", "final_train_loss"});
  for (const auto& g : groups) {
    std::vector<double> m, f;
    for (const auto& r : g) {
      m.push_back(r.mean_loss());
      f.push_back(r.final_loss());
    }
    losses.row({g.front().label, num(mean(m)), num(mean(f))});
  }
  emit.csv("train_loss.csv", losses);
  if (cfg.seeds.size() >= 2) emit.csv("variance.csv", variance_csv(groups));
  emit.json_file("compare.json", {{"config", to_json(cfg)},
                                  {"metric", groups[0].front().metric_name},
                                  {"higher_is_better", groups[0].front().higher_is_better},
                                  {"lora_mean", ma},
                                  {"loran_mean", mb},
                                  {"delta", mb - ma},
                                  {"per_seed", rows}});
  for (const auto& g : groups) print_group_summary(log, g);
  log << "delta (loran - lora): " << num(mb - ma) << "\n";
  return finish(groups, log);
}

int cmd_ablate(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& log) {
  const auto configs = ablation_configs(cfg);
  const auto groups = run_matrix(configs, cfg.seeds, opts.jobs);

  Emitter emit(out_dir_for(cfg, opts), opts.timestamp, log);
  emit.run_reports("ablate", groups);
  emit.runs_csv("runs.csv", groups);
  Csv table({"activation", "runs", "diverged", "metric", "metric_mean", "metric_variance", "final_loss_mean",
             "mean_loss_mean"});
  json rows = json::array();
  for (std::size_t c = 0; c < configs.size(); ++c) {
    const auto& runs = groups[c];
    std::vector<double> fl, ml;
    std::size_t div = 0;
    for (const auto& r : runs) {
      fl.push_back(r.final_loss());
      ml.push_back(r.mean_loss());
      div += r.diverged ? 1 : 0;
    }
    const auto [m, v] = mean_var(metrics(runs));
    const std::string act = configs[c].adapter.activation.label();
    table.row({act, std::to_string(runs.size()), std::to_string(div), runs.front().metric_name, num(m), num(v),
               num(mean(fl)), num(mean(ml))});
    rows.push_back({{"activation", to_json(configs[c].adapter.activation)},
                    {"runs", runs.size()},
                    {"diverged", div},
                    {"metric_mean", std::isfinite(m) ? json(m) : json(nullptr)}});
    print_group_summary(log, runs);
  }
  emit.csv("ablation.csv", table);
  emit.csv("loss_curves.csv", loss_curves_csv(groups));
  emit.json_file("ablation.json", {{"config", to_json(cfg)}, {"rows", rows}});
  return finish(groups, log);
}

int cmd_grid(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& log) {
  const GridResult grid = grid_search(cfg.grid.amplitudes, cfg.grid.omegas, cfg, cfg.seeds, opts.jobs);

  Emitter emit(out_dir_for(cfg, opts), opts.timestamp, log);
  emit.run_reports("grid", grid.runs);
  emit.runs_csv("runs.csv", grid.runs);
  Csv table({"amplitude", "omega", "seeds", "diverged", "metric", "value", "best"});
  for (std::size_t i = 0; i < grid.amplitudes.size(); ++i) {
    for (std::size_t j = 0; j < grid.omegas.size(); ++j) {
      const bool best = i == grid.best_amplitude && j == grid.best_omega;
      table.row({num(grid.amplitudes[i]), num(grid.omegas[j]), std::to_string(grid.seeds_per_cell),
                 std::to_string(grid.diverged[i][j]), grid.metric_name, num(grid.metric[i][j]), best ? "1" : "0"});
    }
  }
  emit.csv("grid.csv", table);
  json j = to_json(grid, opts.timestamp);
  j["config"] = to_json(cfg);
  emit.json_file("grid.json", j);
  log << "grid " << grid.amplitudes.size() << "x" << grid.omegas.size() << " over " << grid.seeds_per_cell
      << " seed(s); best " << grid.metric_name << " " << num(grid.metric[grid.best_amplitude][grid.best_omega])
      << " at A=" << num(grid.amplitudes[grid.best_amplitude]) << ", w=" << num(grid.omegas[grid.best_omega]) << "\n";
  return finish(grid.runs, log);
}

int cmd_spectrum(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& log) {
  ExperimentConfig full = named(cfg, "full");
  full.adapter.kind = AdapterKind::Full;
  const std::vector<ExperimentConfig> configs{named(lora_baseline(cfg), "lora"),
                                              named(loran_variant(cfg), "loran-" + cfg.adapter.activation.label()),
                                              full};
  std::vector<std::vector<RunReport>> groups(configs.size(), std::vector<RunReport>(cfg.seeds.size()));
  std::vector<std::vector<Tensor>> deltas(configs.size(), std::vector<Tensor>(cfg.seeds.size(), Tensor::zeros(1, 1)));
  parallel_for(configs.size() * cfg.seeds.size(), opts.jobs, [&](std::size_t idx) {
    const std::size_t c = idx / cfg.seeds.size(), s = idx % cfg.seeds.size();
    TrainResult res = run_experiment(configs[c], cfg.seeds[s]);
    deltas[c][s] = delta_weight(res.adapter);
    groups[c][s] = std::move(res.report);
  });

  Emitter emit(out_dir_for(cfg, opts), opts.timestamp, log);
  emit.run_reports("spectrum", groups);
  emit.runs_csv("runs.csv", groups);
  Csv values({"seed", "adapter", "index", "singular_value"});
  Csv hist({"seed", "adapter", "bin_lo", "bin_hi", "count"});
  Csv ranks({"seed", "adapter", "rank_tol", "numerical_rank", "effective_rank"});
  json per_seed = json::array();
  for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
    const SpectrumComparison cmp = compare_spectra(deltas[0][s], deltas[1][s], deltas[2][s], cfg.adapter.rank,
                                                   cfg.spectrum.rank_tol, cfg.spectrum.edges);
    const std::string seed = std::to_string(cfg.seeds[s]);
    for (const SpectrumReport* rep : {&cmp.lora, &cmp.loran, &cmp.full}) {
      for (std::size_t i = 0; i < rep->values.size(); ++i)
        values.row({seed, rep->label, std::to_string(i), num(rep->values[i])});
      for (std::size_t b = 0; b < rep->counts.size(); ++b) {
        const std::string lo = b == 0 ? "-inf" : num(rep->edges[b - 1]);
        const std::string hi = b == rep->edges.size() ? "inf" : num(rep->edges[b]);
        hist.row({seed, rep->label, lo, hi, std::to_string(rep->counts[b])});
      }
      ranks.row({seed, rep->label, num(rep->rank_tol), std::to_string(rep->numerical_rank),
                 rep->effective_rank ? num(*rep->effective_rank) : ""});
    }
    per_seed.push_back({{"seed", cfg.seeds[s]},
                        {"lora", to_json(cmp.lora)},
                        {"loran", to_json(cmp.loran)},
                        {"full", to_json(cmp.full)},
                        {"summary", cmp.summary}});
    log << "seed " << seed << ":\n";
    for (const auto& line : cmp.summary) log << "  " << line << "\n";
  }
  emit.csv("spectrum.csv", values);
  emit.csv("spectrum_histogram.csv", hist);
  emit.csv("spectrum_rank.csv", ranks);
  emit.json_file("spectrum.json", {{"config", to_json(cfg)}, {"seeds", per_seed}});
  return finish(groups, log);
}

int cmd_rank_study(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& log) {
  const auto [d, k] = cfg.adapted_shape();
  std::vector<ExperimentConfig> configs;
  for (std::size_t r : cfg.ranks) {
    ExperimentConfig at = cfg;
    at.adapter.rank = r;
    try {
      at.adapter.validate(d, k);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("rank_study: " + std::string(e.what()));
    }
    configs.push_back(named(lora_baseline(at), "lora-r" + std::to_string(r)));
    configs.push_back(named(loran_variant(at), "loran-r" + std::to_string(r)));
  }
  const auto groups = run_matrix(configs, cfg.seeds, opts.jobs);

  Emitter emit(out_dir_for(cfg, opts), opts.timestamp, log);
  emit.run_reports("rank-study", groups);
  emit.runs_csv("runs.csv", groups);
  Csv table({"rank", "adapter", "trainable_parameters", "runs", "metric", "metric_mean", "metric_variance",
             "mean_loss_mean"});
  json rows = json::array();
  for (std::size_t c = 0; c < configs.size(); ++c) {
    const auto& runs = groups[c];
    std::vector<double> ml;
    for (const auto& r : runs) ml.push_back(r.mean_loss());
    const auto [m, v] = mean_var(metrics(runs));
    const std::string kind(to_string(configs[c].adapter.kind));
    table.row({std::to_string(configs[c].adapter.rank), kind, std::to_string(runs.front().trainable_parameters),
               std::to_string(runs.size()), runs.front().metric_name, num(m), num(v), num(mean(ml))});
    rows.push_back({{"rank", configs[c].adapter.rank},
                    {"adapter", kind},
                    {"trainable_parameters", runs.front().trainable_parameters},
                    {"metric_mean", std::isfinite(m) ? json(m) : json(nullptr)}});
    print_group_summary(log, runs);
  }
  emit.csv("rank_study.csv", table);
  emit.json_file("rank_study.json", {{"config", to_json(cfg)}, {"rows", rows}});
  return finish(groups, log);
}

void cmd_print_defaults(std::ostream& out) { out << to_json(ExperimentConfig{}).dump(2) << "\n"; }

}  // namespace loran
