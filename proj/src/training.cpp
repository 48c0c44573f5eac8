// Copyright 2026 The LoRAN Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "loranlab/training.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "loranlab/rng.hpp"

namespace loran {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// JSON has no NaN; null stands in for it.
nlohmann::json number_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

double number_from(const nlohmann::json& j) { return j.is_null() ? kNaN : j.get<double>(); }

bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

std::vector<Tensor> leaf_grads(const std::vector<Var>& leaves) {
  std::vector<Tensor> grads;
  grads.reserve(leaves.size());
  for (const Var& v : leaves) grads.push_back(v.grad());
  return grads;
}

void apply_step(Adapter& adapter, const std::vector<Tensor>& grads, AdamState& state, const TrainConfig& cfg) {
  auto params = trainable_parameters(adapter);
  if (cfg.optimizer == OptimizerKind::AdamW) {
    adamw_step(params, grads, state, cfg);
  } else {
    sgd_step(params, grads, cfg);
  }
}

void mark_diverged(RunReport& report, std::size_t epoch, std::size_t epochs) {
  report.diverged = true;
  report.diverged_epoch = epoch;
  report.epoch_losses.resize(epochs, kNaN);
}

nlohmann::json train_config_echo(const TrainConfig& cfg) {
  return {{"optimizer", std::string(to_string(cfg.optimizer))},
          {"lr", cfg.lr},
          {"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"beta1", cfg.beta1},
          {"beta2", cfg.beta2},
          {"eps", cfg.eps},
          {"weight_decay", cfg.weight_decay},
          {"eval_every", cfg.eval_every}};
}

}  // namespace

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::SGD ? "sgd" : "adamw";
}

OptimizerKind parse_optimizer_kind(std::string_view name) {
  if (name == "sgd") return OptimizerKind::SGD;
  if (name == "adamw") return OptimizerKind::AdamW;
  throw std::invalid_argument("unknown optimizer '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("learning rate must be finite and >= 0");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (eval_every < 1) throw std::invalid_argument("eval_every must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("AdamW betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw std::invalid_argument("AdamW eps must be > 0");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be >= 0");
}

void adamw_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
                const TrainConfig& cfg) {
  if (params.size() != grads.size()) throw std::invalid_argument("adamw_step: params/grads count differ");
  if (state.m.empty()) {
    for (const Tensor* p : params) {
      state.m.emplace_back(p->shape(), 0.0);
      state.v.emplace_back(p->shape(), 0.0);
    }
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& w = *params[p];
    const Tensor& g = grads[p];
    if (w.shape() != g.shape()) {
      throw DimensionError("adamw_step: param " + w.shape_string() + " vs grad " + g.shape_string());
    }
    Tensor& m = state.m[p];
    Tensor& v = state.v[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (cfg.weight_decay != 0.0) w[i] -= cfg.lr * cfg.weight_decay * w[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      w[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

void sgd_step(std::span<Tensor* const> params, std::span<const Tensor> grads, const TrainConfig& cfg) {
  if (params.size() != grads.size()) throw std::invalid_argument("sgd_step: params/grads count differ");
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& w = *params[p];
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= cfg.lr * grads[p][i];
  }
}

double RunReport::mean_loss() const {
  if (epoch_losses.empty()) return 0.0;
  return mean(epoch_losses);
}

bool RunReport::same_outcome(const RunReport& o) const {
  return label == o.label && seed == o.seed && bit_equal(epoch_losses, o.epoch_losses) &&
         evals.size() == o.evals.size() &&
         std::equal(evals.begin(), evals.end(), o.evals.begin(),
                    [](const auto& a, const auto& b) { return a.first == b.first && bit_equal(a.second, b.second); }) &&
         metric_name == o.metric_name && bit_equal(final_metric, o.final_metric) &&
         higher_is_better == o.higher_is_better && diverged == o.diverged && diverged_epoch == o.diverged_epoch &&
         trainable_parameters == o.trainable_parameters && frozen_fingerprint == o.frozen_fingerprint &&
         config == o.config;
}

nlohmann::json to_json(const RunReport& r, bool include_timing) {
  nlohmann::json losses = nlohmann::json::array();
  for (double v : r.epoch_losses) losses.push_back(number_or_null(v));
  nlohmann::json evals = nlohmann::json::array();
  for (const auto& [epoch, value] : r.evals) evals.push_back({epoch, number_or_null(value)});
  nlohmann::json j = {
      {"label", r.label},
      {"seed", r.seed},
      {"metric", r.metric_name},
      {"final_metric", number_or_null(r.final_metric)},
      {"higher_is_better", r.higher_is_better},
      {"epoch_losses", std::move(losses)},
      {"evals", std::move(evals)},
      {"diverged", r.diverged},
      {"diverged_epoch", r.diverged_epoch ? nlohmann::json(*r.diverged_epoch) : nlohmann::json(nullptr)},
      {"trainable_parameters", r.trainable_parameters},
      {"frozen_fingerprint", r.frozen_fingerprint},
      {"config", r.config},
  };
  if (include_timing) j["wall_seconds"] = r.wall_seconds;
  return j;
}

RunReport run_report_from_json(const nlohmann::json& j) {
  RunReport r;
  r.label = j.at("label").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.metric_name = j.at("metric").get<std::string>();
  r.final_metric = number_from(j.at("final_metric"));
  r.higher_is_better = j.at("higher_is_better").get<bool>();
  for (const auto& v : j.at("epoch_losses")) r.epoch_losses.push_back(number_from(v));
  for (const auto& e : j.at("evals")) r.evals.emplace_back(e.at(0).get<std::size_t>(), number_from(e.at(1)));
  r.diverged = j.at("diverged").get<bool>();
  if (!j.at("diverged_epoch").is_null()) r.diverged_epoch = j.at("diverged_epoch").get<std::size_t>();
  r.trainable_parameters = j.at("trainable_parameters").get<std::size_t>();
  r.frozen_fingerprint = j.at("frozen_fingerprint").get<std::uint64_t>();
  r.config = j.at("config");
  if (j.contains("wall_seconds")) r.wall_seconds = j.at("wall_seconds").get<double>();
  return r;
}

TrainResult train_classifier(const ToyClassifier& model, const Dataset& data, Adapter adapter,
                             const TrainConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  RunReport report;
  report.seed = seed;
  report.metric_name = "accuracy";
  report.higher_is_better = true;
  report.trainable_parameters = parameter_count(adapter);
  report.config = {{"train", train_config_echo(cfg)}};
  const std::uint64_t frozen_before = model.fingerprint();

  Rng shuffle_rng(derive_seed(seed, 2));
  std::vector<std::size_t> order(data.size());
  AdamState state;
  for (std::size_t epoch = 0; epoch < cfg.epochs && !report.diverged; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const Dataset batch = data.subset(std::span<const std::size_t>(order).subspan(begin, end - begin));
      Tape tape;
      const auto leaves = parameter_leaves(tape, adapter);
      Var loss = softmax_cross_entropy(model.logits(tape, adapter, leaves, tape.leaf(batch.features)), batch.labels);
      const double value = loss.value()[0];
      if (!std::isfinite(value)) {
        mark_diverged(report, epoch, cfg.epochs);
        break;
      }
      tape.backward(loss);
      apply_step(adapter, leaf_grads(leaves), state, cfg);
      loss_sum += value * static_cast<double>(end - begin);
    }
    if (report.diverged) break;
    report.epoch_losses.push_back(loss_sum / static_cast<double>(data.size()));
    if ((epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs) {
      report.evals.emplace_back(epoch + 1, model.accuracy(adapter, data));
    }
  }
  report.final_metric = model.accuracy(adapter, data);
  if (model.fingerprint() != frozen_before) throw std::logic_error("frozen classifier weights changed during training");
  report.frozen_fingerprint = frozen_before;
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(report), std::move(adapter)};
}

TrainResult train_teacher(const Tensor& target, Adapter adapter, const TrainConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  RunReport report;
  report.seed = seed;
  report.metric_name = "teacher_loss";
  report.higher_is_better = false;
  report.trainable_parameters = parameter_count(adapter);
  report.config = {{"train", train_config_echo(cfg)}};
  report.frozen_fingerprint = fingerprint(target.data());

  AdamState state;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Tape tape;
    const auto leaves = parameter_leaves(tape, adapter);
    Var loss = teacher_loss(delta_weight(tape, adapter, leaves), target);
    const double value = loss.value()[0];
    if (!std::isfinite(value)) {
      mark_diverged(report, epoch, cfg.epochs);
      break;
    }
    tape.backward(loss);
    apply_step(adapter, leaf_grads(leaves), state, cfg);
    report.epoch_losses.push_back(value);
    if ((epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs) {
      report.evals.emplace_back(epoch + 1, teacher_loss(adapter, target));
    }
  }
  const double final_loss = teacher_loss(adapter, target);
  if (!std::isfinite(final_loss) && !report.diverged) mark_diverged(report, cfg.epochs - 1, cfg.epochs);
  report.final_metric = final_loss;
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(report), std::move(adapter)};
}

void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
}

double mean(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("mean of an empty set");
  double m = 0.0;
  std::size_t n = 0;
  for (double v : values) m += (v - m) / static_cast<double>(++n);
  return m;
}

double sample_variance(std::span<const double> values) {
  if (values.size() < 2) throw std::invalid_argument("sample variance needs at least 2 values");
  double m = 0.0, m2 = 0.0;
  std::size_t n = 0;
  for (double v : values) {
    ++n;
    const double delta = v - m;
    m += delta / static_cast<double>(n);
    m2 += delta * (v - m);
  }
  return m2 / static_cast<double>(n - 1);
}

std::vector<VarianceRow> variance_report(const std::vector<std::vector<RunReport>>& groups) {
  std::vector<VarianceRow> rows;
  rows.reserve(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& runs = groups[g];
    if (runs.size() < 2) {
      throw std::invalid_argument("variance report needs at least 2 seeds per config (group " + std::to_string(g) +
                                  " has " + std::to_string(runs.size()) + ")");
    }
    std::vector<double> metrics, final_losses, mean_losses;
    VarianceRow row;
    row.label = runs.front().label;
    row.runs = runs.size();
    for (const auto& r : runs) {
      metrics.push_back(r.final_metric);
      final_losses.push_back(r.final_loss());
      mean_losses.push_back(r.mean_loss());
      row.diverged += r.diverged ? 1 : 0;
    }
    row.metric_mean = mean(metrics);
    row.metric_variance = sample_variance(metrics);
    row.final_loss_mean = mean(final_losses);
    row.final_loss_variance = sample_variance(final_losses);
    row.mean_loss_mean = mean(mean_losses);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace loran
