// Copyright 2026 The LoRAN Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "loranlab/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "loranlab/adapters.hpp"
#include "loranlab/autodiff.hpp"
#include "loranlab/rng.hpp"

namespace loran {

namespace {

constexpr double kOpStep = 1e-4;

struct Harness {
  const GradcheckOptions& options;
  std::vector<GradcheckEntry>& out;

  // Runs `check(seed)` over every seed and records the worst error under `name`.
  void run(const std::string& name, double step, const std::function<double(std::uint64_t)>& check) {
    double worst = 0.0;
    for (std::size_t s = 0; s < options.seeds; ++s) worst = std::max(worst, check(1000 + s));
    out.push_back({name, step, worst, worst < options.threshold});
  }

  Var activation(const Var& x, const ActivationSpec& spec) const {
    if (!options.inject_wrong_derivative) return map_unary(x, spec);
    return map_unary(x, spec, [spec](double v) { return 1.01 * activation_deriv(spec, v); });
  }
};

// Weighted sum keeps every output coordinate in play with a generic gradient.
Var weighted_sum(const Var& y, const Tensor& weights) { return sum(hadamard(y, y.tape().leaf(weights))); }

void op_checks(Harness& h) {
  auto uniform = [](Rng& rng, std::size_t r, std::size_t c) { return rng.uniform_matrix(r, c, -2.0, 2.0); };

  h.run("matmul(x, C)", kOpStep, [&](std::uint64_t seed) {
    Rng rng(seed);
    const Tensor x = uniform(rng, 3, 4), c = uniform(rng, 4, 2), w = uniform(rng, 3, 2);
    return finite_difference_check([&](Tape& t, const Var& v) { return weighted_sum(matmul(v, t.leaf(c)), w); }, x, kOpStep);
  });
  h.run("matmul(C, x)", kOpStep, [&](std::uint64_t seed) {
    Rng rng(seed);
    const Tensor x = uniform(rng, 4, 2), c = uniform(rng, 3, 4), w = uniform(rng, 3, 2);
    return finite_difference_check([&](Tape& t, const Var& v) { return weighted_sum(matmul(t.leaf(c), v), w); }, x, kOpStep);
  });
  h.run("add", kOpStep, [&](std::uint64_t seed) {
    Rng rng(seed);
    const Tensor x = uniform(rng, 3, 3), c = uniform(rng, 3, 3), w = uniform(rng, 3, 3);
    return finite_difference_check([&](Tape& t, const Var& v) { return weighted_sum(add(v, t.leaf(c)), w); }, x, kOpStep);
  });
  h.run("sub", kOpStep, [&](std::uint64_t seed) {
    Rng rng(seed);
    const Tensor x = uniform(rng, 3, 3), c = uniform(rng, 3, 3), w = uniform(rng, 3, 3);
    return finite_difference_check([&](Tape& t, const Var& v) { return weighted_sum(sub(t.leaf(c), v), w); }, x, kOpStep);
  });
  h.run("hadamard fan-out", kOpStep, [&](std::uint64_t seed) {
    Rng rng(seed);
    const Tensor x = uniform(rng, 3, 3), w = uniform(rng, 3, 3);
    return finite_difference_check([&](Tape&, const Var& v) { return weighted_sum(hadamard(v, v), w); }, x, kOpStep);
  });
  h.run("scale", kOpStep, [&](std::uint64_t seed) {
    Rng rng(seed);
    const Tensor x = uniform(rng, 2, 5), w = uniform(rng, 2, 5);
    return finite_difference_check([&](Tape&, const Var& v) { return weighted_sum(scale(v, -2.5), w); }, x, kOpStep);
  });
  h.run("transpose", kOpStep, [&](std::uint64_t seed) {
    Rng rng(seed);
    const Tensor x = uniform(rng, 2, 3), w = uniform(rng, 3, 2);
    return finite_difference_check([&](Tape&, const Var& v) { return weighted_sum(transpose(v), w); }, x, kOpStep);
  });
  h.run("add_column (bias)", kOpStep, [&](std::uint64_t seed) {
    Rng rng(seed);
    const Tensor x = Tensor({3}, std::vector<double>(uniform(rng, 1, 3).values()));
    const Tensor c = uniform(rng, 3, 4), w = uniform(rng, 3, 4);
    return finite_difference_check([&](Tape& t, const Var& v) { return weighted_sum(add_column(t.leaf(c), v), w); }, x,
                                   kOpStep);
  });
  h.run("matmul fan-out x x^T", kOpStep, [&](std::uint64_t seed) {
    Rng rng(seed);
    const Tensor x = uniform(rng, 3, 4), w = uniform(rng, 3, 3);
    return finite_difference_check([&](Tape&, const Var& v) { return weighted_sum(matmul(v, transpose(v)), w); }, x,
                                   kOpStep);
  });
  h.run("softmax_cross_entropy", kOpStep, [&](std::uint64_t seed) {
    Rng rng(seed);
    const Tensor x = uniform(rng, 5, 3);
    std::vector<int> labels(5);
    for (auto& y : labels) y = static_cast<int>(rng.below(3));
    return finite_difference_check([&](Tape&, const Var& v) { return softmax_cross_entropy(v, labels); }, x, kOpStep);
  });
  h.run("map_unary(tanh)", kOpStep, [&](std::uint64_t seed) {
    Rng rng(seed);
    const Tensor x = uniform(rng, 3, 3), w = uniform(rng, 3, 3);
    return finite_difference_check(
        [&](Tape&, const Var& v) { return weighted_sum(h.activation(v, ActivationSpec::tanh()), w); }, x, kOpStep);
  });
}

void activation_checks(Harness& h, bool sinter_only) {
  for (const ActivationSpec& spec : gradcheck_activations()) {
    if (sinter_only && spec.kind != ActivationKind::Sinter) continue;
    const double step = gradcheck_step(spec);
    h.run("activation " + spec.label(), step, [&](std::uint64_t seed) {
      Rng rng(seed);
      const Tensor x = rng.uniform_matrix(4, 4, -2.0, 2.0);
      const Tensor w = rng.uniform_matrix(4, 4, -2.0, 2.0);
      // One element at a time: a summed loss would bury derivatives like swish-25 at x = -2
      // (about 1e-21) under the rounding noise of the other terms.
      double worst = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        double v = x.data()[i];
        if (std::abs(v) < 1e-2) v = v < 0.0 ? -0.5 : 0.5;  // keep central differences off the ReLU kink
        const Tensor point = Tensor::scalar(v), weight = Tensor::scalar(w.data()[i]);
        worst = std::max(worst, finite_difference_check(
                                    [&](Tape&, const Var& p) { return weighted_sum(h.activation(p, spec), weight); },
                                    point, step));
      }
      return worst;
    });
  }
}

struct AdapterCase {
  std::string name;
  Adapter adapter;
  double step;
};

std::vector<AdapterCase> adapter_cases(bool sinter_only) {
  std::vector<AdapterCase> cases;
  if (!sinter_only) cases.push_back({"lora", LoRAAdapter{}, kOpStep});
  for (const ActivationSpec& spec : gradcheck_activations()) {
    if (sinter_only && spec.kind != ActivationKind::Sinter) continue;
    for (bool inside : {true, false}) {
      cases.push_back({"loran " + spec.label() + (inside ? " scale-inside" : " scale-outside"),
                       LoRANAdapter{LoRAAdapter{}, spec, inside}, gradcheck_step(spec)});
    }
  }
  return cases;
}

void adapter_checks(Harness& h, bool sinter_only) {
  constexpr std::size_t d = 6, k = 5, r = 2, n = 4;
  for (AdapterCase& c : adapter_cases(sinter_only)) {
    for (int which = 0; which < 2; ++which) {
      const std::string name = "adapter_forward[" + c.name + "] d/d" + (which == 0 ? "B" : "A");
      h.run(name, c.step, [&](std::uint64_t seed) {
        Rng rng(seed);
        LoRAAdapter factors;
        factors.rank = r;
        factors.alpha = 3.0;
        // nonzero B so that both factor gradients are generic; reject products near the ReLU kink
        for (int attempt = 0; attempt < 100; ++attempt) {
          factors.b = rng.normal_matrix(d, r, 0.7);
          factors.a = rng.normal_matrix(r, k, 0.7);
          const Tensor m = matmul(factors.b, factors.a);
          const bool clear = std::all_of(m.data().begin(), m.data().end(), [](double v) { return std::abs(v) > 1e-2; });
          if (clear) break;
        }
        FrozenLinear layer{rng.normal_matrix(d, k, 0.5), Tensor({d})};
        for (auto& v : layer.bias->data()) v = rng.normal();
        const Tensor x = rng.uniform_matrix(k, n, -1.0, 1.0);
        const Tensor w = rng.uniform_matrix(d, n, -1.0, 1.0);

        Adapter adapter = c.adapter;
        if (auto* lora = std::get_if<LoRAAdapter>(&adapter)) {
          *lora = factors;
        } else {
          std::get<LoRANAdapter>(adapter).inner = factors;
        }
        const Tensor& start = which == 0 ? factors.b : factors.a;
        return finite_difference_check(
            [&](Tape& t, const Var& v) {
              const Var b = which == 0 ? v : t.leaf(factors.b);
              const Var a = which == 0 ? t.leaf(factors.a) : v;
              const Var params[] = {b, a};
              const Var input = t.leaf(x);
              const auto* loran = std::get_if<LoRANAdapter>(&adapter);
              if (!h.options.inject_wrong_derivative || !loran) {
                return weighted_sum(adapter_forward(t, layer, adapter, params, input), w);
              }
              // adapter_forward wiring with the activation routed through the fault hook
              const double s = loran->inner.scale();
              const Var delta = loran->scale_inside ? h.activation(scale(matmul(b, a), s), loran->activation)
                                                    : scale(h.activation(matmul(b, a), loran->activation), s);
              return weighted_sum(add(layer.forward(t, input), matmul(delta, input)), w);
            },
            start, c.step);
      });
    }
  }
}

}  // namespace

GradcheckScope parse_gradcheck_scope(std::string_view name) {
  if (name == "all") return GradcheckScope::All;
  if (name == "ops") return GradcheckScope::Ops;
  if (name == "activations") return GradcheckScope::Activations;
  if (name == "adapters") return GradcheckScope::Adapters;
  if (name == "sinter-only") return GradcheckScope::SinterOnly;
  throw std::invalid_argument("unknown gradcheck scope '" + std::string(name) +
                              "' (expected all, ops, activations, adapters, sinter-only)");
}

std::string_view to_string(GradcheckScope scope) {
  switch (scope) {
    case GradcheckScope::All: return "all";
    case GradcheckScope::Ops: return "ops";
    case GradcheckScope::Activations: return "activations";
    case GradcheckScope::Adapters: return "adapters";
    case GradcheckScope::SinterOnly: return "sinter-only";
  }
  return "unknown";
}

double gradcheck_step(const ActivationSpec& spec) {
  if (spec.kind == ActivationKind::Sinter) return std::min(kOpStep, 5e-4 / spec.omega);
  return kOpStep;
}

std::vector<ActivationSpec> gradcheck_activations() {
  return {ActivationSpec::identity(),       ActivationSpec::sigmoid(),        ActivationSpec::relu(),
          ActivationSpec::tanh(),           ActivationSpec::swish(1.0),       ActivationSpec::swish(25.0),
          ActivationSpec::sinter(5e-5, 1e4), ActivationSpec::sinter(0.5, 5e3)};
}

std::vector<GradcheckEntry> run_gradcheck_suite(const GradcheckOptions& options) {
  std::vector<GradcheckEntry> entries;
  Harness h{options, entries};
  const auto scope = options.scope;
  const bool sinter_only = scope == GradcheckScope::SinterOnly;
  if (scope == GradcheckScope::All || scope == GradcheckScope::Ops) op_checks(h);
  if (scope == GradcheckScope::All || scope == GradcheckScope::Activations || sinter_only) activation_checks(h, sinter_only);
  if (scope == GradcheckScope::All || scope == GradcheckScope::Adapters || sinter_only) adapter_checks(h, sinter_only);
  return entries;
}

}  // namespace loran
