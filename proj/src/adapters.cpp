// Copyright 2026 The LoRAN Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "loranlab/adapters.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "loranlab/rng.hpp"

namespace loran {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_params(std::span<const Var> params, std::size_t n) {
  if (params.size() != n) {
    throw std::invalid_argument("adapter expects " + std::to_string(n) + " parameter leaves, got " +
                                std::to_string(params.size()));
  }
}

}  // namespace

std::uint64_t FrozenLinear::fingerprint() const {
  std::uint64_t h = loran::fingerprint(weight.data());
  if (bias) h = loran::fingerprint(bias->data(), h);
  return h;
}

Tensor FrozenLinear::forward(const Tensor& x) const {
  Tensor out = matmul(weight, x);
  if (bias) {
    for (std::size_t i = 0; i < out.rows(); ++i)
      for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += (*bias)[i];
  }
  return out;
}

Var FrozenLinear::forward(Tape& tape, const Var& x) const {
  Var out = matmul(tape.leaf(weight), x);
  if (bias) out = add_column(out, tape.leaf(*bias));
  return out;
}

std::string_view to_string(AdapterKind kind) {
  switch (kind) {
    case AdapterKind::LoRA: return "lora";
    case AdapterKind::LoRAN: return "loran";
    case AdapterKind::Full: return "full";
  }
  return "unknown";
}

AdapterKind parse_adapter_kind(std::string_view name) {
  if (name == "lora") return AdapterKind::LoRA;
  if (name == "loran") return AdapterKind::LoRAN;
  if (name == "full") return AdapterKind::Full;
  throw std::invalid_argument("unknown adapter kind '" + std::string(name) + "'");
}

void AdapterConfig::validate(std::size_t d, std::size_t k) const {
  if (kind == AdapterKind::Full) return;
  if (rank == 0 || rank > std::min(d, k)) {
    throw std::invalid_argument("adapter rank " + std::to_string(rank) + " must lie in [1, min(" +
                                std::to_string(d) + ", " + std::to_string(k) + ")]");
  }
  if (!std::isfinite(alpha)) throw std::invalid_argument("adapter alpha must be finite");
  if (kind == AdapterKind::LoRAN) activation.validate();
}

LoRAAdapter init_adapter(std::size_t d, std::size_t k, std::size_t r, double alpha, std::uint64_t seed) {
  if (r == 0 || r > std::min(d, k)) {
    throw std::invalid_argument("invalid adapter rank " + std::to_string(r) + " for " +
                                std::to_string(d) + "x" + std::to_string(k));
  }
  Rng rng(seed);
  LoRAAdapter ad;
  ad.b = Tensor::zeros(d, r);
  ad.a = rng.normal_matrix(r, k, 1.0 / std::sqrt(static_cast<double>(r)));
  ad.rank = r;
  ad.alpha = alpha;
  return ad;
}

Adapter make_adapter(const AdapterConfig& cfg, std::size_t d, std::size_t k, std::uint64_t seed) {
  cfg.validate(d, k);
  switch (cfg.kind) {
    case AdapterKind::LoRA:
      return init_adapter(d, k, cfg.rank, cfg.alpha, seed);
    case AdapterKind::LoRAN:
      return LoRANAdapter{init_adapter(d, k, cfg.rank, cfg.alpha, seed), cfg.activation, cfg.scale_inside};
    case AdapterKind::Full:
      return FullAdapter{Tensor::zeros(d, k)};
  }
  throw std::logic_error("unreachable adapter kind");
}

std::vector<Tensor*> trainable_parameters(Adapter& adapter) {
  return std::visit(overloaded{
                        [](LoRAAdapter& ad) { return std::vector<Tensor*>{&ad.b, &ad.a}; },
                        [](LoRANAdapter& ad) { return std::vector<Tensor*>{&ad.inner.b, &ad.inner.a}; },
                        [](FullAdapter& ad) { return std::vector<Tensor*>{&ad.delta}; },
                    },
                    adapter);
}

std::vector<const Tensor*> trainable_parameters(const Adapter& adapter) {
  return std::visit(
      overloaded{
          [](const LoRAAdapter& ad) { return std::vector<const Tensor*>{&ad.b, &ad.a}; },
          [](const LoRANAdapter& ad) { return std::vector<const Tensor*>{&ad.inner.b, &ad.inner.a}; },
          [](const FullAdapter& ad) { return std::vector<const Tensor*>{&ad.delta}; },
      },
      adapter);
}

std::size_t parameter_count(const Adapter& adapter) {
  std::size_t n = 0;
  for (const Tensor* t : trainable_parameters(adapter)) n += t->size();
  return n;
}

std::vector<Var> parameter_leaves(Tape& tape, const Adapter& adapter) {
  std::vector<Var> leaves;
  for (const Tensor* t : trainable_parameters(adapter)) leaves.push_back(tape.leaf(*t, true));
  return leaves;
}

Var delta_weight(Tape& /*tape*/, const Adapter& adapter, std::span<const Var> params) {
  return std::visit(overloaded{
                        [&](const LoRAAdapter& ad) {
                          require_params(params, 2);
                          return scale(matmul(params[0], params[1]), ad.scale());
                        },
                        [&](const LoRANAdapter& ad) {
                          require_params(params, 2);
                          const double s = ad.inner.scale();
                          Var product = matmul(params[0], params[1]);
                          if (ad.scale_inside) return map_unary(scale(product, s), ad.activation);
                          return scale(map_unary(product, ad.activation), s);
                        },
                        [&](const FullAdapter&) {
                          require_params(params, 1);
                          return params[0];
                        },
                    },
                    adapter);
}

Tensor delta_weight(const Adapter& adapter) {
  Tape tape;
  std::vector<Var> leaves;
  for (const Tensor* t : trainable_parameters(adapter)) leaves.push_back(tape.leaf(*t));
  return delta_weight(tape, adapter, leaves).value();
}

Var adapter_forward(Tape& tape, const FrozenLinear& layer, const Adapter& adapter,
                    std::span<const Var> params, const Var& x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 || xv.rows() != layer.in_features()) {
    throw DimensionError("adapter_forward shape mismatch: weight " + layer.weight.shape_string() +
                         " vs input " + xv.shape_string());
  }
  Var base = layer.forward(tape, x);
  Var delta = delta_weight(tape, adapter, params);
  if (delta.value().shape() != layer.weight.shape()) {
    throw DimensionError("adapter update " + delta.value().shape_string() +
                         " does not match frozen weight " + layer.weight.shape_string());
  }
  return add(base, matmul(delta, x));
}

Tensor adapter_forward(const FrozenLinear& layer, const Adapter& adapter, const Tensor& x) {
  Tape tape;
  std::vector<Var> leaves;
  for (const Tensor* t : trainable_parameters(adapter)) leaves.push_back(tape.leaf(*t));
  return adapter_forward(tape, layer, adapter, leaves, tape.leaf(x)).value();
}

}  // namespace loran
